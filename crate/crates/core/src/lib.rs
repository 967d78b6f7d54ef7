//! Decide, from a directed acyclic graph, whether the total effect of a
//! treatment on a response in a linear structural equation model is
//! identifiable despite latent variables and interval selection, and compute
//! the closed-form estimate from an observed covariance matrix.
//!
//! Modules:
//! - [`graph`]: DAGs, d-separation, back-door admissibility, zero patterns,
//!   the odd-cycle identifiability condition;
//! - [`gauss`]: labeled covariance matrices and exact Gaussian conditioning,
//!   truncated-normal moments, selection-adjusted covariances;
//! - [`sem`]: linear structural equation models as ground-truth oracles;
//! - [`identify`]: condition checkers, quartet estimators, the single-factor
//!   solver, staged factor peeling, the combined pipeline, certificate search;
//! - [`okuno`]: the bundled painting-process correlation matrix;
//! - [`selftest`]: deterministic round-trip suites exposed to the CLI.

pub mod error;
pub mod gauss;
pub mod graph;
pub mod identify;
pub mod okuno;
pub mod selftest;
pub mod sem;

pub(crate) mod linalg;

pub use error::{Error, Result};
pub use gauss::{truncated_moments, Interval, LabeledCov, Population};
pub use graph::{Dag, PatternMode, Relation, UndirectedGraph, VertexKind, ZeroPattern};
pub use identify::{
    adjusted_effect, check_latent_quartet, check_selection_quartet, latent_quartet_estimate,
    peel_factors, pipeline_estimate, search_certificates, selection_quartet_estimate,
    single_factor_solve, Certificate, Check, FactorSign, RoleAssignment, Roles, Theorem,
};
pub use sem::{random_sem, LinearSem};
