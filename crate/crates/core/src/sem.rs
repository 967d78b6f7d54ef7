//! Linear structural equation models as ground-truth oracles: implied
//! covariance, true total effects, deterministic random instances, and
//! rejection-sampled selected-population covariances for cross-checks.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::gauss::{Interval, LabeledCov, Population};
use crate::graph::{Dag, VertexKind};
use crate::linalg;

/// A linear structural equation model: each vertex is a linear combination
/// of its parents plus a Gaussian error. Coefficients are keyed by edge and
/// must all be nonzero; the error covariance is diagonal unless correlated
/// errors are requested explicitly.
#[derive(Debug, Clone)]
pub struct LinearSem {
    dag: Dag,
    coefs: Vec<f64>, // aligned with dag edge order
    error_cov: DMatrix<f64>,
}

#[derive(Deserialize)]
struct SemFile {
    vertices: Vec<serde_json::Value>,
    edges: Vec<(String, String)>,
    coefficients: BTreeMap<String, f64>,
    #[serde(default)]
    error_cov: Option<Vec<Vec<f64>>>,
}

impl LinearSem {
    /// Builds a model from a DAG and per-edge coefficients. The coefficient
    /// keys must cover the edge set exactly. `error_cov` defaults to the
    /// identity.
    pub fn new<S: AsRef<str>>(
        dag: Dag,
        coefficients: &[(S, S, f64)],
        error_cov: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = dag.vertex_count();
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (p, c, v) in coefficients {
            let pi = dag.index_of(p.as_ref())?;
            let ci = dag.index_of(c.as_ref())?;
            if map.insert((pi, ci), *v).is_some() {
                return Err(Error::CoefficientMismatch(format!(
                    "duplicate coefficient for {} -> {}",
                    p.as_ref(),
                    c.as_ref()
                )));
            }
        }
        let mut coefs = Vec::with_capacity(dag.edge_indices().len());
        for &(p, c) in dag.edge_indices() {
            let v = map.remove(&(p, c)).ok_or_else(|| {
                Error::CoefficientMismatch(format!(
                    "missing coefficient for {} -> {}",
                    dag.names()[p],
                    dag.names()[c]
                ))
            })?;
            if v == 0.0 {
                return Err(Error::ZeroCoefficient {
                    parent: dag.names()[p].clone(),
                    child: dag.names()[c].clone(),
                });
            }
            coefs.push(v);
        }
        if let Some(((p, c), _)) = map.into_iter().next() {
            return Err(Error::CoefficientMismatch(format!(
                "coefficient for non-edge {} -> {}",
                dag.names()[p],
                dag.names()[c]
            )));
        }
        let error_cov = match error_cov {
            Some(m) => {
                if m.nrows() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: m.nrows(),
                    });
                }
                let m = linalg::symmetrized(&m, linalg::SYMMETRY_REL_TOL)?;
                linalg::check_positive_definite(&m)?;
                m
            }
            None => DMatrix::identity(n, n),
        };
        Ok(LinearSem {
            dag,
            coefs,
            error_cov,
        })
    }

    /// Parses the SEM JSON format: the graph JSON plus a `"coefficients"`
    /// map keyed `"Parent->Child"` and an optional `"error_cov"` matrix in
    /// vertex file order.
    pub fn from_json(text: &str) -> Result<Self> {
        let dag = Dag::from_json(text)?;
        let file: SemFile = serde_json::from_str(text)?;
        let _ = (&file.vertices, &file.edges);
        let mut coefs = Vec::new();
        for (key, v) in &file.coefficients {
            let (p, c) = key
                .split_once("->")
                .ok_or_else(|| Error::Parse(format!("bad coefficient key `{key}`")))?;
            coefs.push((p.trim().to_owned(), c.trim().to_owned(), *v));
        }
        let error_cov = match file.error_cov {
            Some(rows) => {
                let n = rows.len();
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                if flat.len() != n * n {
                    return Err(Error::Parse("ragged error_cov".into()));
                }
                Some(DMatrix::from_row_slice(n, n, &flat))
            }
            None => None,
        };
        LinearSem::new(dag, &coefs, error_cov)
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn coefficient(&self, parent: &str, child: &str) -> Result<f64> {
        let pi = self.dag.index_of(parent)?;
        let ci = self.dag.index_of(child)?;
        self.dag
            .edge_indices()
            .iter()
            .position(|&(p, c)| (p, c) == (pi, ci))
            .map(|k| self.coefs[k])
            .ok_or_else(|| {
                Error::CoefficientMismatch(format!("no edge {parent} -> {child}"))
            })
    }

    pub fn error_cov(&self) -> &DMatrix<f64> {
        &self.error_cov
    }

    /// Coefficient matrix `A` with `A[child, parent]` entries, in declared
    /// vertex order.
    fn coef_matrix(&self) -> DMatrix<f64> {
        let n = self.dag.vertex_count();
        let mut a = DMatrix::zeros(n, n);
        for (k, &(p, c)) in self.dag.edge_indices().iter().enumerate() {
            a[(c, p)] = self.coefs[k];
        }
        a
    }

    /// `(I - A)^-1` computed by forward substitution along the topological
    /// order, where it is unit lower triangular; exact and fast.
    fn total_effect_matrix(&self) -> DMatrix<f64> {
        let n = self.dag.vertex_count();
        let a = self.coef_matrix();
        let topo = self.dag.topo_order();
        // B = sum_k A^k restricted to a DAG: walk vertices in topological
        // order, accumulating B[v, src] = sum over parents p of a[v,p] B[p, src]
        let mut b = DMatrix::<f64>::identity(n, n);
        for &v in topo {
            for &p in self.dag.parent_indices(v) {
                let w = a[(v, p)];
                for src in 0..n {
                    let add = w * b[(p, src)];
                    b[(v, src)] += add;
                }
            }
        }
        b
    }

    /// Implied covariance over all vertices (latents and selection included):
    /// `(I - A)^-1 Omega (I - A)^-T`.
    pub fn implied_cov(&self) -> LabeledCov {
        let b = self.total_effect_matrix();
        let sigma = &b * &self.error_cov * b.transpose();
        LabeledCov::new(self.dag.names(), sigma)
            .expect("implied covariance of a valid model is positive definite")
    }

    /// Total effect of `x` on `y`: the sum over all directed paths of the
    /// products of path coefficients. Computed two independent ways that
    /// must agree to 1e-12: explicit path enumeration, and the `(y, x)`
    /// entry of `(I - A)^-1`. Returns 0 when no directed path exists.
    pub fn true_total_effect(&self, x: &str, y: &str) -> Result<f64> {
        let xi = self.dag.index_of(x)?;
        let yi = self.dag.index_of(y)?;
        if xi == yi {
            return Err(Error::OverlappingSets(x.to_owned()));
        }
        let by_paths = self.sum_over_paths(xi, yi);
        let by_matrix = self.total_effect_matrix()[(yi, xi)];
        let tol = 1e-12 * by_matrix.abs().max(1.0);
        assert!(
            (by_paths - by_matrix).abs() <= tol,
            "path enumeration ({by_paths}) and matrix route ({by_matrix}) disagree"
        );
        Ok(by_matrix)
    }

    fn sum_over_paths(&self, x: usize, y: usize) -> f64 {
        // explicit DFS over all directed paths x -> ... -> y
        let n = self.dag.vertex_count();
        let mut child_coefs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (k, &(p, c)) in self.dag.edge_indices().iter().enumerate() {
            child_coefs[p].push((c, self.coefs[k]));
        }
        let mut total = 0.0;
        let mut stack: Vec<(usize, f64)> = vec![(x, 1.0)];
        while let Some((v, prod)) = stack.pop() {
            if v == y {
                total += prod;
                continue;
            }
            for &(c, w) in &child_coefs[v] {
                stack.push((c, prod * w));
            }
        }
        total
    }

    /// Rejection-sampled covariance of the observed non-selection variables
    /// among draws accepted by `lower <= s <= upper`. `n` counts attempted
    /// draws; the acceptance rate must stay above 1e-4. A stochastic
    /// cross-check for the analytic selected covariance, not an estimator.
    pub fn simulate_selected(
        &self,
        s: &str,
        interval: Interval,
        n: usize,
        seed: u64,
    ) -> Result<LabeledCov> {
        let (draws, _attempts) = self.simulate_selected_draws(s, interval, n, seed)?;
        let labels = self.observed_nonselection_labels();
        sample_cov(
            &labels,
            &draws,
            Population::Selected {
                selection: s.to_owned(),
                interval,
            },
        )
    }

    pub fn observed_nonselection_labels(&self) -> Vec<String> {
        self.dag
            .vertices_of_kind(VertexKind::Observed)
            .into_iter()
            .map(str::to_owned)
            .collect()
    }

    /// Accepted draws of the observed non-selection variables (row per
    /// draw), plus the attempt count. Exposed so callers can batch draws for
    /// Monte Carlo error estimates.
    pub fn simulate_selected_draws(
        &self,
        s: &str,
        interval: Interval,
        n: usize,
        seed: u64,
    ) -> Result<(Vec<DVector<f64>>, usize)> {
        let si = self.dag.index_of(s)?;
        if self.dag.kind(s)? != VertexKind::Selection {
            return Err(Error::RoleTypeMismatch {
                name: s.to_owned(),
                expected: "selection".into(),
            });
        }
        let nv = self.dag.vertex_count();
        let a = self.coef_matrix();
        let topo: Vec<usize> = self.dag.topo_order().to_vec();
        let chol = self
            .error_cov
            .clone()
            .cholesky()
            .ok_or(Error::DegenerateConditioning)?;
        let keep: Vec<usize> = self
            .dag
            .names()
            .iter()
            .enumerate()
            .filter(|(i, _)| self.dag.kind(&self.dag.names()[*i]).unwrap() == VertexKind::Observed)
            .map(|(i, _)| i)
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut accepted = Vec::new();
        let mut values = vec![0.0f64; nv];
        for _ in 0..n {
            let z = DVector::from_fn(nv, |_, _| rng.sample::<f64, _>(StandardNormal));
            let eps = chol.l() * z;
            for &v in &topo {
                let mut val = eps[v];
                for &p in self.dag.parent_indices(v) {
                    val += a[(v, p)] * values[p];
                }
                values[v] = val;
            }
            if interval.contains(values[si]) {
                accepted.push(DVector::from_iterator(
                    keep.len(),
                    keep.iter().map(|&i| values[i]),
                ));
            }
        }
        let rate = accepted.len() as f64 / n as f64;
        if rate < 1e-4 {
            return Err(Error::WindowTooNarrow { rate });
        }
        Ok((accepted, n))
    }
}

/// Sample covariance (denominator `k - 1`) of row vectors under the given
/// labels.
pub fn sample_cov<S: AsRef<str>>(
    labels: &[S],
    draws: &[DVector<f64>],
    population: Population,
) -> Result<LabeledCov> {
    let k = draws.len();
    let p = labels.len();
    if k < p + 2 {
        return Err(Error::WindowTooNarrow {
            rate: k as f64 / (p + 2) as f64,
        });
    }
    let mut mean = DVector::zeros(p);
    for d in draws {
        mean += d;
    }
    mean /= k as f64;
    let mut cov = DMatrix::zeros(p, p);
    for d in draws {
        let c = d - &mean;
        cov.syger(1.0, &c, &c, 1.0);
    }
    cov /= (k - 1) as f64;
    // syger fills the lower triangle
    for i in 0..p {
        for j in (i + 1)..p {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    LabeledCov::with_population(labels, cov, population)
}

/// Draws a deterministic random model on the graph: coefficient magnitudes
/// uniform in `[mag.0, mag.1]` with random signs, unit error variances.
/// The default band `[0.3, 1.0]` keeps faithfulness-violating
/// near-cancellations rare. RNG is ChaCha8 seeded from `seed`; streams are
/// deterministic across platforms for a fixed crate version.
pub fn random_sem(dag: &Dag, seed: u64, mag: (f64, f64)) -> Result<LinearSem> {
    let (lo, hi) = mag;
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::DegenerateRange);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = dag.names();
    let coefs: Vec<(String, String, f64)> = dag
        .edge_indices()
        .iter()
        .map(|&(p, c)| {
            let magnitude = rng.gen_range(lo..=hi);
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            (names[p].clone(), names[c].clone(), sign * magnitude)
        })
        .collect();
    LinearSem::new(dag.clone(), &coefs, None)
}

pub const DEFAULT_COEF_MAGNITUDES: (f64, f64) = (0.3, 1.0);
