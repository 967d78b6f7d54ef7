//! Small dense symmetric-matrix helpers shared across the crate.
//!
//! All matrices here are tiny (graphs of interest stay under ~15 variables),
//! so eigenvalue checks before every factorization are affordable and give
//! deterministic singularity diagnostics.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative eigenvalue floor below which a block counts as singular.
/// The closed forms in this crate presuppose nondegeneracy, so near-singular
/// blocks are an error rather than a pseudo-inverse.
pub(crate) const SINGULARITY_REL_TOL: f64 = 1e-10;

/// Relative asymmetry tolerated by covariance constructors.
pub(crate) const SYMMETRY_REL_TOL: f64 = 1e-12;

/// Relative eigenvalue floor for positive definiteness of a covariance.
pub(crate) const PD_REL_TOL: f64 = 1e-12;

pub(crate) fn eigenvalues_sym(m: &DMatrix<f64>) -> DVector<f64> {
    m.clone().symmetric_eigen().eigenvalues
}

/// (min, max) eigenvalue of a symmetric matrix.
pub(crate) fn eig_range(m: &DMatrix<f64>) -> (f64, f64) {
    let ev = eigenvalues_sym(m);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &e in ev.iter() {
        lo = lo.min(e);
        hi = hi.max(e);
    }
    (lo, hi)
}

/// Checks symmetry to `tol` (relative to the largest absolute entry) and
/// returns the exactly symmetrized average.
pub(crate) fn symmetrized(m: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.ncols(),
        });
    }
    let scale = m.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1e-300);
    let mut max_dev = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            max_dev = max_dev.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if max_dev > tol * scale {
        return Err(Error::NotSymmetric {
            max_dev,
            tol: tol * scale,
        });
    }
    let mut out = m.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

pub(crate) fn check_positive_definite(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() == 0 {
        return Ok(());
    }
    let (lo, hi) = eig_range(m);
    if hi <= 0.0 || lo <= PD_REL_TOL * hi {
        return Err(Error::NotPositiveDefinite {
            min_eig: lo,
            max_eig: hi,
        });
    }
    Ok(())
}

fn cholesky_checked(m: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if m.nrows() > 0 {
        let (lo, hi) = eig_range(m);
        if hi <= 0.0 || lo < SINGULARITY_REL_TOL * hi {
            return Err(Error::DegenerateConditioning);
        }
    }
    m.clone()
        .cholesky()
        .ok_or(Error::DegenerateConditioning)
}

/// Solves `a x = b` for a positive-definite `a` via Cholesky.
pub(crate) fn pd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() == 0 {
        return Ok(DMatrix::zeros(0, b.ncols()));
    }
    let chol = cholesky_checked(a)?;
    Ok(chol.solve(b))
}

pub(crate) fn pd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = cholesky_checked(a)?;
    Ok(chol.inverse())
}

/// Schur complement `keep,keep` block after conditioning on `given`:
/// `S_kk - S_kg S_gg^-1 S_gk`.
pub(crate) fn schur_complement(
    m: &DMatrix<f64>,
    keep: &[usize],
    given: &[usize],
) -> Result<DMatrix<f64>> {
    let kk = m.select_rows(keep).select_columns(keep);
    if given.is_empty() {
        return Ok(kk);
    }
    let kg = m.select_rows(keep).select_columns(given);
    let gg = m.select_rows(given).select_columns(given);
    let solved = pd_solve(&gg, &kg.transpose())?; // S_gg^-1 S_gk
    let mut out = &kk - &kg * &solved;
    // Symmetrize away the last-bit asymmetry the two matrix products leave.
    let n = out.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}
