//! Bundled correlation matrix from the car-body painting process study
//! (Okuno et al., 38 samples), together with the published total-effect
//! estimates used as reference values.
//!
//! The entries are embedded exactly as printed (three decimals); nothing is
//! re-derived. Covariance information on `X4` and `X10` is unavailable,
//! which is what motivates the quartet estimators on this dataset.

use nalgebra::DMatrix;

use crate::gauss::LabeledCov;
use crate::identify::Roles;

pub const LABELS: [&str; 7] = ["X1", "X2", "X5", "X6", "X8", "X9", "Y"];

#[rustfmt::skip]
pub const MATRIX: [[f64; 7]; 7] = [
    //  X1      X2      X5      X6      X8      X9      Y
    [ 1.000, -0.736,  0.028, -0.042,  0.216,  0.283, -0.091],
    [-0.736,  1.000, -0.063,  0.095, -0.684, -0.635,  0.326],
    [ 0.028, -0.063,  1.000,  0.291,  0.076,  0.099, -0.277],
    [-0.042,  0.095,  0.291,  1.000, -0.114, -0.149, -0.250],
    [ 0.216, -0.684,  0.076, -0.114,  1.000,  0.761, -0.493],
    [ 0.283, -0.635,  0.099, -0.149,  0.761,  1.000, -0.475],
    [-0.091,  0.326, -0.277, -0.250, -0.493, -0.475,  1.000],
];

/// Published reference estimate for the total effect of `X2` on `Y`.
pub const REFERENCE_X2: f64 = -0.116;

/// Published reference estimate for the total effect of `X6` on `Y`.
pub const REFERENCE_X6: f64 = -0.465;

pub fn correlation_matrix() -> LabeledCov {
    let flat: Vec<f64> = MATRIX.iter().flatten().copied().collect();
    LabeledCov::new(&LABELS, DMatrix::from_row_slice(7, 7, &flat))
        .expect("bundled matrix is symmetric positive definite")
}

/// Role assignment used for the `X2` row: z = X1, w = X9, t = {X8}.
pub fn roles_x2() -> Roles {
    Roles::new("X2", "Y", "X1", "X9", &["X8"])
}

/// Role assignment used for the `X6` row: z = X5, w = X9, t = empty.
pub fn roles_x6() -> Roles {
    Roles::new("X6", "Y", "X5", "X9", &[] as &[&str])
}
