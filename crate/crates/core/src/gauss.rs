//! Exact Gaussian covariance algebra: labeled covariance matrices,
//! conditioning, regression coefficients, the classical coefficient/variance
//! decompositions, truncated-normal moments, and the rank-one
//! selection-adjusted covariance together with its concentration form.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Probability mass below this is treated as an empty selection window.
const WINDOW_MASS_UNDERFLOW: f64 = 1e-300;

/// A selection interval `lower <= S <= upper`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lower: f64,
    upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower >= upper {
            return Err(Error::BadInterval { lower, upper });
        }
        Ok(Interval { lower, upper })
    }

    pub fn unbounded() -> Self {
        Interval {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn is_unbounded(&self) -> bool {
        self.lower == f64::NEG_INFINITY && self.upper == f64::INFINITY
    }
}

// JSON cannot carry infinities; null stands for an unbounded end.
impl Serialize for Interval {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let enc = |v: f64| if v.is_finite() { Some(v) } else { None };
        (enc(self.lower), enc(self.upper)).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (lo, hi): (Option<f64>, Option<f64>) = Deserialize::deserialize(d)?;
        Interval::new(
            lo.unwrap_or(f64::NEG_INFINITY),
            hi.unwrap_or(f64::INFINITY),
        )
        .map_err(serde::de::Error::custom)
    }
}

/// Which population a covariance matrix describes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Population {
    Full,
    Selected {
        selection: String,
        interval: Interval,
    },
}

/// A symmetric positive-definite covariance matrix with variable labels and
/// a population flag. Correlation matrices are accepted as-is; every
/// estimator in this crate is a ratio of covariance products of matching
/// degree, so standardized scale is harmless and reports state that values
/// are computed from the matrix as given.
#[derive(Debug, Clone)]
pub struct LabeledCov {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    matrix: DMatrix<f64>,
    population: Population,
}

impl LabeledCov {
    /// Full-population covariance. The matrix must be symmetric to 1e-12
    /// (relative) and positive definite.
    pub fn new<S: AsRef<str>>(labels: &[S], matrix: DMatrix<f64>) -> Result<Self> {
        Self::with_population(labels, matrix, Population::Full)
    }

    pub fn with_population<S: AsRef<str>>(
        labels: &[S],
        matrix: DMatrix<f64>,
        population: Population,
    ) -> Result<Self> {
        let labels: Vec<String> = labels.iter().map(|s| s.as_ref().to_owned()).collect();
        if matrix.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                got: matrix.nrows(),
            });
        }
        let mut index = HashMap::new();
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        let matrix = linalg::symmetrized(&matrix, linalg::SYMMETRY_REL_TOL)?;
        linalg::check_positive_definite(&matrix)?;
        Ok(LabeledCov {
            labels,
            index,
            matrix,
            population,
        })
    }

    /// Parses the covariance CSV format: first row labels, each following
    /// row one matrix row. Symmetry is enforced to 1e-9 and the matrix is
    /// symmetrized by averaging.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(false)
            .from_reader(text.as_bytes());
        let mut records = rdr.records();
        let labels: Vec<String> = match records.next() {
            Some(rec) => rec?.iter().map(|s| s.to_owned()).collect(),
            None => return Err(Error::Parse("empty covariance file".into())),
        };
        let n = labels.len();
        let mut values = Vec::with_capacity(n * n);
        for rec in records {
            let rec = rec?;
            if rec.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: rec.len(),
                });
            }
            for field in rec.iter() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number `{field}`")))?;
                values.push(v);
            }
        }
        if values.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: values.len(),
            });
        }
        let m = DMatrix::from_row_slice(n, n, &values);
        let m = linalg::symmetrized(&m, 1e-9)?;
        Self::new(&labels, m)
    }

    pub fn from_csv_path(path: &std::path::Path) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.labels.join(",");
        out.push('\n');
        for i in 0..self.labels.len() {
            let row: Vec<String> = (0..self.labels.len())
                .map(|j| format!("{}", self.matrix[(i, j)]))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn population(&self) -> &Population {
        &self.population
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub(crate) fn index_of(&self, label: &str) -> Result<usize> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(label.to_owned()))
    }

    fn indices_of<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        labels.iter().map(|l| self.index_of(l.as_ref())).collect()
    }

    /// Covariance entry by label pair.
    pub fn get(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.matrix[(self.index_of(a)?, self.index_of(b)?)])
    }

    /// Returns a copy with the population flag replaced; used when a parsed
    /// matrix is known to come from a selected sample.
    pub fn assume_population(&self, population: Population) -> LabeledCov {
        LabeledCov {
            labels: self.labels.clone(),
            index: self.index.clone(),
            matrix: self.matrix.clone(),
            population,
        }
    }

    /// Conditional covariance of `keep` given `given` (Schur complement).
    /// The population flag is preserved.
    pub fn conditional_cov<K: AsRef<str>, G: AsRef<str>>(
        &self,
        keep: &[K],
        given: &[G],
    ) -> Result<LabeledCov> {
        let ki = self.indices_of(keep)?;
        let gi = self.indices_of(given)?;
        for k in &ki {
            if gi.contains(k) {
                return Err(Error::OverlappingSets(self.labels[*k].clone()));
            }
        }
        let sub = linalg::schur_complement(&self.matrix, &ki, &gi)?;
        let labels: Vec<String> = ki.iter().map(|&i| self.labels[i].clone()).collect();
        LabeledCov::with_population(&labels, sub, self.population.clone())
    }

    /// Marginal covariance after dropping `drop` (a plain submatrix for
    /// Gaussians). The population flag is preserved.
    pub fn marginal_cov<S: AsRef<str>>(&self, drop: &[S]) -> Result<LabeledCov> {
        let di = self.indices_of(drop)?;
        let keep: Vec<&str> = self
            .labels
            .iter()
            .enumerate()
            .filter(|(i, _)| !di.contains(i))
            .map(|(_, l)| l.as_str())
            .collect();
        self.conditional_cov(&keep, &[] as &[&str])
    }

    /// Regression coefficients of `xs` in the regression of `y` on
    /// `xs ∪ given`: `B = S_yx.given S_xx.given^-1`.
    pub fn regression_coefs<X: AsRef<str>, G: AsRef<str>>(
        &self,
        y: &str,
        xs: &[X],
        given: &[G],
    ) -> Result<DVector<f64>> {
        if xs.is_empty() {
            return Ok(DVector::zeros(0));
        }
        let mut keep: Vec<&str> = vec![y];
        keep.extend(xs.iter().map(|s| s.as_ref()));
        let cond = self.conditional_cov(&keep, given)?;
        let p = xs.len();
        let sxx = cond.matrix.view_range(1..1 + p, 1..1 + p).into_owned();
        let sxy = cond.matrix.view_range(1..1 + p, 0..1).into_owned();
        let coef = linalg::pd_solve(&sxx, &sxy)?;
        Ok(DVector::from_column_slice(coef.as_slice()))
    }

    /// Residual of the classical coefficient decomposition
    /// `b_yx.s = b_yx.st + B_yt.xs B_tx.s`; contractually below 1e-10 in
    /// magnitude for any positive-definite input.
    pub fn cochran_residual<A: AsRef<str>, B: AsRef<str>>(
        &self,
        y: &str,
        x: &str,
        s: &[A],
        t: &[B],
    ) -> Result<f64> {
        let s: Vec<&str> = s.iter().map(|v| v.as_ref()).collect();
        let t: Vec<&str> = t.iter().map(|v| v.as_ref()).collect();
        let b_yx_s = self.regression_coefs(y, &[x], &s)?[0];
        let mut st = s.clone();
        st.extend(&t);
        let b_yx_st = self.regression_coefs(y, &[x], &st)?[0];
        let mut xs = vec![x];
        xs.extend(&s);
        let b_yt_xs = self.regression_coefs(y, &t, &xs)?;
        let mut correction = 0.0;
        for (k, tv) in t.iter().enumerate() {
            let b_tx_s = self.regression_coefs(tv, &[x], &s)?[0];
            correction += b_yt_xs[k] * b_tx_s;
        }
        Ok(b_yx_s - (b_yx_st + correction))
    }

    /// Residual variance via the variance decomposition
    /// `s_yy.xS = s_yy.x - B_yS.x S_SS.x B_yS.x'`; must agree with the direct
    /// Schur route to 1e-12.
    pub fn residual_var<S: AsRef<str>>(&self, y: &str, x: &str, s: &[S]) -> Result<f64> {
        let s: Vec<&str> = s.iter().map(|v| v.as_ref()).collect();
        let var_y_x = self.conditional_cov(&[y], &[x])?.matrix[(0, 0)];
        if s.is_empty() {
            return Ok(var_y_x);
        }
        let b = self.regression_coefs(y, &s, &[x])?;
        let s_ss_x = self.conditional_cov(&s, &[x])?;
        let quad = (s_ss_x.matrix() * &b).dot(&b);
        Ok(var_y_x - quad)
    }

    /// Covariance of the remaining variables in the population selected by
    /// `lower <= s <= upper`: `S_xx - B_xs B_xs' (s_ss - s_s*s*)`, a rank-one
    /// deflation whose magnitude is the truncation variance deficit.
    /// Variables are zero-mean by model convention.
    pub fn selected_cov(&self, s: &str, interval: Interval) -> Result<LabeledCov> {
        if self.population != Population::Full {
            return Err(Error::PopulationMismatch {
                expected: "full".into(),
            });
        }
        let si = self.index_of(s)?;
        let n = self.dim();
        let s_ss = self.matrix[(si, si)];
        let (_, var_trunc) = truncated_moments(0.0, s_ss, interval)?;
        let deficit = (s_ss - var_trunc).max(0.0);
        let keep: Vec<usize> = (0..n).filter(|&i| i != si).collect();
        let mut out = self.matrix.select_rows(&keep).select_columns(&keep);
        let b: Vec<f64> = keep.iter().map(|&i| self.matrix[(i, si)] / s_ss).collect();
        for (r, &br) in b.iter().enumerate() {
            for (c, &bc) in b.iter().enumerate() {
                out[(r, c)] -= br * bc * deficit;
            }
        }
        let labels: Vec<String> = keep.iter().map(|&i| self.labels[i].clone()).collect();
        LabeledCov::with_population(
            &labels,
            out,
            Population::Selected {
                selection: s.to_owned(),
                interval,
            },
        )
    }

    /// Verifies the concentration form of selection: the inverse of the
    /// selected covariance minus the inverse of the full covariance must be
    /// rank one and positive semidefinite. Returns the Frobenius norm of
    /// everything beyond the principal eigenpair; contractually <= 1e-9.
    pub fn concentration_form_check(&self, s: &str, interval: Interval) -> Result<f64> {
        let selected = self.selected_cov(s, interval)?;
        let full = self.marginal_cov(&[s])?;
        let inv_sel = linalg::pd_inverse(selected.matrix())?;
        let inv_full = linalg::pd_inverse(full.matrix())?;
        let diff = &inv_sel - &inv_full;
        let eig = linalg::eigenvalues_sym(&diff);
        let mut vals: Vec<f64> = eig.iter().copied().collect();
        vals.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).unwrap());
        let principal = vals.first().copied().unwrap_or(0.0);
        let scale = inv_sel.norm().max(1.0);
        if principal < -1e-9 * scale {
            return Err(Error::IncompatibleCovariance(format!(
                "concentration difference has negative principal eigenvalue {principal:e}"
            )));
        }
        Ok(vals.iter().skip(1).map(|v| v * v).sum::<f64>().sqrt())
    }
}

pub(crate) fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / SQRT_2PI
}

pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Probability mass of a standard normal on `(a, b)`, using whichever tail of
/// the complementary error function stays accurate.
fn window_mass(a: f64, b: f64) -> f64 {
    if a <= 0.0 && b >= 0.0 {
        // straddles the mode; both CDF evaluations are well conditioned
        normal_cdf(b) - normal_cdf(a)
    } else if a > 0.0 {
        0.5 * (libm::erfc(a / SQRT_2) - libm::erfc(b / SQRT_2))
    } else {
        0.5 * (libm::erfc(-b / SQRT_2) - libm::erfc(-a / SQRT_2))
    }
}

/// Mean and variance of `S ~ Normal(mean, var)` conditioned on the interval.
/// The returned variance never exceeds `var`, so the selection deficit
/// `var - var_truncated` is nonnegative.
pub fn truncated_moments(mean: f64, var: f64, interval: Interval) -> Result<(f64, f64)> {
    if !(var > 0.0) {
        return Err(Error::NotPositiveDefinite {
            min_eig: var,
            max_eig: var,
        });
    }
    if interval.is_unbounded() {
        return Ok((mean, var));
    }
    let sd = var.sqrt();
    let alpha = (interval.lower - mean) / sd;
    let beta = (interval.upper - mean) / sd;
    let mass = window_mass(alpha, beta);
    if !(mass > WINDOW_MASS_UNDERFLOW) {
        return Err(Error::EmptyWindow);
    }
    let p_a = if alpha.is_finite() { normal_pdf(alpha) } else { 0.0 };
    let p_b = if beta.is_finite() { normal_pdf(beta) } else { 0.0 };
    let ap_a = if alpha.is_finite() { alpha * p_a } else { 0.0 };
    let bp_b = if beta.is_finite() { beta * p_b } else { 0.0 };
    let shift = (p_a - p_b) / mass;
    let t_mean = mean + sd * shift;
    let t_var = var * (1.0 + (ap_a - bp_b) / mass - shift * shift);
    let t_var = t_var.min(var);
    if !(t_var > 0.0) {
        // catastrophic cancellation: the window is numerically empty
        return Err(Error::EmptyWindow);
    }
    Ok((t_mean, t_var))
}
