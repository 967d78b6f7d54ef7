//! Deterministic self-test suites: the analytic round trips and the
//! d-separation/partial-correlation cross-check. The CLI exposes these as a
//! runtime command; the integration tests drive the same code.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::gauss::Interval;
use crate::graph::{Dag, VertexKind};
use crate::identify::{
    latent_quartet_estimate, pipeline_estimate, selection_quartet_estimate, Roles,
};
use crate::sem::random_sem;

/// Reference graphs used by the suites and the examples.
pub mod fixtures {
    use super::*;
    use VertexKind::{Latent, Observed, Selection};

    /// Latent-confounder quartet testbed: a latent `U` into every observed
    /// vertex, plus `Z -> X -> Y <- W`. The quartet criterion identifies the
    /// `X -> Y` effect even though the full model is not identified.
    pub fn latent_quartet_graph() -> Dag {
        Dag::new(
            &[
                ("U", Latent),
                ("Z", Observed),
                ("W", Observed),
                ("X", Observed),
                ("Y", Observed),
            ],
            &[
                ("U", "X"),
                ("U", "Y"),
                ("U", "Z"),
                ("U", "W"),
                ("Z", "X"),
                ("X", "Y"),
                ("W", "Y"),
            ],
        )
        .expect("fixture graph is valid")
    }

    /// Selection-bias quartet testbed: `Z -> X -> Y`, and a selection sink
    /// `S` fed by `Z`, `Y`, and `W`.
    pub fn selection_quartet_graph() -> Dag {
        Dag::new(
            &[
                ("Z", Observed),
                ("W", Observed),
                ("X", Observed),
                ("Y", Observed),
                ("S", Selection),
            ],
            &[
                ("Z", "X"),
                ("X", "Y"),
                ("Z", "S"),
                ("Y", "S"),
                ("W", "S"),
            ],
        )
        .expect("fixture graph is valid")
    }

    /// Combined latent + selection testbed: `U` confounds `X -> Y` and loads
    /// on two pure indicators `P1`, `P2`; selection depends on the response
    /// and on three mutually independent drivers `A`, `B`, `C`.
    pub fn combined_graph() -> Dag {
        Dag::new(
            &[
                ("U", Latent),
                ("X", Observed),
                ("Y", Observed),
                ("P1", Observed),
                ("P2", Observed),
                ("A", Observed),
                ("B", Observed),
                ("C", Observed),
                ("S", Selection),
            ],
            &[
                ("U", "X"),
                ("U", "Y"),
                ("U", "P1"),
                ("U", "P2"),
                ("X", "Y"),
                ("Y", "S"),
                ("A", "S"),
                ("B", "S"),
                ("C", "S"),
            ],
        )
        .expect("fixture graph is valid")
    }

    /// Two disjoint latent factors, each with its own indicator block; used
    /// for the staged factor-peeling tests.
    pub fn two_factor_graph() -> Dag {
        Dag::new(
            &[
                ("U1", Latent),
                ("U2", Latent),
                ("X1", Observed),
                ("X2", Observed),
                ("X3", Observed),
                ("X4", Observed),
                ("X5", Observed),
                ("X6", Observed),
            ],
            &[
                ("U1", "X1"),
                ("U1", "X2"),
                ("U1", "X3"),
                ("U2", "X4"),
                ("U2", "X5"),
                ("U2", "X6"),
            ],
        )
        .expect("fixture graph is valid")
    }
}

/// Outcome of one suite: case count, failure count, and the worst error the
/// suite observed (suite-specific meaning).
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    pub max_err: f64,
    pub detail: String,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Round trip for the latent-confounder quartet: on random models over the
/// latent fixture, the estimate from the exact latent-marginalized implied
/// covariance must match the true total effect.
pub fn latent_round_trip(runs: usize, seed: u64) -> Result<SuiteReport> {
    let g = fixtures::latent_quartet_graph();
    let roles = Roles::new("X", "Y", "Z", "W", &[] as &[&str]);
    let mut max_err = 0.0f64;
    let mut failures = 0;
    for k in 0..runs {
        let sem = random_sem(&g, seed.wrapping_add(k as u64), (0.3, 1.0))?;
        let observed = sem.implied_cov().marginal_cov(&["U"])?;
        let est = latent_quartet_estimate(&observed, &roles)?;
        let truth = sem.true_total_effect("X", "Y")?;
        let err = (est - truth).abs();
        max_err = max_err.max(err);
        if !(err < 1e-9) {
            failures += 1;
        }
    }
    Ok(SuiteReport {
        name: "latent_round_trip".into(),
        cases: runs,
        failures,
        max_err,
        detail: format!("max |estimate - truth| = {max_err:.3e} over {runs} random models"),
    })
}

/// Round trip for the selection quartet: for each window, the estimate from
/// the analytic selected covariance must match the true effect, and the
/// estimates across windows must coincide.
pub fn selection_round_trip(runs: usize, seed: u64, windows: &[Interval]) -> Result<SuiteReport> {
    let g = fixtures::selection_quartet_graph();
    let roles = Roles::new("X", "Y", "Z", "W", &[] as &[&str]);
    let mut max_err = 0.0f64;
    let mut failures = 0;
    for k in 0..runs {
        let sem = random_sem(&g, seed.wrapping_add(k as u64), (0.3, 1.0))?;
        let truth = sem.true_total_effect("X", "Y")?;
        let full = sem.implied_cov();
        let mut estimates = Vec::with_capacity(windows.len());
        for &iv in windows {
            let sel = full.selected_cov("S", iv)?;
            let est = selection_quartet_estimate(&sel, &roles)?;
            let err = (est - truth).abs();
            max_err = max_err.max(err);
            if !(err < 1e-9) {
                failures += 1;
            }
            estimates.push(est);
        }
        for pair in estimates.windows(2) {
            let spread = (pair[0] - pair[1]).abs();
            max_err = max_err.max(spread);
            if !(spread < 1e-9) {
                failures += 1;
            }
        }
    }
    Ok(SuiteReport {
        name: "selection_round_trip".into(),
        cases: runs * windows.len(),
        failures,
        max_err,
        detail: format!(
            "max |estimate - truth| and cross-window spread = {max_err:.3e} over {runs} models x \
             {} windows",
            windows.len()
        ),
    })
}

/// End-to-end pipeline round trip on the combined fixture: analytic selected
/// covariance in, de-selection, factor peeling, adjusted estimate out.
pub fn pipeline_round_trip(runs: usize, seed: u64) -> Result<SuiteReport> {
    let g = fixtures::combined_graph();
    let iv = Interval::new(-0.8, 1.2)?;
    let mut max_err = 0.0f64;
    let mut failures = 0;
    for k in 0..runs {
        let sem = random_sem(&g, seed.wrapping_add(k as u64), (0.3, 1.0))?;
        let truth = sem.true_total_effect("X", "Y")?;
        let observed_plus_s = sem.implied_cov().marginal_cov(&["U"])?;
        let sel = observed_plus_s.selected_cov("S", iv)?;
        let cert = pipeline_estimate(&g, &sel, "X", "Y")?;
        match cert.estimate {
            Some(est) if cert.passed() => {
                let err = (est - truth).abs();
                max_err = max_err.max(err);
                if !(err < 1e-6) {
                    failures += 1;
                }
            }
            _ => failures += 1,
        }
    }
    Ok(SuiteReport {
        name: "pipeline_round_trip".into(),
        cases: runs,
        failures,
        max_err,
        detail: format!("max |estimate - truth| = {max_err:.3e} over {runs} random models"),
    })
}

/// Deterministic random DAG on `n` observed vertices: edges i -> j for i < j
/// under a fixed permutation, each present with probability `p`.
pub fn random_dag(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Dag {
    let names: Vec<String> = (0..n).map(|i| format!("V{i}")).collect();
    let vertices: Vec<(String, VertexKind)> = names
        .iter()
        .map(|s| (s.clone(), VertexKind::Observed))
        .collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < p {
                edges.push((names[i].clone(), names[j].clone()));
            }
        }
    }
    Dag::new(&vertices, &edges).expect("forward edges cannot form a cycle")
}

/// Exhaustive d-separation vs. partial-correlation agreement over random
/// DAGs: for every ordered vertex pair and every conditioning set of size
/// at most `max_cond`, the graphical verdict must match vanishing partial
/// correlation (threshold 1e-8) on a random model; coefficients are redrawn
/// when a coincidental cancellation masks an open path.
pub fn dsep_oracle(n_dags: usize, max_vertices: usize, max_cond: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = 0usize;
    let mut failures = 0usize;
    let mut max_sep_corr = 0.0f64; // largest |rho| seen on a separated pair
    for d in 0..n_dags {
        let n = rng.gen_range(3..=max_vertices);
        let p = rng.gen_range(0.25..0.55);
        let g = random_dag(n, p, &mut rng);
        let names: Vec<&str> = g.names().iter().map(String::as_str).collect();

        // all (a, b, C) queries with the graphical verdict attached
        let mut queries: Vec<(usize, usize, Vec<usize>, bool)> = Vec::new();
        let others = |a: usize, b: usize| -> Vec<usize> {
            (0..n).filter(|&v| v != a && v != b).collect()
        };
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let rest = others(a, b);
                let rest_names: Vec<&str> = rest.iter().map(|&i| names[i]).collect();
                for cond in subsets(&rest_names, max_cond) {
                    let sep = g.d_separated(&[names[a]], &[names[b]], &cond)?;
                    let cond_idx: Vec<usize> = cond
                        .iter()
                        .map(|c| names.iter().position(|x| x == c).unwrap())
                        .collect();
                    queries.push((a, b, cond_idx, sep));
                }
            }
        }

        // redraw coefficients while any open-path query shows a coincidental
        // near-zero correlation
        let mut ok = false;
        for attempt in 0..6 {
            let sem = random_sem(&g, seed ^ ((d as u64) << 16) ^ attempt, (0.3, 1.0))?;
            let cov = sem.implied_cov();
            let mut coincidence = false;
            let mut mismatch = false;
            for (a, b, cond_idx, sep) in &queries {
                let cond_names: Vec<&str> = cond_idx.iter().map(|&i| names[i]).collect();
                let sub = cov.conditional_cov(&[names[*a], names[*b]], &cond_names)?;
                let saa = sub.matrix()[(0, 0)];
                let sbb = sub.matrix()[(1, 1)];
                let sab = sub.matrix()[(0, 1)];
                let rho = sab / (saa * sbb).sqrt();
                if *sep {
                    max_sep_corr = max_sep_corr.max(rho.abs());
                    if rho.abs() >= 1e-8 {
                        mismatch = true; // graph says blocked, numbers disagree
                    }
                } else if rho.abs() < 1e-8 {
                    coincidence = true; // open path cancelled; try new weights
                }
            }
            if mismatch {
                break;
            }
            if !coincidence {
                ok = true;
                break;
            }
        }
        cases += queries.len();
        if !ok {
            failures += 1;
        }
    }
    Ok(SuiteReport {
        name: "dsep_oracle".into(),
        cases,
        failures,
        max_err: max_sep_corr,
        detail: format!(
            "{cases} queries over {n_dags} DAGs; max |partial corr| on separated pairs = \
             {max_sep_corr:.3e}"
        ),
    })
}

fn subsets<'a>(items: &[&'a str], max_size: usize) -> Vec<Vec<&'a str>> {
    let mut out: Vec<Vec<&'a str>> = vec![Vec::new()];
    for &it in items {
        let mut extended = Vec::new();
        for s in &out {
            if s.len() < max_size {
                let mut t = s.clone();
                t.push(it);
                extended.push(t);
            }
        }
        out.extend(extended);
    }
    out
}
