//! Local iterative balancing heuristic for ν̄ and its convergence study.
//!
//! Each node moves its scale toward the geometric middle of its largest
//! incoming and outgoing weights:
//!
//! ```text
//! d_k ← (1 − θ) d_k + θ · √(max_{r≠k} M_rk d_r) / √(max_{c≠k} M_kc / d_c)
//! ```
//!
//! Only neighbouring scales enter the update, so it can run as a
//! distributed protocol. With θ = 1 the synchronous update can oscillate
//! with period two; interpolation with θ < 1 damps it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::magnitude::MagnitudeMatrix;
use crate::nubar::{nubar_exact, PhiView, ScalingVector};

const REL_FLOOR: f64 = 1e-300;
const OSCILLATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateMode {
    /// Every coordinate is computed from the previous iterate.
    #[default]
    Synchronous,
    /// Coordinates are updated in index order, each seeing the ones before it.
    GaussSeidel,
}

#[derive(Debug, Clone, Copy)]
pub struct BalanceOptions {
    pub theta: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub mode: UpdateMode,
}

impl Default for BalanceOptions {
    fn default() -> Self {
        BalanceOptions {
            theta: 0.5,
            max_iter: 10_000,
            tol: 1e-3,
            mode: UpdateMode::Synchronous,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub t: usize,
    /// The iterate `d[t + 1]` produced at step `t`.
    pub d: Vec<f64>,
    pub objective: f64,
    /// `|obj_t − obj_{t−1}| / max(obj_{t−1}, 1e-300)`.
    pub rel_change: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceTrace {
    /// Objective at the all-ones start.
    pub initial_objective: f64,
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    pub oscillating: bool,
    pub final_scaling: ScalingVector,
}

impl BalanceTrace {
    pub fn final_objective(&self) -> f64 {
        self.iterations
            .last()
            .map_or(self.initial_objective, |r| r.objective)
    }

    /// Number of steps taken.
    pub fn steps(&self) -> usize {
        self.iterations.len()
    }

    /// First step whose relative change is at most `tol`.
    pub fn first_step_below(&self, tol: f64) -> Option<usize> {
        self.first_record_below(tol).map(|r| r.t)
    }

    pub fn first_record_below(&self, tol: f64) -> Option<&IterationRecord> {
        self.iterations.iter().find(|r| r.rel_change <= tol)
    }
}

fn objective(m: &MagnitudeMatrix, d: &[f64]) -> f64 {
    let s = ScalingVector::new(d.to_vec()).expect("iterates stay nonnegative");
    PhiView::new(m, &s).max()
}

fn coordinate(m: &MagnitudeMatrix, d: &[f64], k: usize, theta: f64) -> f64 {
    let n = m.n();
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for r in 0..n {
        if r != k {
            num = num.max(m.get(r, k) * d[r]);
            den = den.max(m.get(k, r) / d[r]);
        }
    }
    // empty in- or out-neighbourhood: leave the coordinate where it is
    let target = if num > 0.0 && den > 0.0 {
        num.sqrt() / den.sqrt()
    } else {
        d[k]
    };
    (1.0 - theta) * d[k] + theta * target
}

fn step(m: &MagnitudeMatrix, d: &[f64], theta: f64, mode: UpdateMode) -> Vec<f64> {
    match mode {
        UpdateMode::Synchronous => (0..m.n()).map(|k| coordinate(m, d, k, theta)).collect(),
        UpdateMode::GaussSeidel => {
            let mut next = d.to_vec();
            for k in 0..m.n() {
                next[k] = coordinate(m, &next, k, theta);
            }
            next
        }
    }
}

fn approx_eq(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x - y).abs() <= OSCILLATION_TOL * x.abs().max(y.abs()))
}

/// Runs the synchronous heuristic from `d = 1`.
pub fn heuristic_balance(
    m: &MagnitudeMatrix,
    theta: f64,
    max_iter: usize,
    tol: f64,
) -> Result<BalanceTrace> {
    heuristic_balance_with(
        m,
        &BalanceOptions {
            theta,
            max_iter,
            tol,
            mode: UpdateMode::Synchronous,
        },
    )
}

/// Runs the heuristic until the relative objective change drops to `tol` or
/// `max_iter` steps have been taken.
///
/// A small change is accepted as convergence only if the next iterate does
/// not return to the previous one: a period-two orbit keeps the objective
/// constant while `d` flips back and forth, and is flagged as oscillating.
pub fn heuristic_balance_with(m: &MagnitudeMatrix, opts: &BalanceOptions) -> Result<BalanceTrace> {
    let BalanceOptions {
        theta,
        max_iter,
        tol,
        mode,
    } = *opts;
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::validation(format!(
            "theta must lie in (0, 1], got {theta}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::validation(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let n = m.n();
    let mut d = vec![1.0; n];
    let mut obj = objective(m, &d);
    let initial_objective = obj;
    let mut prev: Option<Vec<f64>> = None;
    let mut records = Vec::new();
    let mut converged = false;
    let mut oscillating = false;

    for t in 1..=max_iter {
        let next = step(m, &d, theta, mode);
        let next_obj = objective(m, &next);
        let rel_change = (next_obj - obj).abs() / obj.max(REL_FLOOR);
        if let Some(p) = &prev {
            if approx_eq(&next, p) && !approx_eq(&d, p) {
                oscillating = true;
            }
        }
        records.push(IterationRecord {
            t,
            d: next.clone(),
            objective: next_obj,
            rel_change,
        });
        if rel_change <= tol {
            let ahead = step(m, &next, theta, mode);
            if approx_eq(&ahead, &d) && !approx_eq(&next, &d) {
                oscillating = true;
            } else {
                converged = true;
                d = next;
                break;
            }
        }
        prev = Some(std::mem::replace(&mut d, next));
        obj = next_obj;
    }

    Ok(BalanceTrace {
        initial_objective,
        iterations: records,
        converged,
        oscillating,
        final_scaling: ScalingVector::new(d)?,
    })
}

/// Entry distribution for randomly generated study matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatrixDistribution {
    /// i.i.d. uniform on [0, 1).
    Uniform,
    /// Each entry nonzero with probability `density`, then uniform.
    SparseUniform { density: f64 },
}

impl std::str::FromStr for MatrixDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "uniform" {
            return Ok(MatrixDistribution::Uniform);
        }
        if let Some(p) = s.strip_prefix("sparse:") {
            let density: f64 = p
                .parse()
                .map_err(|_| Error::validation(format!("bad density in distribution '{s}'")))?;
            if !(density > 0.0 && density <= 1.0) {
                return Err(Error::validation("density must lie in (0, 1]"));
            }
            return Ok(MatrixDistribution::SparseUniform { density });
        }
        Err(Error::validation(format!(
            "unknown distribution '{s}' (expected 'uniform' or 'sparse:<p>')"
        )))
    }
}

/// Random nonnegative `n×n` matrix, reproducible from `seed`.
pub fn random_matrix(n: usize, seed: u64, dist: MatrixDistribution) -> MagnitudeMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * n)
        .map(|_| match dist {
            MatrixDistribution::Uniform => rng.random::<f64>(),
            MatrixDistribution::SparseUniform { density } => {
                let keep = rng.random::<f64>() < density;
                let v = rng.random::<f64>();
                if keep {
                    v
                } else {
                    0.0
                }
            }
        })
        .collect();
    MagnitudeMatrix::from_row_major(n, data).expect("uniform draws are valid entries")
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub ns: Vec<usize>,
    pub trials: usize,
    pub thetas: Vec<f64>,
    pub tols: Vec<f64>,
    pub seed: u64,
    pub max_iter: usize,
    pub distribution: MatrixDistribution,
}

/// One line of the study table. Trials that never reach `tol` are counted
/// in `failures` and enter the statistics censored at `max_iter`.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub n: usize,
    pub theta: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub median_iters: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub n: usize,
    pub theta: f64,
    pub trial: usize,
    pub seed: u64,
    /// Steps to reach each tolerance of the grid, in grid order.
    pub steps_to_tol: Vec<Option<usize>>,
    /// Objective at the step each tolerance was first met.
    pub objective_at_tol: Vec<Option<f64>>,
    pub converged: bool,
    pub final_objective: f64,
    pub nubar: f64,
}

impl TrialOutcome {
    pub fn relative_gap(&self) -> f64 {
        if self.nubar > 0.0 {
            (self.final_objective - self.nubar).abs() / self.nubar
        } else {
            self.final_objective
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub rows: Vec<StudyRow>,
    pub outcomes: Vec<TrialOutcome>,
}

fn median(v: &mut [usize]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_unstable();
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h] as f64
    } else {
        0.5 * (v[h - 1] + v[h]) as f64
    }
}

/// Worst-case and median step counts of the heuristic over random matrices,
/// for every `(n, θ, tol)` combination. Deterministic for a fixed seed.
pub fn convergence_study(cfg: &StudyConfig) -> Result<StudyResult> {
    if cfg.ns.contains(&0) || cfg.trials == 0 || cfg.max_iter == 0 {
        return Err(Error::validation(
            "sizes, trials and max_iter must be positive",
        ));
    }
    if cfg.tols.is_empty() || cfg.tols.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::validation("tolerances must be positive"));
    }
    if cfg.thetas.is_empty() || cfg.thetas.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return Err(Error::validation("thetas must lie in (0, 1]"));
    }
    let tightest = cfg.tols.iter().copied().fold(f64::INFINITY, f64::min);

    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
    for &n in &cfg.ns {
        let per_trial: Vec<Vec<TrialOutcome>> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| {
                let seed = cfg.seed.wrapping_add(trial as u64);
                let m = random_matrix(n, seed, cfg.distribution);
                let nubar = nubar_exact(&m).value;
                cfg.thetas
                    .iter()
                    .map(|&theta| {
                        let trace = heuristic_balance(&m, theta, cfg.max_iter, tightest)
                            .expect("parameters validated above");
                        TrialOutcome {
                            n,
                            theta,
                            trial,
                            seed,
                            steps_to_tol: cfg
                                .tols
                                .iter()
                                .map(|&t| trace.first_step_below(t))
                                .collect(),
                            objective_at_tol: cfg
                                .tols
                                .iter()
                                .map(|&t| trace.first_record_below(t).map(|r| r.objective))
                                .collect(),
                            converged: trace.converged,
                            final_objective: trace.final_objective(),
                            nubar,
                        }
                    })
                    .collect()
            })
            .collect();

        for (ti, &theta) in cfg.thetas.iter().enumerate() {
            for (k, &tol) in cfg.tols.iter().enumerate() {
                let mut counts: Vec<usize> = Vec::with_capacity(cfg.trials);
                let mut failures = 0;
                for trial in &per_trial {
                    match trial[ti].steps_to_tol[k] {
                        Some(s) => counts.push(s),
                        None => {
                            failures += 1;
                            counts.push(cfg.max_iter);
                        }
                    }
                }
                rows.push(StudyRow {
                    n,
                    theta,
                    tol,
                    max_iters: counts.iter().copied().max().unwrap_or(0),
                    median_iters: median(&mut counts),
                    failures,
                });
            }
        }
        outcomes.extend(per_trial.into_iter().flatten());
    }
    Ok(StudyResult { rows, outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn osc_matrix(x: f64) -> MagnitudeMatrix {
        MagnitudeMatrix::from_rows(&[vec![0.0, 1.0], vec![x * x, 0.0]]).unwrap()
    }

    #[test]
    fn full_step_oscillates() {
        let trace = heuristic_balance(&osc_matrix(0.5), 1.0, 50, 1e-3).unwrap();
        assert_eq!(trace.iterations[0].d, vec![0.5, 2.0]);
        assert!(trace.oscillating);
        assert!(!trace.converged);
        assert_eq!(trace.steps(), 50);
    }

    #[test]
    fn half_step_converges() {
        let trace = heuristic_balance(&osc_matrix(0.5), 0.5, 200, 1e-3).unwrap();
        assert!(trace.converged);
        assert!(!trace.oscillating);
        assert!((trace.final_objective() - 0.5).abs() < 5e-4);
    }

    #[test]
    fn identity_is_a_fixed_point() {
        let trace =
            heuristic_balance(&MagnitudeMatrix::identity(3).unwrap(), 0.9, 100, 1e-3).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.steps(), 1);
        assert_eq!(trace.final_scaling, ScalingVector::ones(3));
        assert_eq!(trace.final_objective(), 1.0);
    }

    #[test]
    fn theta_validated() {
        let m = MagnitudeMatrix::identity(2).unwrap();
        assert!(heuristic_balance(&m, 0.0, 10, 1e-3).is_err());
        assert!(heuristic_balance(&m, 1.5, 10, 1e-3).is_err());
        assert!(heuristic_balance(&m, 0.5, 10, 0.0).is_err());
    }

    #[test]
    fn gauss_seidel_mode_runs() {
        let m = random_matrix(6, 3, MatrixDistribution::Uniform);
        let opts = BalanceOptions {
            mode: UpdateMode::GaussSeidel,
            tol: 1e-8,
            ..BalanceOptions::default()
        };
        let trace = heuristic_balance_with(&m, &opts).unwrap();
        assert!(trace.converged);
        let nubar = nubar_exact(&m).value;
        assert!(trace.final_objective() >= nubar * (1.0 - 1e-12));
    }

    #[test]
    fn distribution_parsing() {
        assert_eq!(
            "uniform".parse::<MatrixDistribution>().unwrap(),
            MatrixDistribution::Uniform
        );
        assert_eq!(
            "sparse:0.25".parse::<MatrixDistribution>().unwrap(),
            MatrixDistribution::SparseUniform { density: 0.25 }
        );
        assert!("sparse:2".parse::<MatrixDistribution>().is_err());
        assert!("gaussian".parse::<MatrixDistribution>().is_err());
    }

    #[test]
    fn study_is_deterministic() {
        let cfg = StudyConfig {
            ns: vec![2],
            trials: 1,
            thetas: vec![0.5],
            tols: vec![1e-2, 1e-4],
            seed: 11,
            max_iter: 500,
            distribution: MatrixDistribution::Uniform,
        };
        let a = convergence_study(&cfg).unwrap();
        let b = convergence_study(&cfg).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.outcomes, b.outcomes);
        assert_eq!(a.rows.len(), 2);
        assert!(a.rows[0].max_iters <= a.rows[1].max_iters);
    }
}
