//! The convex upper bound ν̄: the infimum over diagonal similarities of the
//! largest entry of `D M D⁻¹`.
//!
//! In log coordinates this is a min-max linear program whose optimum is the
//! maximum mean cycle of the support graph weighted by `ln M_ij`, so ν̄ is
//! the largest geometric mean of `M` along a directed cycle. [`nubar_exact`]
//! computes it with Karp's algorithm per strongly connected component;
//! [`nubar_lp`] is an independent bisection solver kept as a cross-check.

mod balanced;
mod lp;

pub use balanced::balanced_solution;
pub use lp::nubar_lp;

use crate::error::{Error, Result};
use crate::graph::{
    better_cycle, component_is_cyclic, cycle_geometric_mean, karp_max_mean_cycle,
    strongly_connected_components, LogGraph,
};
use crate::magnitude::MagnitudeMatrix;

/// Relative tolerance for membership in the maximizing arc set.
pub const MAXIMIZER_TOL: f64 = 1e-9;
/// Largest balance residual (relative to the objective) accepted as balanced.
pub const BALANCE_TOL: f64 = 1e-8;

/// Nonnegative diagonal scaling `d`; `ln d` is the log view used by the LP.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingVector(Vec<f64>);

impl ScalingVector {
    pub fn new(d: Vec<f64>) -> Result<Self> {
        if let Some(i) = d.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::validation(format!(
                "scaling entry {} must be finite and nonnegative",
                i + 1
            )));
        }
        Ok(ScalingVector(d))
    }

    pub fn ones(n: usize) -> Self {
        ScalingVector(vec![1.0; n])
    }

    pub(crate) fn from_log(beta: &[f64]) -> Self {
        let top = beta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ScalingVector(beta.iter().map(|b| (b - top).exp()).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn strictly_positive(&self) -> bool {
        self.0.iter().all(|&v| v > 0.0)
    }

    /// `β_i = ln d_i` (`-inf` for zero entries).
    pub fn log_view(&self) -> Vec<f64> {
        self.0.iter().map(|v| v.ln()).collect()
    }

    /// Same direction, rescaled so the largest entry is 1.
    pub fn normalized(&self) -> Self {
        let top = self.0.iter().copied().fold(0.0, f64::max);
        if top > 0.0 {
            ScalingVector(self.0.iter().map(|v| v / top).collect())
        } else {
            self.clone()
        }
    }
}

/// Scaled entries `φ_d(M, i, j)` with the zero conventions for relaxed scalings.
///
/// `φ = M_ij d_i / d_j` when `M_ij > 0` and `d_j > 0`; zero when `M_ij = 0`.
/// When `d_j = 0` and `M_ij > 0` the arc is admissible only if `d_i = 0`
/// too (then `φ = 0`); otherwise `φ = +inf` marks the scaling infeasible.
#[derive(Debug, Clone, Copy)]
pub struct PhiView<'a> {
    m: &'a MagnitudeMatrix,
    d: &'a [f64],
}

impl<'a> PhiView<'a> {
    pub fn new(m: &'a MagnitudeMatrix, d: &'a ScalingVector) -> Self {
        assert_eq!(m.n(), d.len(), "scaling length does not match matrix");
        PhiView { m, d: d.as_slice() }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let mij = self.m.get(i, j);
        if mij == 0.0 {
            0.0
        } else if self.d[j] > 0.0 {
            mij * self.d[i] / self.d[j]
        } else if self.d[i] == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// `max_ij φ`, the objective of the scaling problem.
    pub fn max(&self) -> f64 {
        let n = self.m.n();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .fold(0.0, f64::max)
    }

    pub fn row_max(&self, i: usize) -> f64 {
        (0..self.m.n()).map(|j| self.get(i, j)).fold(0.0, f64::max)
    }

    /// `max_{r≠k} φ(r, k)`.
    pub fn in_max_off_diagonal(&self, k: usize) -> f64 {
        (0..self.m.n())
            .filter(|&r| r != k)
            .map(|r| self.get(r, k))
            .fold(0.0, f64::max)
    }

    /// `max_{c≠k} φ(k, c)`.
    pub fn out_max_off_diagonal(&self, k: usize) -> f64 {
        (0..self.m.n())
            .filter(|&c| c != k)
            .map(|c| self.get(k, c))
            .fold(0.0, f64::max)
    }
}

/// Objective `max_ij φ_d(M, i, j)` of a scaling.
pub fn scaled_max_entry(m: &MagnitudeMatrix, d: &ScalingVector) -> f64 {
    PhiView::new(m, d).max()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NubarResult {
    pub value: f64,
    pub scaling: ScalingVector,
    /// Canonical maximizing cycle, 0-based; empty iff `value == 0`.
    pub witness_cycle: Vec<usize>,
    /// The sufficient optimality condition holds at `scaling`.
    pub certified: bool,
    /// Every node's largest incoming and outgoing scaled entries agree.
    pub balanced: bool,
}

impl NubarResult {
    pub(crate) fn assemble(
        m: &MagnitudeMatrix,
        value: f64,
        scaling: ScalingVector,
        witness_cycle: Vec<usize>,
    ) -> Self {
        let certified = certify_optimality(m, &scaling, MAXIMIZER_TOL);
        let balanced = balance_residual(m, &scaling) <= BALANCE_TOL;
        NubarResult {
            value,
            scaling,
            witness_cycle,
            certified,
            balanced,
        }
    }
}

/// Relaxed optimum for an acyclic support: zero on every node with an
/// outgoing arc, which makes every scaled entry vanish.
pub(crate) fn acyclic_scaling(m: &MagnitudeMatrix) -> ScalingVector {
    let n = m.n();
    ScalingVector(
        (0..n)
            .map(|i| {
                let has_out = (0..n).any(|j| j != i && m.get(i, j) > 0.0);
                if has_out {
                    0.0
                } else {
                    1.0
                }
            })
            .collect(),
    )
}

/// Maximum geometric cycle mean and a canonical maximizing cycle.
pub(crate) fn max_cycle(m: &MagnitudeMatrix) -> Option<(f64, Vec<usize>)> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for comp in strongly_connected_components(m, true) {
        if !component_is_cyclic(m, &comp, true) {
            continue;
        }
        let cycle = if comp.len() == 1 {
            vec![comp[0]]
        } else {
            let g = LogGraph::from_block(m, &comp, true);
            let (_, local) = karp_max_mean_cycle(&g).expect("cyclic component has arcs");
            // comp is sorted, so the local canonical rotation stays canonical
            local.into_iter().map(|a| comp[a]).collect()
        };
        let mean = cycle_geometric_mean(m, &cycle);
        let replace = match &best {
            None => true,
            Some((bm, bc)) => better_cycle(mean.ln(), &cycle, bm.ln(), bc),
        };
        if replace {
            best = Some((mean, cycle));
        }
    }
    best
}

/// Potentials `β` with `ln M_ij + β_i − β_j ≤ ln value` on every arc:
/// longest paths under `ln M_ij − ln value` from a virtual source.
fn cycle_mean_potentials(m: &MagnitudeMatrix, value: f64) -> Vec<f64> {
    let n = m.n();
    let lv = value.ln();
    let mut arcs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && m.get(i, j) > 0.0 {
                arcs.push((i, j, m.get(i, j).ln() - lv));
            }
        }
    }
    let mut beta = vec![0.0; n];
    for _ in 0..n {
        let mut changed = false;
        for &(i, j, w) in &arcs {
            if beta[i] + w > beta[j] {
                beta[j] = beta[i] + w;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    beta
}

/// ν̄ via maximum mean cycles.
///
/// `value` is the largest geometric mean of `M` along a directed cycle (self
/// loops included), `witness_cycle` attains it and `scaling` attains the
/// value as the largest entry of `D M D⁻¹`. An acyclic support gives 0.
pub fn nubar_exact(m: &MagnitudeMatrix) -> NubarResult {
    match max_cycle(m) {
        None => NubarResult::assemble(m, 0.0, acyclic_scaling(m), Vec::new()),
        Some((value, cycle)) => {
            let scaling = ScalingVector::from_log(&cycle_mean_potentials(m, value));
            NubarResult::assemble(m, value, scaling, cycle)
        }
    }
}

/// Sufficient optimality test: every maximizing arc `(k, l)` must be continued
/// by an arc out of `l` with the same scaled value.
///
/// `true` proves `d` optimal; `false` is inconclusive.
pub fn certify_optimality(m: &MagnitudeMatrix, d: &ScalingVector, tol: f64) -> bool {
    if d.len() != m.n() {
        return false;
    }
    let phi = PhiView::new(m, d);
    let top = phi.max();
    if !top.is_finite() {
        return false;
    }
    if top == 0.0 {
        return true;
    }
    let n = m.n();
    for k in 0..n {
        for l in 0..n {
            let v = phi.get(k, l);
            if v >= top * (1.0 - tol) && (v - phi.row_max(l)).abs() > tol * top {
                return false;
            }
        }
    }
    true
}

/// Follows maximizing arcs from the first one (row-major order), always
/// stepping to the smallest column attaining the row maximum, and returns
/// the loop the chain settles into. `None` if the chain leaves the
/// maximizing set.
pub fn maximizing_loop(m: &MagnitudeMatrix, d: &ScalingVector, tol: f64) -> Option<Vec<usize>> {
    let phi = PhiView::new(m, d);
    let top = phi.max();
    if !(top > 0.0) || !top.is_finite() {
        return None;
    }
    let n = m.n();
    let in_set = |v: f64| v >= top * (1.0 - tol);
    let (j0, j1) = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .find(|&(i, j)| in_set(phi.get(i, j)))?;
    let mut chain = vec![j0, j1];
    loop {
        let cur = *chain.last().unwrap();
        let row = phi.row_max(cur);
        let next = (0..n).find(|&j| phi.get(cur, j) >= row * (1.0 - tol))?;
        if !in_set(phi.get(cur, next)) {
            return None;
        }
        if let Some(p) = chain.iter().position(|&v| v == next) {
            return Some(crate::graph::canonical_cycle(&chain[p..]));
        }
        chain.push(next);
    }
}

/// `max_k |max_{r≠k} φ(r,k) − max_{c≠k} φ(k,c)|`, relative to the objective.
pub fn balance_residual(m: &MagnitudeMatrix, d: &ScalingVector) -> f64 {
    let phi = PhiView::new(m, d);
    let top = phi.max();
    if !top.is_finite() {
        return f64::INFINITY;
    }
    let worst = (0..m.n())
        .map(|k| (phi.in_max_off_diagonal(k) - phi.out_max_off_diagonal(k)).abs())
        .fold(0.0, f64::max);
    if top > 0.0 {
        worst / top
    } else {
        worst
    }
}
