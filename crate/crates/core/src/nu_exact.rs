//! Exact values of ν where they are computable: the 2×2 closed form, pure
//! rings, and a brute-force oracle for `n ≤ 4`.
//!
//! For a nonnegative `M`, ν is the reciprocal of the smallest `Σ δ_i` over
//! nonnegative diagonal `Δ` that make `I − ΔM` singular. Such a `Δ` first
//! appears on the surface `ρ(ΔM) = 1`, and `ρ` is homogeneous, so
//!
//! ```text
//! ν = max { ρ(diag(δ̂) M) : δ̂ ≥ 0, Σ δ̂ = 1 }
//! ```
//!
//! with the destabilizing witness `δ = δ̂ / ρ(diag(δ̂) M)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::magnitude::MagnitudeMatrix;
use crate::spectral::{perron_root, SubsetBound};

/// Largest size accepted by [`nu_oracle`].
pub const ORACLE_MAX_N: usize = 4;
pub const DEFAULT_GRID: usize = 60;
pub const DEFAULT_REFINE_STEPS: usize = 40;

const ORACLE_RHO_TOL: f64 = 1e-13;
const ORACLE_STARTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuMethod {
    #[serde(rename = "closed_form_2x2")]
    ClosedForm2x2,
    Ring,
    Oracle,
    /// Only the principal-submatrix lower bound is known.
    LowerBoundOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NuResult {
    pub value: f64,
    /// Destabilizing diagonal with `Σ δ_i = 1/value`; all zeros when `value = 0`.
    pub witness_delta: Vec<f64>,
    pub method: NuMethod,
}

fn self_loop_witness(n: usize, k: usize, m_kk: f64) -> Vec<f64> {
    let mut d = vec![0.0; n];
    d[k] = 1.0 / m_kk;
    d
}

fn dominant_diagonal(m: &MagnitudeMatrix) -> NuResult {
    let n = m.n();
    let k = (0..n).fold(0, |best, i| {
        if m.get(i, i) > m.get(best, best) {
            i
        } else {
            best
        }
    });
    let v = m.get(k, k);
    let witness_delta = if v > 0.0 {
        self_loop_witness(n, k, v)
    } else {
        vec![0.0; n]
    };
    NuResult {
        value: v,
        witness_delta,
        method: NuMethod::ClosedForm2x2,
    }
}

/// Closed form for `2×2` matrices.
///
/// The off-diagonal pair is balanced by a diagonal similarity and scaled out
/// by `s = √(M₁₂M₂₁)`, leaving `[[x, 1], [1, y]]`. If either normalized
/// diagonal reaches 1 the dominant self-loop is optimal. Otherwise the
/// optimum is the stationary point `δ₁ = (y−1)/(xy−1)`, `δ₂ = (x−1)/(xy−1)`
/// with value `(xy−1)/(x+y−2)`.
///
/// ```
/// use nu_analyzer::magnitude::MagnitudeMatrix;
/// use nu_analyzer::nu_exact::nu_2x2;
///
/// let m = MagnitudeMatrix::from_rows(&[vec![0.5, 1.0], vec![1.0, 0.5]]).unwrap();
/// assert!((nu_2x2(&m).unwrap().value - 0.75).abs() < 1e-15);
/// ```
pub fn nu_2x2(m: &MagnitudeMatrix) -> Result<NuResult> {
    if m.n() != 2 {
        return Err(Error::validation(format!(
            "closed form needs a 2x2 matrix, got {0}x{0}",
            m.n()
        )));
    }
    let (a, b, c, e) = (m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1));
    let s = (b * c).sqrt();
    if s == 0.0 {
        // triangular: the eigenvalues are the diagonal entries
        return Ok(dominant_diagonal(m));
    }
    let (x, y) = (a / s, e / s);
    if x >= 1.0 || y >= 1.0 {
        return Ok(dominant_diagonal(m));
    }
    let det = x * y - 1.0;
    assert!(
        det < 0.0,
        "normalized determinant must be negative below the unit diagonal"
    );
    let d1 = (y - 1.0) / det / s;
    let d2 = (x - 1.0) / det / s;
    Ok(NuResult {
        value: s * det / (x + y - 2.0),
        witness_delta: vec![d1, d2],
        method: NuMethod::ClosedForm2x2,
    })
}

/// ν of a pure ring with arc weights `w_k` (node `k` driven by node `k+1`).
///
/// `I − ΔM` is singular when `∏ δ_k w_k = 1`; by the AM–GM inequality the
/// cheapest such `δ` is constant, giving `ν = g^{1/n}/n` with `g = ∏ w_k`.
pub fn nu_ring(weights: &[f64]) -> Result<NuResult> {
    if weights.is_empty() {
        return Err(Error::validation("a ring needs at least one node"));
    }
    if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(Error::validation(
            "ring weights must be positive and finite",
        ));
    }
    let n = weights.len() as f64;
    let log_g: f64 = weights.iter().map(|w| w.ln()).sum();
    let root = (log_g / n).exp();
    Ok(NuResult {
        value: root / n,
        witness_delta: vec![1.0 / root; weights.len()],
        method: NuMethod::Ring,
    })
}

/// If the support of `m` is a single cycle through every node, returns the
/// arc weights in cycle order starting from node 0.
pub fn ring_weights(m: &MagnitudeMatrix) -> Option<Vec<f64>> {
    let n = m.n();
    let mut succ = vec![usize::MAX; n];
    let mut indeg = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            if m.get(i, j) > 0.0 {
                if succ[i] != usize::MAX {
                    return None;
                }
                succ[i] = j;
                indeg[j] += 1;
            }
        }
    }
    if succ.contains(&usize::MAX) || indeg.iter().any(|&d| d != 1) {
        return None;
    }
    let mut weights = Vec::with_capacity(n);
    let mut v = 0;
    for _ in 0..n {
        weights.push(m.get(v, succ[v]));
        v = succ[v];
        if v == 0 && weights.len() < n {
            return None;
        }
    }
    (v == 0).then_some(weights)
}

/// [`nu_ring`] for a matrix whose support is a cyclic permutation, in any
/// node order. The witness is reported in the original labels.
pub fn nu_ring_matrix(m: &MagnitudeMatrix) -> Result<NuResult> {
    let w =
        ring_weights(m).ok_or_else(|| Error::validation("matrix support is not a single ring"))?;
    nu_ring(&w)
}

fn rho(m: &MagnitudeMatrix, delta: &[f64]) -> f64 {
    let scaled = m
        .left_diagonal(delta)
        .expect("simplex points are nonnegative");
    perron_root(&scaled, ORACLE_RHO_TOL, 200_000).rho
}

fn simplex_points(n: usize, grid: usize) -> Vec<Vec<usize>> {
    fn rec(rest: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 1 {
            cur.push(rest);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in (0..=rest).rev() {
            cur.push(k);
            rec(rest - k, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(grid, n, &mut Vec::with_capacity(n), &mut out);
    out
}

/// Pattern search over pairwise mass transfers, halving the step when no
/// transfer improves.
fn refine(
    m: &MagnitudeMatrix,
    mut x: Vec<f64>,
    mut fx: f64,
    mut h: f64,
    steps: usize,
) -> (Vec<f64>, f64) {
    let n = x.len();
    for _ in 0..steps {
        for _sweep in 0..10_000 {
            let mut improved = false;
            for i in 0..n {
                for j in 0..n {
                    let amount = h.min(x[j]);
                    if i == j || amount <= 0.0 {
                        continue;
                    }
                    let mut y = x.clone();
                    y[i] += amount;
                    y[j] -= amount;
                    let fy = rho(m, &y);
                    if fy > fx {
                        x = y;
                        fx = fy;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        h *= 0.5;
    }
    (x, fx)
}

/// Brute-force ν for `n ≤ 4`: a simplex grid with `grid` subdivisions per
/// axis, then `refine_steps` rounds of local search from the best points.
///
/// Vertices of the simplex are always on the grid, so matrices whose optimum
/// is a single self-loop are found exactly.
pub fn nu_oracle(m: &MagnitudeMatrix, grid: usize, refine_steps: usize) -> Result<NuResult> {
    let n = m.n();
    if n > ORACLE_MAX_N {
        return Err(Error::validation(format!(
            "the ν oracle is limited to n <= {ORACLE_MAX_N} (got n = {n}); use the lower bound and ν̄ instead"
        )));
    }
    if grid == 0 {
        return Err(Error::validation("oracle grid must be positive"));
    }
    let points = simplex_points(n, grid);
    let values: Vec<f64> = points
        .par_iter()
        .map(|p| {
            let d: Vec<f64> = p.iter().map(|&k| k as f64 / grid as f64).collect();
            rho(m, &d)
        })
        .collect();
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    if values[order[0]] <= 0.0 {
        return Ok(NuResult {
            value: 0.0,
            witness_delta: vec![0.0; n],
            method: NuMethod::Oracle,
        });
    }
    let h = 1.0 / grid as f64;
    let polished: Vec<(Vec<f64>, f64)> = order
        .iter()
        .take(ORACLE_STARTS)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&&idx| {
            let start: Vec<f64> = points[idx]
                .iter()
                .map(|&k| k as f64 / grid as f64)
                .collect();
            refine(m, start, values[idx], h, refine_steps)
        })
        .collect();
    let (best, value) = polished
        .into_iter()
        .reduce(|a, b| if b.1 > a.1 { b } else { a })
        .expect("at least one start");
    Ok(NuResult {
        value,
        witness_delta: best.iter().map(|v| v / value).collect(),
        method: NuMethod::Oracle,
    })
}

/// The lower bound `ρ(M_I)/|I|` packaged as a result; `δ_i = 1/ρ(M_I)` on
/// `I` is destabilizing with `Σ δ = 1/bound`.
pub fn from_lower_bound(n: usize, bound: &SubsetBound) -> NuResult {
    let mut witness_delta = vec![0.0; n];
    if bound.rho_sub > 0.0 {
        for &i in &bound.indices {
            witness_delta[i] = 1.0 / bound.rho_sub;
        }
    }
    NuResult {
        value: bound.bound,
        witness_delta,
        method: NuMethod::LowerBoundOnly,
    }
}

/// The most exact ν available without the oracle, or the oracle itself when
/// `use_oracle` is set and `n ≤ 4`. `None` when only bounds are known.
pub fn nu_best(m: &MagnitudeMatrix, use_oracle: bool) -> Result<Option<NuResult>> {
    if m.n() == 2 {
        return nu_2x2(m).map(Some);
    }
    if ring_weights(m).is_some() {
        return nu_ring_matrix(m).map(Some);
    }
    if use_oracle && m.n() <= ORACLE_MAX_N {
        return nu_oracle(m, DEFAULT_GRID, DEFAULT_REFINE_STEPS).map(Some);
    }
    Ok(None)
}
