//! Bisection on the min-max linear program
//!
//! ```text
//! minimize γ  subject to  ln M_ij + β_i − β_j ≤ γ  for every arc with M_ij > 0
//! ```
//!
//! For fixed γ the constraints are a system of difference constraints, which
//! is feasible iff the constraint graph has no negative cycle. This solver
//! shares no code with the Karp path on purpose.

use super::{acyclic_scaling, NubarResult, ScalingVector};
use crate::graph::canonical_cycle;
use crate::magnitude::MagnitudeMatrix;

struct Arc {
    from: usize,
    to: usize,
    log_weight: f64,
}

enum Feasibility {
    Feasible(Vec<f64>),
    /// A cycle of `M` (0-based nodes in arc order) with mean above γ.
    Infeasible(Vec<usize>),
}

/// Bellman–Ford from a virtual source over constraint edges `j → i` with
/// cost `γ − ln M_ij`; shortest distances are feasible potentials.
fn check(n: usize, arcs: &[Arc], gamma: f64) -> Feasibility {
    let mut dist = vec![0.0f64; n];
    let mut pred = vec![usize::MAX; n];
    let mut last = None;
    for _ in 0..=n {
        last = None;
        for a in arcs {
            // constraint β_from − β_to ≤ γ − w: edge to → from
            let cand = dist[a.to] + (gamma - a.log_weight);
            if cand < dist[a.from] {
                dist[a.from] = cand;
                pred[a.from] = a.to;
                last = Some(a.from);
            }
        }
        if last.is_none() {
            return Feasibility::Feasible(dist);
        }
    }
    // walk back n steps to land on the cycle
    let mut v = last.expect("relaxation in final pass");
    for _ in 0..n {
        v = pred[v];
    }
    let mut cycle = vec![v];
    let mut u = pred[v];
    while u != v {
        cycle.push(u);
        u = pred[u];
    }
    // pred walks edges backwards (from → to); as M arcs, u → pred[u] already
    // follows the arc direction, so `cycle` lists M arcs in order.
    Feasibility::Infeasible(canonical_cycle(&cycle))
}

fn is_acyclic(n: usize, arcs: &[Arc]) -> bool {
    let mut indeg = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for a in arcs {
        indeg[a.to] += 1;
        out[a.from].push(a.to);
    }
    let mut queue: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = queue.pop() {
        seen += 1;
        for &w in &out[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                queue.push(w);
            }
        }
    }
    seen == n
}

/// ν̄ by bisection on γ with a negative-cycle feasibility oracle.
pub fn nubar_lp(m: &MagnitudeMatrix) -> NubarResult {
    let n = m.n();
    let mut arcs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = m.get(i, j);
            if v > 0.0 {
                arcs.push(Arc {
                    from: i,
                    to: j,
                    log_weight: v.ln(),
                });
            }
        }
    }
    if is_acyclic(n, &arcs) {
        return NubarResult::assemble(m, 0.0, acyclic_scaling(m), Vec::new());
    }

    // every cycle mean lies within the range of arc weights
    let min_w = arcs
        .iter()
        .map(|a| a.log_weight)
        .fold(f64::INFINITY, f64::min);
    let max_w = arcs
        .iter()
        .map(|a| a.log_weight)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut lo = min_w - 1.0;
    let mut hi = max_w;
    let mut witness = match check(n, &arcs, lo) {
        Feasibility::Infeasible(c) => c,
        Feasibility::Feasible(_) => {
            unreachable!("a cycle exists, so γ below every arc is infeasible")
        }
    };
    let mut potentials = match check(n, &arcs, hi) {
        Feasibility::Feasible(p) => p,
        Feasibility::Infeasible(_) => {
            // rounding at a tight upper end; widen once
            hi += 1e-12 * (1.0 + hi.abs());
            match check(n, &arcs, hi) {
                Feasibility::Feasible(p) => p,
                Feasibility::Infeasible(_) => vec![0.0; n],
            }
        }
    };
    for _ in 0..200 {
        if hi - lo <= 1e-14 * (1.0 + hi.abs()) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match check(n, &arcs, mid) {
            Feasibility::Feasible(p) => {
                hi = mid;
                potentials = p;
            }
            Feasibility::Infeasible(c) => {
                lo = mid;
                witness = c;
            }
        }
    }
    NubarResult::assemble(m, hi.exp(), ScalingVector::from_log(&potentials), witness)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_gives_one() {
        let r = nubar_lp(&MagnitudeMatrix::identity(3).unwrap());
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_cycle() {
        let m = MagnitudeMatrix::from_rows(&[vec![0.0, 1.0], vec![0.09, 0.0]]).unwrap();
        let r = nubar_lp(&m);
        assert!((r.value - 0.3).abs() < 1e-12);
        assert_eq!(r.witness_cycle, vec![0, 1]);
    }

    #[test]
    fn acyclic_gives_zero() {
        let m = MagnitudeMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(nubar_lp(&m).value, 0.0);
    }

    #[test]
    fn witness_follows_arc_direction() {
        // only cycle: 0 -> 2 -> 1 -> 0
        let m = MagnitudeMatrix::from_rows(&[
            vec![0.0, 0.0, 2.0],
            vec![0.5, 0.0, 0.0],
            vec![0.0, 3.0, 0.0],
        ])
        .unwrap();
        let r = nubar_lp(&m);
        assert_eq!(r.witness_cycle, vec![0, 2, 1]);
        assert!((r.value - 3f64.powf(1.0 / 3.0)).abs() < 1e-12);
    }
}
