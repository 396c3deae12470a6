//! Balanced optimal scalings: every node's largest incoming and outgoing
//! off-diagonal scaled entries coincide.
//!
//! Within a strongly connected component the construction contracts a
//! maximum mean cycle into a single node, fixing the relative scaling of its
//! members so every cycle arc sits exactly at the cycle mean, and repeats on
//! the contracted graph until one node remains. Components are then
//! separated by offsets in topological order so arcs between components fall
//! far below the optimum.

use super::{nubar_exact, NubarResult, ScalingVector};
use crate::graph::{karp_max_mean_cycle, strongly_connected_components, LogGraph};
use crate::magnitude::MagnitudeMatrix;

/// Ratio by which arcs between components are pushed below the optimum.
const COMPONENT_GAP: f64 = 1e10;

/// Log potentials balancing a strongly connected graph without self-loops.
fn balance_component(g0: &LogGraph) -> Vec<f64> {
    let mut beta = vec![0.0; g0.len()];
    let mut groups: Vec<Vec<usize>> = (0..g0.len()).map(|i| vec![i]).collect();
    let mut g = g0.clone();
    while groups.len() > 1 {
        let (_, cycle) = karp_max_mean_cycle(&g).expect("strongly connected graph has a cycle");
        let lambda = g.cycle_mean(&cycle);
        let len = cycle.len();
        let mut inner = vec![0.0; len];
        for t in 1..len {
            inner[t] = inner[t - 1] + g.weight(cycle[t - 1], cycle[t]) - lambda;
        }
        let mut on_cycle = vec![None; g.len()];
        for (t, &c) in cycle.iter().enumerate() {
            on_cycle[c] = Some(t);
            for &member in &groups[c] {
                beta[member] += inner[t];
            }
        }

        let others: Vec<usize> = (0..g.len()).filter(|&v| on_cycle[v].is_none()).collect();
        let merged = others.len();
        let mut next = LogGraph::new(merged + 1);
        for (a, &u) in others.iter().enumerate() {
            for (b, &v) in others.iter().enumerate() {
                next.set(a, b, g.weight(u, v));
            }
            let mut into = f64::NEG_INFINITY;
            let mut out = f64::NEG_INFINITY;
            for (t, &c) in cycle.iter().enumerate() {
                into = into.max(g.weight(u, c) - inner[t]);
                out = out.max(g.weight(c, u) + inner[t]);
            }
            next.set(a, merged, into);
            next.set(merged, a, out);
        }
        let mut next_groups: Vec<Vec<usize>> = others.iter().map(|&u| groups[u].clone()).collect();
        next_groups.push(
            cycle
                .iter()
                .flat_map(|&c| groups[c].iter().copied())
                .collect(),
        );
        groups = next_groups;
        g = next;
    }
    beta
}

/// Optimal scaling that is also balanced at every node (self-loops excluded).
///
/// The value and witness are those of [`nubar_exact`]. Nodes outside any
/// cycle of the off-diagonal support can only be balanced approximately:
/// their scaled entries are driven to `1e-10` of the optimum.
pub fn balanced_solution(m: &MagnitudeMatrix) -> NubarResult {
    let exact = nubar_exact(m);
    if exact.value == 0.0 {
        return exact;
    }
    let n = m.n();
    let comps = strongly_connected_components(m, false);
    let mut comp_of = vec![0usize; n];
    let mut beta = vec![0.0; n];
    for (c, comp) in comps.iter().enumerate() {
        for &i in comp {
            comp_of[i] = c;
        }
        if comp.len() > 1 {
            let local = balance_component(&LogGraph::from_block(m, comp, false));
            for (a, &i) in comp.iter().enumerate() {
                beta[i] = local[a];
            }
        }
    }

    let shift = COMPONENT_GAP.ln() - exact.value.ln();
    let mut offset = vec![0.0f64; comps.len()];
    for (c, comp) in comps.iter().enumerate() {
        for &k in comp {
            for r in 0..n {
                if comp_of[r] != c && m.get(r, k) > 0.0 {
                    let need = offset[comp_of[r]] + m.get(r, k).ln() + beta[r] - beta[k] + shift;
                    offset[c] = offset[c].max(need);
                }
            }
        }
    }
    for i in 0..n {
        beta[i] += offset[comp_of[i]];
    }
    NubarResult::assemble(
        m,
        exact.value,
        ScalingVector::from_log(&beta),
        exact.witness_cycle,
    )
}

#[cfg(test)]
mod tests {
    use super::super::{balance_residual, scaled_max_entry};
    use super::*;

    #[test]
    fn two_cycle_balanced() {
        let m = MagnitudeMatrix::from_rows(&[vec![0.0, 1.0], vec![0.09, 0.0]]).unwrap();
        let r = balanced_solution(&m);
        let d = r.scaling.as_slice();
        assert!(
            (d[0] - 0.3).abs() < 1e-12 && (d[1] - 1.0).abs() < 1e-12,
            "{d:?}"
        );
        assert!(r.balanced && r.certified);
    }

    #[test]
    fn ring_and_diagonal_keep_unit_scaling() {
        let r = balanced_solution(&MagnitudeMatrix::unit_ring(5).unwrap());
        assert_eq!(r.scaling, ScalingVector::ones(5));
        let r = balanced_solution(&MagnitudeMatrix::diagonal(&[0.1, 0.4]).unwrap());
        assert_eq!(r.scaling, ScalingVector::ones(2));
        assert!(r.balanced && r.certified);
    }

    #[test]
    fn nested_cycles_balance() {
        // heavy 2-cycle {0,1} attached to a lighter 3-cycle through node 1
        let m = MagnitudeMatrix::from_rows(&[
            vec![0.0, 2.0, 0.0, 0.0],
            vec![1.5, 0.0, 0.3, 0.0],
            vec![0.0, 0.0, 0.0, 0.7],
            vec![0.0, 0.4, 0.0, 0.0],
        ])
        .unwrap();
        let r = balanced_solution(&m);
        assert!((r.value - 3f64.sqrt()).abs() < 1e-12);
        assert!(balance_residual(&m, &r.scaling) < 1e-12);
        assert!((scaled_max_entry(&m, &r.scaling) - r.value).abs() < 1e-12);
        assert!(r.certified);
    }

    #[test]
    fn chained_components() {
        // cycle {0,1} feeds a sink node 2 and a self-loop node 3 feeds node 0
        let m = MagnitudeMatrix::from_rows(&[
            vec![0.0, 0.5, 0.8, 0.0],
            vec![0.5, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.9, 0.0, 0.0, 0.2],
        ])
        .unwrap();
        let r = balanced_solution(&m);
        assert!((r.value - 0.5).abs() < 1e-15);
        assert!(r.balanced, "residual {}", balance_residual(&m, &r.scaling));
        assert!(r.certified);
    }
}
