//! Support-graph utilities: strongly connected components and Karp's
//! maximum mean cycle on log-weighted arcs.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::magnitude::MagnitudeMatrix;

/// Strongly connected components of the support graph (arc `i → j` iff
/// `M_ij > 0`), sources first. Each component is sorted ascending.
pub fn strongly_connected_components(
    m: &MagnitudeMatrix,
    include_diagonal: bool,
) -> Vec<Vec<usize>> {
    let n = m.n();
    let mut g = DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if m.get(i, j) > 0.0 && (include_diagonal || i != j) {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    // tarjan_scc yields reverse topological order
    let mut comps: Vec<Vec<usize>> = tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut c: Vec<usize> = c.into_iter().map(|ix| ix.index()).collect();
            c.sort_unstable();
            c
        })
        .collect();
    comps.reverse();
    comps
}

/// True if the component carries at least one cycle.
pub fn component_is_cyclic(m: &MagnitudeMatrix, comp: &[usize], include_diagonal: bool) -> bool {
    comp.len() > 1 || (include_diagonal && m.get(comp[0], comp[0]) > 0.0)
}

/// True if the support graph (self-loops included) has a directed cycle.
pub fn has_cycle(m: &MagnitudeMatrix) -> bool {
    strongly_connected_components(m, true)
        .iter()
        .any(|c| component_is_cyclic(m, c, true))
}

/// Dense digraph with log-domain arc weights; `-inf` marks a missing arc.
#[derive(Debug, Clone)]
pub(crate) struct LogGraph {
    k: usize,
    w: Vec<f64>,
}

impl LogGraph {
    pub fn new(k: usize) -> Self {
        LogGraph {
            k,
            w: vec![f64::NEG_INFINITY; k * k],
        }
    }

    /// Principal block of `M` on `nodes` with weights `ln M_ij`.
    pub fn from_block(m: &MagnitudeMatrix, nodes: &[usize], include_diagonal: bool) -> Self {
        let k = nodes.len();
        let mut g = LogGraph::new(k);
        for (a, &i) in nodes.iter().enumerate() {
            for (b, &j) in nodes.iter().enumerate() {
                let v = m.get(i, j);
                if v > 0.0 && (include_diagonal || a != b) {
                    g.w[a * k + b] = v.ln();
                }
            }
        }
        g
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.k + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.w[i * self.k + j] = v;
    }

    fn arcs(&self) -> Vec<(usize, usize, f64)> {
        let mut arcs = Vec::new();
        for i in 0..self.k {
            for j in 0..self.k {
                let w = self.weight(i, j);
                if w > f64::NEG_INFINITY {
                    arcs.push((i, j, w));
                }
            }
        }
        arcs
    }

    pub fn cycle_mean(&self, cycle: &[usize]) -> f64 {
        let len = cycle.len();
        let total: f64 = (0..len)
            .map(|p| self.weight(cycle[p], cycle[(p + 1) % len]))
            .sum();
        total / len as f64
    }
}

/// Rotates a cycle so that its smallest node comes first.
pub fn canonical_cycle(cycle: &[usize]) -> Vec<usize> {
    let start = cycle
        .iter()
        .enumerate()
        .min_by_key(|(_, &v)| v)
        .map(|(p, _)| p)
        .unwrap_or(0);
    cycle[start..]
        .iter()
        .chain(&cycle[..start])
        .copied()
        .collect()
}

/// Orders candidate cycles: higher mean first, then smaller start and
/// lexicographic order of the canonical node sequence.
pub fn better_cycle(mean_a: f64, a: &[usize], mean_b: f64, b: &[usize]) -> bool {
    let tie = 1e-12 * (1.0 + mean_a.abs().max(mean_b.abs()));
    if (mean_a - mean_b).abs() > tie {
        return mean_a > mean_b;
    }
    a < b
}

/// Maximum mean cycle of a strongly connected log graph with at least one arc.
///
/// Returns the optimal mean and a canonical maximizing cycle (local indices).
/// The cycle is read off the `k`-arc maximum-weight walk that attains the
/// optimum: every cycle on that walk is critical.
pub(crate) fn karp_max_mean_cycle(g: &LogGraph) -> Option<(f64, Vec<usize>)> {
    let k = g.len();
    let arcs = g.arcs();
    if arcs.is_empty() {
        return None;
    }
    const NONE: usize = usize::MAX;
    let mut dist = vec![f64::NEG_INFINITY; (k + 1) * k];
    let mut pred = vec![NONE; (k + 1) * k];
    dist[0] = 0.0;
    for step in 1..=k {
        let (prev, cur) = dist.split_at_mut(step * k);
        let prev = &prev[(step - 1) * k..];
        let cur = &mut cur[..k];
        for &(u, v, w) in &arcs {
            if prev[u] > f64::NEG_INFINITY && prev[u] + w > cur[v] {
                cur[v] = prev[u] + w;
                pred[step * k + v] = u;
            }
        }
    }

    let mut best: Option<(f64, usize)> = None;
    for v in 0..k {
        let dk = dist[k * k + v];
        if dk == f64::NEG_INFINITY {
            continue;
        }
        let worst = (0..k)
            .filter(|&j| dist[j * k + v] > f64::NEG_INFINITY)
            .map(|j| (dk - dist[j * k + v]) / (k - j) as f64)
            .fold(f64::INFINITY, f64::min);
        if best.is_none_or(|(b, _)| worst > b) {
            best = Some((worst, v));
        }
    }
    let (lambda, vstar) = best?;

    // walk back from (k, v*) and loop-erase
    let mut walk = Vec::with_capacity(k + 1);
    let mut v = vstar;
    walk.push(v);
    for step in (1..=k).rev() {
        v = pred[step * k + v];
        walk.push(v);
    }
    walk.reverse();

    let mut stack: Vec<usize> = Vec::new();
    let mut chosen: Option<(f64, Vec<usize>)> = None;
    for &v in &walk {
        if let Some(p) = stack.iter().position(|&s| s == v) {
            let cycle = canonical_cycle(&stack[p..]);
            let mean = g.cycle_mean(&cycle);
            let replace = match &chosen {
                None => true,
                Some((bm, bc)) => better_cycle(mean, &cycle, *bm, bc),
            };
            if replace {
                chosen = Some((mean, cycle));
            }
            stack.truncate(p + 1);
        } else {
            stack.push(v);
        }
    }
    let (_, cycle) = chosen?;
    Some((lambda, cycle))
}

/// Geometric mean of positive values, computed from the product when that
/// is representable and from logarithms otherwise.
pub fn geometric_mean(values: &[f64]) -> f64 {
    let len = values.len();
    if len == 0 {
        return 0.0;
    }
    let p: f64 = values.iter().product();
    if p.is_normal() {
        match len {
            1 => p,
            2 => p.sqrt(),
            _ => p.powf(1.0 / len as f64),
        }
    } else {
        (values.iter().map(|v| v.ln()).sum::<f64>() / len as f64).exp()
    }
}

/// Geometric mean of `M` along a cycle of (global) node indices.
pub fn cycle_geometric_mean(m: &MagnitudeMatrix, cycle: &[usize]) -> f64 {
    let len = cycle.len();
    let vals: Vec<f64> = (0..len)
        .map(|p| m.get(cycle[p], cycle[(p + 1) % len]))
        .collect();
    geometric_mean(&vals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn components_in_topological_order() {
        // 0 -> 1 <-> 2 -> 3
        let m = MagnitudeMatrix::from_rows(&[
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0, 1.0],
            vec![0.0, 0.0, 0.0, 0.0],
        ])
        .unwrap();
        let comps = strongly_connected_components(&m, true);
        assert_eq!(comps, vec![vec![0], vec![1, 2], vec![3]]);
        assert!(has_cycle(&m));
    }

    #[test]
    fn karp_two_cycle() {
        let m = MagnitudeMatrix::from_rows(&[vec![0.0, 1.0], vec![0.09, 0.0]]).unwrap();
        let g = LogGraph::from_block(&m, &[0, 1], true);
        let (lambda, cycle) = karp_max_mean_cycle(&g).unwrap();
        assert!((lambda.exp() - 0.3).abs() < 1e-15);
        assert_eq!(cycle, vec![0, 1]);
    }

    #[test]
    fn karp_prefers_heavier_cycle() {
        // self-loop 0.5 at node 0 versus 2-cycle with mean sqrt(0.8*0.9)
        let m = MagnitudeMatrix::from_rows(&[vec![0.5, 0.8], vec![0.9, 0.0]]).unwrap();
        let g = LogGraph::from_block(&m, &[0, 1], true);
        let (lambda, cycle) = karp_max_mean_cycle(&g).unwrap();
        assert!((lambda.exp() - (0.72f64).sqrt()).abs() < 1e-14);
        assert_eq!(cycle, vec![0, 1]);
    }

    #[test]
    fn canonical_rotation() {
        assert_eq!(canonical_cycle(&[3, 1, 2]), vec![1, 2, 3]);
        assert_eq!(canonical_cycle(&[5]), vec![5]);
    }

    #[test]
    fn geometric_mean_exact_cases() {
        assert_eq!(geometric_mean(&[0.7]), 0.7);
        assert_eq!(geometric_mean(&[1.0, 0.09]), 0.3);
        let tiny = geometric_mean(&[1e-200, 1e-200, 1e-200]);
        assert!((tiny / 1e-200 - 1.0).abs() < 1e-12);
    }
}
