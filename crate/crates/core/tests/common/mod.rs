#![allow(dead_code)]

use nu_analyzer::magnitude::MagnitudeMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CORPUS_SIZE: usize = 200;
pub const CORPUS_SEED: u64 = 0x5eed_0001;

/// Seeded matrices with `n ≤ 6`, alternating dense and sparse supports.
pub fn corpus() -> Vec<MagnitudeMatrix> {
    (0..CORPUS_SIZE).map(corpus_matrix).collect()
}

pub fn corpus_matrix(i: usize) -> MagnitudeMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(CORPUS_SEED + i as u64);
    let n = 1 + i % 6;
    let (density, zero_diag) = match i % 4 {
        0 => (1.0, false),
        1 => (0.35, false),
        2 => (0.6, false),
        _ => (0.5, true),
    };
    let data = (0..n * n)
        .map(|k| {
            let keep = rng.random::<f64>() < density && !(zero_diag && k / n == k % n);
            let v = 2.0 * (1.0 - rng.random::<f64>());
            if keep {
                v
            } else {
                0.0
            }
        })
        .collect();
    MagnitudeMatrix::from_row_major(n, data).unwrap()
}

/// Maximum geometric mean over all directed simple cycles, by explicit
/// enumeration. Each cycle is visited once from its smallest node.
pub fn brute_force_cycle_max(m: &MagnitudeMatrix) -> (f64, Vec<usize>) {
    fn dfs(
        m: &MagnitudeMatrix,
        start: usize,
        v: usize,
        path: &mut Vec<usize>,
        on_path: &mut [bool],
        log_sum: f64,
        best: &mut (f64, Vec<usize>),
    ) {
        let n = m.n();
        for w in start..n {
            let a = m.get(v, w);
            if a <= 0.0 {
                continue;
            }
            if w == start {
                let mean = ((log_sum + a.ln()) / path.len() as f64).exp();
                if mean > best.0 {
                    *best = (mean, path.clone());
                }
            } else if !on_path[w] {
                on_path[w] = true;
                path.push(w);
                dfs(m, start, w, path, on_path, log_sum + a.ln(), best);
                path.pop();
                on_path[w] = false;
            }
        }
    }
    let n = m.n();
    let mut best = (0.0, Vec::new());
    for s in 0..n {
        let mut on_path = vec![false; n];
        on_path[s] = true;
        dfs(m, s, s, &mut vec![s], &mut on_path, 0.0, &mut best);
    }
    best
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
