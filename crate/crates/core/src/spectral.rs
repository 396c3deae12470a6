//! Perron analysis of nonnegative matrices: the spectral radius (which is
//! the classical measure μ), diagonally scaled ∞-norms, and lower bounds on
//! ν from principal submatrices.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{component_is_cyclic, strongly_connected_components};
use crate::magnitude::{linf_induced_norm, MagnitudeMatrix};

pub const DEFAULT_TOL: f64 = 1e-10;

pub fn default_max_iter(n: usize) -> usize {
    100 * n + 1000
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    pub rho: f64,
    /// Nonnegative Perron direction scaled to unit max-norm. For reducible
    /// matrices this is a best-effort vector of the dominant eigenspace.
    pub right_vector: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PerronRoot {
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Perron root of an irreducible block with at least two nodes.
///
/// Power iteration on `B + sI`, where the shift `s` tracks the current
/// Collatz–Wielandt lower bound. The shift makes the iteration primitive, so
/// periodic blocks (rings) converge; the bracket `min (Bx)_i/x_i ≤ ρ ≤ max
/// (Bx)_i/x_i` gives a certified stopping rule.
fn irreducible_root(b: &[f64], k: usize, tol: f64, max_iter: usize) -> PerronRoot {
    let mut x = vec![1.0; k];
    let mut bx = vec![0.0; k];
    let mut lo = 0.0;
    let mut hi = f64::INFINITY;
    for it in 1..=max_iter.max(1) {
        for i in 0..k {
            let row = &b[i * k..(i + 1) * k];
            bx[i] = row.iter().zip(&x).map(|(a, v)| a * v).sum();
        }
        let (mut l, mut h) = (f64::INFINITY, 0.0f64);
        for i in 0..k {
            let r = bx[i] / x[i];
            l = l.min(r);
            h = h.max(r);
        }
        lo = f64::max(lo, l);
        hi = hi.min(h);
        if hi - lo <= tol * lo {
            return PerronRoot {
                rho: 0.5 * (lo + hi),
                iterations: it,
                converged: true,
            };
        }
        let shift = l;
        let mut norm = 0.0f64;
        for i in 0..k {
            x[i] = bx[i] + shift * x[i];
            norm = norm.max(x[i]);
        }
        for v in &mut x {
            *v /= norm;
        }
    }
    PerronRoot {
        rho: 0.5 * (lo + hi),
        iterations: max_iter,
        converged: false,
    }
}

/// Spectral radius as the maximum Perron root over the cyclic strongly
/// connected components of the support graph.
pub(crate) fn perron_root(m: &MagnitudeMatrix, tol: f64, max_iter: usize) -> PerronRoot {
    let mut out = PerronRoot {
        rho: 0.0,
        iterations: 0,
        converged: true,
    };
    for comp in strongly_connected_components(m, true) {
        if !component_is_cyclic(m, &comp, true) {
            continue;
        }
        let r = if comp.len() == 1 {
            PerronRoot {
                rho: m.get(comp[0], comp[0]),
                iterations: 0,
                converged: true,
            }
        } else {
            let block = m.principal(&comp);
            irreducible_root(block.as_slice(), comp.len(), tol, max_iter)
        };
        out.rho = out.rho.max(r.rho);
        out.iterations = out.iterations.max(r.iterations);
        out.converged &= r.converged;
    }
    out
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::validation(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    Ok(())
}

/// Spectral radius of a nonnegative matrix, to relative accuracy `tol`.
///
/// When `max_iter` is exhausted the best estimate is still returned with
/// `converged = false`.
pub fn spectral_radius(m: &MagnitudeMatrix, tol: f64, max_iter: usize) -> Result<SpectralResult> {
    check_tol(tol)?;
    let root = perron_root(m, tol, max_iter);
    let n = m.n();
    let right_vector = if root.rho > 0.0 {
        // shifted power iteration with the root known: eigenvalue 2ρ dominates
        let shift = root.rho;
        let mut x = vec![1.0; n];
        let mut y = vec![0.0; n];
        for _ in 0..max_iter {
            for i in 0..n {
                y[i] = m.row(i).iter().zip(&x).map(|(a, v)| a * v).sum::<f64>() + shift * x[i];
            }
            let norm = y.iter().copied().fold(0.0, f64::max);
            let mut delta = 0.0f64;
            for i in 0..n {
                let v = y[i] / norm;
                delta = delta.max((v - x[i]).abs());
                x[i] = v;
            }
            if delta <= tol {
                break;
            }
        }
        x
    } else {
        // nilpotent: any source node (zero column) spans part of the kernel
        let src = (0..n)
            .find(|&j| (0..n).all(|i| m.get(i, j) == 0.0))
            .unwrap_or(0);
        let mut e = vec![0.0; n];
        e[src] = 1.0;
        e
    };
    Ok(SpectralResult {
        rho: root.rho,
        right_vector,
        iterations: root.iterations,
        converged: root.converged,
    })
}

/// μ: the reciprocal of the smallest ∞-norm of a destabilizing diagonal
/// uncertainty, equal to the spectral radius of the magnitude matrix.
pub fn mu(m: &MagnitudeMatrix) -> f64 {
    perron_root(m, DEFAULT_TOL, default_max_iter(m.n())).rho
}

/// `max_i Σ_j M_ij d_i / d_j`, the ∞-induced norm of `D M D⁻¹`.
pub fn scaled_inf_norm(m: &MagnitudeMatrix, d: &[f64]) -> Result<f64> {
    let scaled = m.similarity(d)?;
    Ok(linf_induced_norm(&scaled))
}

/// Lower bound `ρ(M_I)/|I|` on ν from the principal submatrix on `indices`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetBound {
    /// Sorted, distinct, 0-based.
    pub indices: Vec<usize>,
    pub rho_sub: f64,
    pub bound: f64,
    /// False when the subset came from the greedy search.
    pub exhaustive: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct LowerBoundOptions {
    pub max_subset_size: usize,
    /// Largest `n` for which all subsets are enumerated.
    pub exhaustive_limit: usize,
    pub tol: f64,
}

impl LowerBoundOptions {
    pub fn new(max_subset_size: usize) -> Self {
        LowerBoundOptions {
            max_subset_size,
            exhaustive_limit: 16,
            tol: DEFAULT_TOL,
        }
    }
}

fn subset_bound(m: &MagnitudeMatrix, indices: Vec<usize>, tol: f64) -> SubsetBound {
    let sub = m.principal(&indices);
    let rho_sub = perron_root(&sub, tol, default_max_iter(indices.len())).rho;
    let bound = rho_sub / indices.len() as f64;
    SubsetBound {
        indices,
        rho_sub,
        bound,
        exhaustive: true,
    }
}

/// Larger bound wins; near-ties go to the smaller set, then lexicographic order.
fn prefer(a: &SubsetBound, b: &SubsetBound) -> bool {
    let tie = 1e-9 * a.bound.max(b.bound);
    if (a.bound - b.bound).abs() > tie {
        return a.bound > b.bound;
    }
    (a.indices.len(), &a.indices) < (b.indices.len(), &b.indices)
}

/// Best principal-submatrix lower bound on ν with `|I| ≤ max_subset_size`.
pub fn nu_lower_bound(m: &MagnitudeMatrix, max_subset_size: usize) -> Result<SubsetBound> {
    nu_lower_bound_with(m, &LowerBoundOptions::new(max_subset_size))
}

pub fn nu_lower_bound_with(m: &MagnitudeMatrix, opts: &LowerBoundOptions) -> Result<SubsetBound> {
    let n = m.n();
    if opts.max_subset_size == 0 || opts.max_subset_size > n {
        return Err(Error::validation(format!(
            "subset size must be in 1..={n}, got {}",
            opts.max_subset_size
        )));
    }
    check_tol(opts.tol)?;
    let tol = opts.tol;
    if n <= opts.exhaustive_limit && n < 64 {
        let max = opts.max_subset_size as u32;
        let all: Vec<SubsetBound> = (1u64..(1u64 << n))
            .into_par_iter()
            .filter(|mask| mask.count_ones() <= max)
            .map(|mask| {
                let idx: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
                subset_bound(m, idx, tol)
            })
            .collect();
        let best = all
            .into_iter()
            .reduce(|a, b| if prefer(&b, &a) { b } else { a })
            .expect("at least one subset");
        return Ok(best);
    }

    // greedy descent from the full index set
    let mut current: Vec<usize> = (0..n).collect();
    let mut best: Option<SubsetBound> = None;
    let consider = |cand: &SubsetBound, best: &mut Option<SubsetBound>| {
        if cand.indices.len() <= opts.max_subset_size
            && best.as_ref().is_none_or(|b| prefer(cand, b))
        {
            *best = Some(cand.clone());
        }
    };
    let full = subset_bound(m, current.clone(), tol);
    consider(&full, &mut best);
    while current.len() > 1 {
        let candidates: Vec<SubsetBound> = (0..current.len())
            .into_par_iter()
            .map(|p| {
                let mut idx = current.clone();
                idx.remove(p);
                subset_bound(m, idx, tol)
            })
            .collect();
        let step = candidates
            .into_iter()
            .reduce(|a, b| if prefer(&b, &a) { b } else { a })
            .expect("nonempty");
        consider(&step, &mut best);
        current = step.indices;
    }
    let mut best = best.expect("singletons are always considered");
    best.exhaustive = false;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> MagnitudeMatrix {
        MagnitudeMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn rho(m: &MagnitudeMatrix) -> f64 {
        spectral_radius(m, DEFAULT_TOL, default_max_iter(m.n()))
            .unwrap()
            .rho
    }

    #[test]
    fn simple_radii() {
        assert!((rho(&MagnitudeMatrix::identity(4).unwrap()) - 1.0).abs() < 1e-12);
        assert!((rho(&mat(&[&[0.0, 1.0], &[1.0, 0.0]])) - 1.0).abs() < 1e-12);
        // (x+y+sqrt((x-y)^2+4w^2))/2 with x=y=0.5, w=1
        assert!((rho(&mat(&[&[0.5, 1.0], &[1.0, 0.5]])) - 1.5).abs() < 1e-9);
        assert_eq!(rho(&MagnitudeMatrix::zeros(3).unwrap()), 0.0);
    }

    #[test]
    fn weighted_ring_converges() {
        // all eigenvalues share the modulus 2^(1/3); unshifted power iteration cycles forever
        let m = MagnitudeMatrix::ring(&[4.0, 0.5, 4.0]).unwrap();
        let r = spectral_radius(&m, 1e-12, 10_000).unwrap();
        assert!(r.converged);
        assert!((r.rho - 8f64.powf(1.0 / 3.0)).abs() < 1e-10);
    }

    #[test]
    fn right_vector_is_perron_direction() {
        let m = mat(&[&[0.0, 4.0], &[1.0, 0.0]]);
        let r = spectral_radius(&m, 1e-12, 10_000).unwrap();
        assert!((r.rho - 2.0).abs() < 1e-10);
        assert!((r.right_vector[0] - 1.0).abs() < 1e-8);
        assert!((r.right_vector[1] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn bad_tolerance_rejected() {
        let m = MagnitudeMatrix::identity(2).unwrap();
        assert!(matches!(
            spectral_radius(&m, 0.0, 10),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn mu_examples() {
        assert!((mu(&MagnitudeMatrix::identity(5).unwrap()) - 1.0).abs() < 1e-12);
        assert!((mu(&MagnitudeMatrix::unit_ring(5).unwrap()) - 1.0).abs() < 1e-9);
        assert_eq!(mu(&MagnitudeMatrix::zeros(2).unwrap()), 0.0);
    }

    #[test]
    fn scaled_norm_examples() {
        let m = mat(&[&[0.0, 4.0], &[1.0, 0.0]]);
        assert_eq!(scaled_inf_norm(&m, &[1.0, 1.0]).unwrap(), 4.0);
        assert_eq!(scaled_inf_norm(&m, &[1.0, 2.0]).unwrap(), 2.0);
        let d = MagnitudeMatrix::diagonal(&[0.3, 0.8]).unwrap();
        assert_eq!(scaled_inf_norm(&d, &[5.0, 0.1]).unwrap(), 0.8);
        assert!(scaled_inf_norm(&m, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn lower_bound_examples() {
        let ring = MagnitudeMatrix::unit_ring(5).unwrap();
        let b = nu_lower_bound(&ring, 5).unwrap();
        assert_eq!(b.indices, vec![0, 1, 2, 3, 4]);
        assert!((b.bound - 0.2).abs() < 1e-9);

        let d = MagnitudeMatrix::diagonal(&[0.2, 0.7, 0.7]).unwrap();
        let b = nu_lower_bound(&d, 3).unwrap();
        assert_eq!(b.indices, vec![1]);
        assert_eq!(b.bound, 0.7);

        let b = nu_lower_bound(&mat(&[&[0.0, 1.0], &[1.0, 0.0]]), 2).unwrap();
        assert_eq!(b.indices, vec![0, 1]);
        assert!((b.bound - 0.5).abs() < 1e-10);

        assert!(nu_lower_bound(&d, 0).is_err());
        assert!(nu_lower_bound(&d, 4).is_err());
    }

    #[test]
    fn greedy_lower_bound_is_labelled() {
        let ring = MagnitudeMatrix::unit_ring(6).unwrap();
        let opts = LowerBoundOptions {
            exhaustive_limit: 4,
            ..LowerBoundOptions::new(6)
        };
        let b = nu_lower_bound_with(&ring, &opts).unwrap();
        assert!(!b.exhaustive);
        assert!((b.bound - 1.0 / 6.0).abs() < 1e-9);
    }
}
