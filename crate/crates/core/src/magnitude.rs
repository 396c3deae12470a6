//! System descriptions and their magnitude matrices.
//!
//! A causal LTI interconnection given by finite impulse responses is reduced
//! to the nonnegative matrix of entrywise ℓ1 norms. Every robustness measure
//! in this crate depends on the system only through that matrix.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Finite-impulse-response description of an `n`-input, `n`-output system.
///
/// Indices are 0-based. Missing entries stand for the zero response.
#[derive(Debug, Clone, PartialEq)]
pub struct FirSystem {
    n: usize,
    entries: BTreeMap<(usize, usize), Vec<f64>>,
}

impl FirSystem {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("system dimension must be at least 1"));
        }
        Ok(FirSystem {
            n,
            entries: BTreeMap::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Sets the impulse response from input `j` to output `i`.
    pub fn set(&mut self, i: usize, j: usize, impulse: Vec<f64>) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(Error::validation(format!(
                "entry ({}, {}) out of range for n = {}",
                i + 1,
                j + 1,
                self.n
            )));
        }
        if let Some(t) = impulse.iter().position(|c| !c.is_finite()) {
            return Err(Error::validation(format!(
                "entry ({}, {}) has a non-finite coefficient at t = {}",
                i + 1,
                j + 1,
                t
            )));
        }
        self.entries.insert((i, j), impulse);
        Ok(())
    }

    pub fn with(mut self, i: usize, j: usize, impulse: Vec<f64>) -> Result<Self> {
        self.set(i, j, impulse)?;
        Ok(self)
    }

    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize), &[f64])> {
        self.entries.iter().map(|(&k, v)| (k, v.as_slice()))
    }

    /// Delayed ring `x_k(t+1) = x_{k+1}(t)` with unit gains.
    pub fn unit_delay_ring(n: usize) -> Result<Self> {
        let mut sys = FirSystem::new(n)?;
        for k in 0..n {
            sys.set(k, (k + 1) % n, vec![0.0, 1.0])?;
        }
        Ok(sys)
    }
}

/// Nonnegative square matrix of entrywise ℓ1 norms, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeMatrix {
    n: usize,
    data: Vec<f64>,
}

impl MagnitudeMatrix {
    /// Builds a matrix from row-major data, rejecting negative or non-finite entries.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("matrix dimension must be at least 1"));
        }
        if data.len() != n * n {
            return Err(Error::validation(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        for (k, &v) in data.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::validation(format!(
                    "entry at row {}, column {} is {v}; entries must be finite and nonnegative",
                    k / n + 1,
                    k % n + 1
                )));
            }
        }
        Ok(MagnitudeMatrix { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::validation(format!(
                "row {} has {} entries, expected {n}",
                i + 1,
                r.len()
            )));
        }
        Self::from_row_major(n, rows.concat())
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::from_row_major(n, vec![0.0; n * n])
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, &v) in diag.iter().enumerate() {
            data[i * n + i] = v;
        }
        Self::from_row_major(n, data)
    }

    /// Ring with `M[k][k+1 mod n] = weights[k]`: node `k` is driven by node `k+1`.
    pub fn ring(weights: &[f64]) -> Result<Self> {
        let n = weights.len();
        let mut data = vec![0.0; n * n];
        for (k, &w) in weights.iter().enumerate() {
            data[k * n + (k + 1) % n] += w;
        }
        Self::from_row_major(n, data)
    }

    pub fn unit_ring(n: usize) -> Result<Self> {
        Self::ring(&vec![1.0; n])
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// `a·M` for `a ≥ 0`.
    pub fn scaled(&self, a: f64) -> Result<Self> {
        Self::from_row_major(self.n, self.data.iter().map(|v| a * v).collect())
    }

    /// `D M D⁻¹` with `D = diag(d)`, `d` strictly positive.
    pub fn similarity(&self, d: &[f64]) -> Result<Self> {
        if d.len() != self.n {
            return Err(Error::validation("scaling length does not match matrix"));
        }
        if d.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::validation(
                "similarity scaling must be strictly positive",
            ));
        }
        let n = self.n;
        let mut data = self.data.clone();
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] *= d[i] / d[j];
            }
        }
        Self::from_row_major(n, data)
    }

    /// `diag(delta)·M`.
    pub fn left_diagonal(&self, delta: &[f64]) -> Result<Self> {
        if delta.len() != self.n {
            return Err(Error::validation("diagonal length does not match matrix"));
        }
        let n = self.n;
        let mut data = self.data.clone();
        for i in 0..n {
            for v in &mut data[i * n..(i + 1) * n] {
                *v *= delta[i];
            }
        }
        Self::from_row_major(n, data)
    }

    /// Principal submatrix on the given (0-based) indices.
    pub fn principal(&self, indices: &[usize]) -> MagnitudeMatrix {
        let m = indices.len();
        let mut data = Vec::with_capacity(m * m);
        for &i in indices {
            for &j in indices {
                data.push(self.get(i, j));
            }
        }
        MagnitudeMatrix { n: m, data }
    }

    /// True if the largest entry lies on the diagonal (relative tolerance `tol`).
    pub fn is_diagonally_maximal(&self, tol: f64) -> bool {
        let max = self.max_entry();
        let diag = (0..self.n).map(|i| self.get(i, i)).fold(0.0, f64::max);
        diag >= max * (1.0 - tol)
    }
}

impl fmt::Display for MagnitudeMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            writeln!(f, "[{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

/// Per-channel peak magnitudes of a signal.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeVector(Vec<f64>);

impl MagnitudeVector {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if let Some(i) = v.iter().position(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::validation(format!(
                "magnitude vector entry {} must be finite and nonnegative",
                i + 1
            )));
        }
        Ok(MagnitudeVector(v))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Magnitude matrix of a FIR system: `M_ij = Σ_t |h_ij(t)|`.
pub fn magnitude_matrix(sys: &FirSystem) -> MagnitudeMatrix {
    let n = sys.n;
    let mut data = vec![0.0; n * n];
    for (&(i, j), h) in &sys.entries {
        // sequential summation in time order keeps the result reproducible
        data[i * n + j] = h.iter().fold(0.0, |acc, c| acc + c.abs());
    }
    MagnitudeMatrix { n, data }
}

/// ℓ∞-induced norm: the maximum row sum.
pub fn linf_induced_norm(m: &MagnitudeMatrix) -> f64 {
    m.rows()
        .map(|r| r.iter().fold(0.0, |acc, v| acc + v))
        .fold(0.0, f64::max)
}

/// Induced norm from ℓ1 to ℓ∞: the maximum entry.
pub fn one_to_inf_norm(m: &MagnitudeMatrix) -> f64 {
    m.max_entry()
}

/// Induced norm from ℓ∞ to ℓ1 of a diagonal operator: the sum of its magnitudes.
pub fn diag_inf_to_one_norm(delta: &MagnitudeVector) -> f64 {
    delta.0.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fir_absolute_sum() {
        let sys = FirSystem::new(1)
            .unwrap()
            .with(0, 0, vec![1.0, -0.5])
            .unwrap();
        assert_eq!(magnitude_matrix(&sys).as_slice(), &[1.5]);
    }

    #[test]
    fn delayed_ring_is_cyclic_permutation() {
        let m = magnitude_matrix(&FirSystem::unit_delay_ring(3).unwrap());
        assert_eq!(m, MagnitudeMatrix::unit_ring(3).unwrap());
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(2, 0), 1.0);
        assert_eq!(m.get(0, 0), 0.0);
    }

    #[test]
    fn empty_system_is_zero() {
        let m = magnitude_matrix(&FirSystem::new(2).unwrap());
        assert_eq!(m, MagnitudeMatrix::zeros(2).unwrap());
    }

    #[test]
    fn out_of_range_entry_rejected() {
        let mut sys = FirSystem::new(2).unwrap();
        assert!(matches!(
            sys.set(2, 0, vec![1.0]),
            Err(Error::Validation(_))
        ));
        assert!(sys.set(0, 0, vec![f64::NAN]).is_err());
    }

    #[test]
    fn norms() {
        let id = MagnitudeMatrix::identity(3).unwrap();
        assert_eq!(linf_induced_norm(&id), 1.0);
        assert_eq!(one_to_inf_norm(&id), 1.0);

        let m = MagnitudeMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 0.5]]).unwrap();
        assert_eq!(linf_induced_norm(&m), 3.0);

        let m = MagnitudeMatrix::from_rows(&[vec![0.2, 0.9], vec![0.1, 0.3]]).unwrap();
        assert_eq!(one_to_inf_norm(&m), 0.9);
        assert_eq!(one_to_inf_norm(&MagnitudeMatrix::zeros(3).unwrap()), 0.0);
        assert_eq!(
            linf_induced_norm(&MagnitudeMatrix::unit_ring(5).unwrap()),
            1.0
        );
    }

    #[test]
    fn diagonal_sum_norm() {
        let v = |x: Vec<f64>| diag_inf_to_one_norm(&MagnitudeVector::new(x).unwrap());
        assert_eq!(v(vec![1.0, 1.0, 1.0]), 3.0);
        assert_eq!(v(vec![0.5, 0.25]), 0.75);
        assert_eq!(v(vec![0.0, 0.0]), 0.0);
        assert!(MagnitudeVector::new(vec![-1.0]).is_err());
    }

    #[test]
    fn negative_entry_names_position() {
        let err = MagnitudeMatrix::from_rows(&[vec![1.0, 0.0], vec![-2.0, 1.0]]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2") && msg.contains("column 1"), "{msg}");
    }
}
