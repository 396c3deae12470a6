//! Sparsity-aware robustness analysis of interconnected systems.
//!
//! Given the nonnegative magnitude matrix `M` of a system, this crate computes
//!
//! * μ = ρ(M), robustness against diagonal uncertainty measured by its
//!   largest channel ([`spectral::mu`]);
//! * ν, robustness against diagonal uncertainty measured by the *sum* of its
//!   channel gains, exactly for 2×2 matrices and rings and by a brute-force
//!   oracle for n ≤ 4 ([`nu_exact`]), with principal-submatrix lower bounds
//!   ([`spectral::nu_lower_bound`]);
//! * ν̄, the convex upper bound on ν ([`nubar`]), with optimality
//!   certificates, balanced scalings, and the local balancing heuristic
//!   ([`balancer`]).
//!
//! ```
//! use nu_analyzer::{magnitude::MagnitudeMatrix, nubar::nubar_exact, spectral::mu};
//!
//! let ring = MagnitudeMatrix::unit_ring(4)?;
//! assert!((mu(&ring) - 1.0).abs() < 1e-9);
//! assert_eq!(nubar_exact(&ring).value, 1.0);
//! # Ok::<(), nu_analyzer::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod balancer;
pub mod cli;
mod error;
pub mod graph;
pub mod magnitude;
pub mod nu_exact;
pub mod nubar;
pub mod report;
pub mod spectral;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    pub struct Readme;
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/magnitude.md")]
    pub struct Magnitude;
    #[doc = include_str!("../../../book/src/measures.md")]
    pub struct Measures;
    #[doc = include_str!("../../../book/src/nubar.md")]
    pub struct Nubar;
    #[doc = include_str!("../../../book/src/exact-nu.md")]
    pub struct ExactNu;
    #[doc = include_str!("../../../book/src/heuristic.md")]
    pub struct Heuristic;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
