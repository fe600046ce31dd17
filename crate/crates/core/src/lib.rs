//! Numerical laboratory for oscillating-coefficient fractional Gagliardo
//! energies and their homogenized local limit.
//!
//! The crate is `no_std` + `alloc`. The default `std` feature only switches
//! the deterministic work splitter in [`par`] from sequential execution to a
//! rayon thread pool; every result is bit-identical either way.
//!
//! Module map:
//!
//! - [`coefficient`]: 1-periodic coefficient fields with certified bounds.
//! - [`cell_problem`]: periodic corrector solves and the effective tensor.
//! - [`energy`]: polar/Monte Carlo quadrature of the truncated energy, the
//!   far-field tail bound and the constant-coefficient limit check.
//! - [`lattice`]: orthonormal frames, rotated lattices, Kuhn simplices and
//!   cube-average interpolants.
//! - [`recovery`]: corrector-perturbed recovery fields, cut-offs, truncation.
//! - [`study`]: scaling studies along an epsilon ladder.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod cell_problem;
pub mod coefficient;
pub mod domain;
pub mod energy;
mod error;
pub mod fft;
pub mod field;
pub mod geometry;
pub mod lattice;
pub mod linalg;
pub mod par;
pub mod quadrature;
pub mod recovery;
pub mod rng;
pub mod study;

pub use error::{Error, Result};

/// Version of this crate, recorded in study summaries.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Largest spatial dimension supported anywhere in the crate.
pub const MAX_DIM: usize = 4;

/// Surface measure of the unit sphere in `R^d`: 2, 2π, 4π, 2π², ...
pub fn sphere_measure(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    2.0 * libm::pow(core::f64::consts::PI, half) / libm::tgamma(half)
}

/// The constant multiplying the local limit energy, `σ_{d-1} / (2d)`.
pub fn limit_constant(d: usize) -> f64 {
    sphere_measure(d) / (2.0 * d as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn sphere_measures() {
        assert!((sphere_measure(1) - 2.0).abs() < 1e-14);
        assert!((sphere_measure(2) - 2.0 * PI).abs() < 1e-13);
        assert!((sphere_measure(3) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_measure(4) - 2.0 * PI * PI).abs() < 1e-12);
        assert!((limit_constant(2) - PI / 2.0).abs() < 1e-14);
    }
}
