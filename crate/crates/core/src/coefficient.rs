//! 1-periodic, continuous, uniformly bounded scalar coefficient fields.
//!
//! Each field carries analytically certified bounds `alpha ≤ a ≤ beta` and a
//! Lipschitz constant `L`, giving the modulus of continuity
//! `ω(t) = min(L·t, beta − alpha)`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{check_dim, invalid, Result};
use crate::MAX_DIM;

/// Per-axis factor of a Fourier term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    Cos,
    Sin,
}

/// `amplitude · Π_i trig_i(2π k_i y_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierTerm {
    pub k: Vec<i32>,
    pub amplitude: f64,
    pub factors: Vec<Trig>,
}

impl FourierTerm {
    /// A term with the given per-axis factors.
    pub fn new(k: Vec<i32>, amplitude: f64, factors: Vec<Trig>) -> Self {
        Self { k, amplitude, factors }
    }

    /// `amplitude · Π_i cos(2π k_i y_i)`
    pub fn cosine(k: Vec<i32>, amplitude: f64) -> Self {
        let factors = vec![Trig::Cos; k.len()];
        Self { k, amplitude, factors }
    }

    fn eval(&self, y: &[f64]) -> f64 {
        let mut v = self.amplitude;
        for ((&k, f), &yi) in self.k.iter().zip(&self.factors).zip(y) {
            let arg = 2.0 * PI * k as f64 * yi;
            v *= match f {
                Trig::Cos => libm::cos(arg),
                Trig::Sin => libm::sin(arg),
            };
        }
        v
    }

    fn wavenumber(&self) -> f64 {
        libm::sqrt(self.k.iter().map(|&k| (k as f64) * (k as f64)).sum())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientForm {
    Constant(f64),
    Fourier {
        mean: f64,
        terms: Vec<FourierTerm>,
    },
    /// Phase table on an `m^d` subgrid of the unit cell (axis 0 varies
    /// fastest), mollified with a C² bump of width `smoothing`.
    SmoothedPiecewise {
        cells_per_axis: usize,
        table: Vec<f64>,
        smoothing: f64,
    },
}

/// A 1-periodic coefficient `a(·)` on `R^d`. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicCoefficient {
    dim: usize,
    form: CoefficientForm,
    alpha: f64,
    beta: f64,
    lipschitz: f64,
}

/// Peak of the unit-width bump density `(35/16)(1 − 4u²)³` on `|u| ≤ 1/2`.
const BUMP_PEAK: f64 = 35.0 / 16.0;

/// CDF of the unit-width C² bump: 0 below `-1/2`, 1 above `1/2`.
pub fn smooth_step(u: f64) -> f64 {
    if u <= -0.5 {
        0.0
    } else if u >= 0.5 {
        1.0
    } else {
        let v = 2.0 * u;
        let v2 = v * v;
        0.5 + (35.0 / 32.0) * v * (1.0 - v2 + v2 * v2 * (0.6 - v2 / 7.0))
    }
}

fn check_dimension(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(invalid("coefficient dimension must be between 1 and 4"));
    }
    Ok(())
}

impl PeriodicCoefficient {
    pub fn constant(dim: usize, c: f64) -> Result<Self> {
        check_dimension(dim)?;
        if !(c > 0.0) || !c.is_finite() {
            return Err(invalid("constant coefficient must be positive and finite"));
        }
        Ok(Self {
            dim,
            form: CoefficientForm::Constant(c),
            alpha: c,
            beta: c,
            lipschitz: 0.0,
        })
    }

    /// `mean + Σ terms`; bounds `mean ± Σ|amplitude|`, `L = 2π Σ |k|·|amplitude|`.
    pub fn fourier(dim: usize, mean: f64, terms: Vec<FourierTerm>) -> Result<Self> {
        check_dimension(dim)?;
        for t in &terms {
            check_dim(dim, t.k.len())?;
            check_dim(dim, t.factors.len())?;
            if !t.amplitude.is_finite() {
                return Err(invalid("Fourier amplitude must be finite"));
            }
        }
        let spread: f64 = terms.iter().map(|t| t.amplitude.abs()).sum();
        let alpha = mean - spread;
        let beta = mean + spread;
        if !(alpha > 0.0) || !beta.is_finite() {
            return Err(invalid("Fourier coefficient is not certified positive: mean must exceed Σ|amplitude|"));
        }
        let lipschitz = 2.0 * PI * terms.iter().map(|t| t.wavenumber() * t.amplitude.abs()).sum::<f64>();
        Ok(Self {
            dim,
            form: CoefficientForm::Fourier { mean, terms },
            alpha,
            beta,
            lipschitz,
        })
    }

    /// Mollified piecewise-constant field. `smoothing` must lie in
    /// `(0, 1/cells_per_axis]` so neighboring interface layers never overlap.
    pub fn smoothed_piecewise(dim: usize, cells_per_axis: usize, table: Vec<f64>, smoothing: f64) -> Result<Self> {
        check_dimension(dim)?;
        if cells_per_axis == 0 {
            return Err(invalid("phase table needs at least one cell per axis"));
        }
        check_dim(cells_per_axis.pow(dim as u32), table.len())?;
        let m = cells_per_axis as f64;
        if !(smoothing > 0.0) || smoothing > 1.0 / m {
            return Err(invalid("smoothing length must lie in (0, 1/cells_per_axis]"));
        }
        if table.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(invalid("phase values must be positive and finite"));
        }
        let alpha = table.iter().copied().fold(f64::INFINITY, f64::min);
        let beta = table.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // |∂_i a| ≤ (β − α)/2 · Σ_j |w_j'| ≤ (β − α) · peak / ℓ
        let lipschitz = libm::sqrt(dim as f64) * (beta - alpha) * BUMP_PEAK / smoothing;
        Ok(Self {
            dim,
            form: CoefficientForm::SmoothedPiecewise {
                cells_per_axis,
                table,
                smoothing,
            },
            alpha,
            beta,
            lipschitz,
        })
    }

    /// Laminate along the first axis: `alpha` on `y_1 ∈ [0, 1/2)`, `beta` on
    /// `[1/2, 1)`, mollified with width `smoothing`.
    pub fn two_phase_layers(dim: usize, alpha: f64, beta: f64, smoothing: f64) -> Result<Self> {
        check_dimension(dim)?;
        let cells = 2usize.pow(dim as u32);
        let table = (0..cells).map(|c| if c % 2 == 0 { alpha } else { beta }).collect();
        Self::smoothed_piecewise(dim, 2, table, smoothing)
    }

    /// Checkerboard: `alpha` where the subcell indices have even sum.
    pub fn checkerboard(dim: usize, alpha: f64, beta: f64, smoothing: f64) -> Result<Self> {
        check_dimension(dim)?;
        let cells = 2usize.pow(dim as u32);
        let table = (0..cells)
            .map(|c| {
                let parity = (0..dim).map(|i| (c >> i) & 1).sum::<usize>() % 2;
                if parity == 0 {
                    alpha
                } else {
                    beta
                }
            })
            .collect();
        Self::smoothed_piecewise(dim, 2, table, smoothing)
    }

    /// Default smoothing length: 1/20 of the subcell size.
    pub fn default_smoothing(cells_per_axis: usize) -> f64 {
        1.0 / (20.0 * cells_per_axis as f64)
    }

    /// The pointwise reciprocal field scaled by `c`, `c / a(y)`, when it stays
    /// in the same family (constant or piecewise tables).
    pub fn reciprocal_scaled(&self, c: f64) -> Result<Self> {
        match &self.form {
            CoefficientForm::Constant(v) => Self::constant(self.dim, c / v),
            CoefficientForm::SmoothedPiecewise {
                cells_per_axis,
                table,
                smoothing,
            } => Self::smoothed_piecewise(self.dim, *cells_per_axis, table.iter().map(|v| c / v).collect(), *smoothing),
            CoefficientForm::Fourier { .. } => Err(invalid("reciprocal of a Fourier coefficient is not a finite Fourier sum")),
        }
    }

    /// Multiplies the field by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(invalid("scale factor must be positive"));
        }
        match &self.form {
            CoefficientForm::Constant(v) => Self::constant(self.dim, c * v),
            CoefficientForm::Fourier { mean, terms } => Self::fourier(
                self.dim,
                c * mean,
                terms
                    .iter()
                    .map(|t| FourierTerm::new(t.k.clone(), c * t.amplitude, t.factors.clone()))
                    .collect(),
            ),
            CoefficientForm::SmoothedPiecewise {
                cells_per_axis,
                table,
                smoothing,
            } => Self::smoothed_piecewise(self.dim, *cells_per_axis, table.iter().map(|v| c * v).collect(), *smoothing),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn form(&self) -> &CoefficientForm {
        &self.form
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.form, CoefficientForm::Constant(_))
    }

    /// Evaluates `a(y)`; `y` is wrapped into `[0,1)^d` first.
    ///
    /// Panics if `y.len()` differs from the coefficient dimension.
    pub fn evaluate(&self, y: &[f64]) -> f64 {
        assert_eq!(y.len(), self.dim, "coefficient evaluated at a point of the wrong dimension");
        let mut w = [0.0; MAX_DIM];
        for (wi, &yi) in w.iter_mut().zip(y) {
            *wi = yi - libm::floor(yi);
        }
        let w = &w[..self.dim];
        match &self.form {
            CoefficientForm::Constant(c) => *c,
            CoefficientForm::Fourier { mean, terms } => mean + terms.iter().map(|t| t.eval(w)).sum::<f64>(),
            CoefficientForm::SmoothedPiecewise {
                cells_per_axis,
                table,
                smoothing,
            } => eval_piecewise(w, *cells_per_axis, table, *smoothing),
        }
    }

    /// Edges of the interface layers within one period along each axis,
    /// sorted in `[0, 1)`; empty for the smooth forms.
    pub fn layer_edges(&self) -> Vec<f64> {
        match &self.form {
            CoefficientForm::SmoothedPiecewise {
                cells_per_axis,
                smoothing,
                ..
            } => {
                let m = *cells_per_axis as f64;
                let mut out: Vec<f64> = (0..*cells_per_axis)
                    .flat_map(|j| {
                        let c = j as f64 / m;
                        [c - smoothing / 2.0, c + smoothing / 2.0]
                    })
                    .map(|x| x - libm::floor(x))
                    .collect();
                out.sort_by(f64::total_cmp);
                out.dedup();
                out
            }
            _ => Vec::new(),
        }
    }

    /// Modulus of continuity `ω(t) = min(L·t, beta − alpha)`.
    pub fn modulus(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(invalid("modulus argument must be nonnegative"));
        }
        Ok((self.lipschitz * t).min(self.beta - self.alpha))
    }

    /// Stable 64-bit fingerprint of the field definition (FNV-1a over the
    /// parameter bit patterns); used as a cache key.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv::new();
        h.write(self.dim as u64);
        match &self.form {
            CoefficientForm::Constant(c) => {
                h.write(1);
                h.write(c.to_bits());
            }
            CoefficientForm::Fourier { mean, terms } => {
                h.write(2);
                h.write(mean.to_bits());
                for t in terms {
                    for &k in &t.k {
                        h.write(k as i64 as u64);
                    }
                    for f in &t.factors {
                        h.write(matches!(f, Trig::Sin) as u64);
                    }
                    h.write(t.amplitude.to_bits());
                }
            }
            CoefficientForm::SmoothedPiecewise {
                cells_per_axis,
                table,
                smoothing,
            } => {
                h.write(3);
                h.write(*cells_per_axis as u64);
                for v in table {
                    h.write(v.to_bits());
                }
                h.write(smoothing.to_bits());
            }
        }
        h.finish()
    }
}

pub(crate) struct Fnv(u64);

impl Fnv {
    pub(crate) fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    pub(crate) fn write(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub(crate) fn finish(&self) -> u64 {
        self.0
    }
}

/// Smoothed indicator of subinterval `j` of `m`, summed over periodic images.
fn axis_weights(t: f64, m: usize, ell: f64, out: &mut [f64]) {
    let mf = m as f64;
    for (j, o) in out.iter_mut().enumerate().take(m) {
        let lo = j as f64 / mf;
        let hi = (j + 1) as f64 / mf;
        let mut w = 0.0;
        for shift in [-1.0, 0.0, 1.0] {
            let x = t + shift;
            w += smooth_step((x - lo) / ell) - smooth_step((x - hi) / ell);
        }
        *o = w;
    }
}

fn eval_piecewise(y: &[f64], m: usize, table: &[f64], ell: f64) -> f64 {
    let d = y.len();
    let mut weights: Vec<f64> = vec![0.0; d * m];
    for i in 0..d {
        axis_weights(y[i], m, ell, &mut weights[i * m..(i + 1) * m]);
    }
    let mut acc = 0.0;
    for (c, &v) in table.iter().enumerate() {
        let mut w = 1.0;
        let mut rest = c;
        for i in 0..d {
            w *= weights[i * m + rest % m];
            rest /= m;
        }
        acc += v * w;
    }
    acc
}
