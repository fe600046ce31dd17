//! Periodic cell problem on a uniform torus grid.
//!
//! The discrete energy is `Σ_nodes a(y)|z + ∇_h φ(y)|² h^d` with centered
//! periodic differences `∇_h`. Its minimizer solves `K φ = b` with
//! `K = Σ_k D_kᵀ a D_k`, which is handled by conjugate gradients
//! preconditioned with the spectral inverse of the constant-coefficient
//! operator.
//!
//! Centered differences see every parity sublattice separately, so `K` has a
//! `2^d`-dimensional null space spanned by the modes with all frequencies in
//! `{0, n/2}`. The preconditioner vanishes on exactly those modes, which keeps
//! the iterates in the orthogonal complement.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::coefficient::{FourierTerm, PeriodicCoefficient, Trig};
use crate::error::{check_dim, invalid, Error, Result};
use crate::fft::Fft;
use crate::par;

/// Relative residual used when no tolerance is configured.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Default grid resolution per axis.
pub fn default_points(d: usize) -> usize {
    match d {
        1 => 1024,
        2 => 256,
        _ => 64,
    }
}

/// Uniform grid on the unit torus, `n` points per axis, axis 0 fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TorusGrid {
    d: usize,
    n: usize,
}

impl TorusGrid {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(invalid("torus grid dimension must be 1, 2 or 3"));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(invalid("torus grid needs a power of two n >= 8"));
        }
        Ok(Self { d, n })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell volume `h^d`.
    pub fn cell_volume(&self) -> f64 {
        libm::pow(self.spacing(), self.d as f64)
    }

    /// Integer coordinates of node `idx`.
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let mut c = [0; 3];
        let mut rest = idx;
        for ci in c.iter_mut().take(self.d) {
            *ci = rest % self.n;
            rest /= self.n;
        }
        c
    }

    /// Position of node `idx` in `[0,1)^d`.
    pub fn point(&self, idx: usize, out: &mut [f64]) {
        let c = self.coords(idx);
        let h = self.spacing();
        for (o, &ci) in out.iter_mut().zip(&c) {
            *o = ci as f64 * h;
        }
    }

    /// Index of the node shifted by `step ∈ {-1, +1}` along `axis`, wrapping.
    #[inline]
    fn neighbor(&self, idx: usize, axis: usize, forward: bool) -> usize {
        let stride = self.n.pow(axis as u32);
        let c = (idx / stride) % self.n;
        if forward {
            if c + 1 == self.n {
                idx + stride - self.n * stride
            } else {
                idx + stride
            }
        } else if c == 0 {
            idx + (self.n - 1) * stride
        } else {
            idx - stride
        }
    }

    /// Centered difference `(f(i + e_k) − f(i − e_k)) / 2h`.
    #[inline]
    pub fn centered_difference(&self, f: &[f64], idx: usize, axis: usize) -> f64 {
        let fwd = f[self.neighbor(idx, axis, true)];
        let bwd = f[self.neighbor(idx, axis, false)];
        (fwd - bwd) * 0.5 * self.n as f64
    }
}

/// Nodal corrector values for one direction `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Corrector {
    pub grid: TorusGrid,
    pub values: Vec<f64>,
    pub z: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl Corrector {
    pub fn mean(&self) -> f64 {
        par::sum(self.values.len(), par::CHUNK, |i| self.values[i]) / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Discrete cell energy `Σ a|z + ∇_h φ|² h^d` of these values.
    pub fn energy(&self, coeff: &PeriodicCoefficient) -> Result<f64> {
        check_dim(self.grid.dim(), coeff.dim())?;
        let op = CellOperator::new(coeff, self.grid)?;
        Ok(op.energy(&self.values, &self.z))
    }

    /// Periodic interpolant of the nodal values.
    pub fn profile(&self, mode: Interpolation) -> GridProfile {
        GridProfile::new(self.grid, &self.values, mode)
    }
}

/// Effective tensor together with the correctors that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSolution {
    pub a_hom: Vec<Vec<f64>>,
    pub correctors: Vec<Corrector>,
    pub residual: f64,
}

impl CellSolution {
    /// `⟨A_hom z, z⟩`
    pub fn quadratic_form(&self, z: &[f64]) -> f64 {
        self.a_hom
            .iter()
            .zip(z)
            .map(|(row, zi)| zi * row.iter().zip(z).map(|(a, zj)| a * zj).sum::<f64>())
            .sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        crate::linalg::symmetric_eigenvalues(&self.a_hom)
    }
}

/// Discretized cell operator for one coefficient and grid.
struct CellOperator {
    grid: TorusGrid,
    a: Vec<f64>,
    mean_a: f64,
    fft: Fft,
    /// Inverse symbol of `-Σ D_k D_k` (zero on the parity modes).
    inv_symbol: Vec<f64>,
}

impl CellOperator {
    fn new(coeff: &PeriodicCoefficient, grid: TorusGrid) -> Result<Self> {
        check_dim(grid.dim(), coeff.dim())?;
        let len = grid.len();
        let d = grid.dim();
        let mut a = vec![0.0; len];
        par::fill(&mut a, |i| {
            let mut y = [0.0; 3];
            grid.point(i, &mut y[..d]);
            coeff.evaluate(&y[..d])
        });
        let mean_a = par::sum(len, par::CHUNK, |i| a[i]) / len as f64;
        let n = grid.points_per_axis();
        let h2 = grid.spacing() * grid.spacing();
        let sin2: Vec<f64> = (0..n)
            .map(|m| {
                if m == 0 || 2 * m == n {
                    0.0
                } else {
                    let s = libm::sin(2.0 * PI * m as f64 / n as f64);
                    s * s / h2
                }
            })
            .collect();
        let mut inv_symbol = vec![0.0; len];
        par::fill(&mut inv_symbol, |i| {
            let c = grid.coords(i);
            let sym: f64 = c[..d].iter().map(|&m| sin2[m]).sum();
            if sym == 0.0 {
                0.0
            } else {
                1.0 / sym
            }
        });
        Ok(Self {
            grid,
            a,
            mean_a,
            fft: Fft::new(n)?,
            inv_symbol,
        })
    }

    fn len(&self) -> usize {
        self.a.len()
    }

    /// `out = Σ_k D_kᵀ (w ⊙ D_k f)` where `w` is a nodal weight (the
    /// coefficient unless overridden).
    fn apply_weighted(&self, f: &[f64], w: &[f64], out: &mut [f64]) {
        let d = self.grid.dim();
        let g = self.grid;
        let flux: Vec<Vec<f64>> = (0..d)
            .map(|k| {
                let mut v = vec![0.0; self.len()];
                par::fill(&mut v, |i| w[i] * g.centered_difference(f, i, k));
                v
            })
            .collect();
        par::fill(out, |i| {
            let mut acc = 0.0;
            for (k, fk) in flux.iter().enumerate() {
                acc -= g.centered_difference(fk, i, k);
            }
            acc
        });
    }

    fn apply(&self, f: &[f64], out: &mut [f64]) {
        self.apply_weighted(f, &self.a, out);
    }

    /// Right-hand side `b = Σ_k D_k (a z_k)`.
    fn rhs(&self, z: &[f64], out: &mut [f64]) {
        let g = self.grid;
        let a = &self.a;
        par::fill(out, |i| {
            let mut acc = 0.0;
            for (k, &zk) in z.iter().enumerate() {
                if zk != 0.0 {
                    acc += zk * g.centered_difference(a, i, k);
                }
            }
            acc
        });
    }

    /// Spectral solve with `scale · (−Σ D_k D_k)`, pseudo-inverse on the parity modes.
    fn precondition(&self, r: &[f64], scale: f64, out: &mut [f64]) {
        let mut re = r.to_vec();
        let mut im = vec![0.0; r.len()];
        let d = self.grid.dim();
        self.fft.transform_nd(d, &mut re, &mut im, false);
        let inv = 1.0 / scale;
        for ((x, y), s) in re.iter_mut().zip(im.iter_mut()).zip(&self.inv_symbol) {
            *x *= s * inv;
            *y *= s * inv;
        }
        self.fft.transform_nd(d, &mut re, &mut im, true);
        out.copy_from_slice(&re);
    }

    fn energy(&self, phi: &[f64], z: &[f64]) -> f64 {
        let g = self.grid;
        let d = g.dim();
        par::sum(self.len(), par::CHUNK, |i| {
            let mut s = 0.0;
            for k in 0..d {
                let gk = z[k] + g.centered_difference(phi, i, k);
                s += gk * gk;
            }
            self.a[i] * s
        }) * g.cell_volume()
    }

    fn bilinear(&self, phi_i: &[f64], zi: &[f64], phi_j: &[f64], zj: &[f64]) -> f64 {
        let g = self.grid;
        let d = g.dim();
        par::sum(self.len(), par::CHUNK, |i| {
            let mut s = 0.0;
            for k in 0..d {
                let gi = zi[k] + g.centered_difference(phi_i, i, k);
                let gj = zj[k] + g.centered_difference(phi_j, i, k);
                s += gi * gj;
            }
            self.a[i] * s
        }) * g.cell_volume()
    }

    fn solve(&self, z: &[f64], tol: f64, max_iterations: usize) -> Result<Corrector> {
        let len = self.len();
        let mut x = vec![0.0; len];
        let mut b = vec![0.0; len];
        self.rhs(z, &mut b);
        let b_norm = libm::sqrt(par::dot(&b, &b));
        let corrector = |values, iterations, residual| Corrector {
            grid: self.grid,
            values,
            z: z.to_vec(),
            iterations,
            residual,
        };
        if b_norm == 0.0 {
            return Ok(corrector(x, 0, 0.0));
        }
        let mut r = b;
        let mut zr = vec![0.0; len];
        self.precondition(&r, self.mean_a, &mut zr);
        let mut p = zr.clone();
        let mut rz = par::dot(&r, &zr);
        let mut ap = vec![0.0; len];
        let mut residual = 1.0;
        for it in 1..=max_iterations {
            self.apply(&p, &mut ap);
            let pap = par::dot(&p, &ap);
            if !(pap > 0.0) {
                break;
            }
            let alpha = rz / pap;
            par::axpy(alpha, &p, &mut x);
            par::axpy(-alpha, &ap, &mut r);
            par::remove_mean(&mut x);
            residual = libm::sqrt(par::dot(&r, &r)) / b_norm;
            if residual <= tol {
                return Ok(corrector(x, it, residual));
            }
            self.precondition(&r, self.mean_a, &mut zr);
            let rz_new = par::dot(&r, &zr);
            let beta = rz_new / rz;
            rz = rz_new;
            par::fill(&mut ap, |i| zr[i] + beta * p[i]);
            core::mem::swap(&mut p, &mut ap);
        }
        Err(Error::NotConverged {
            iterations: max_iterations,
            residual,
        })
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    Ok(())
}

fn default_cap(grid: &TorusGrid) -> usize {
    10 * grid.points_per_axis() * grid.dim()
}

/// Minimizes the discrete cell energy for direction `z` to relative residual `tol`.
pub fn solve_corrector(coeff: &PeriodicCoefficient, z: &[f64], grid: TorusGrid, tol: f64) -> Result<Corrector> {
    solve_corrector_capped(coeff, z, grid, tol, default_cap(&grid))
}

/// As [`solve_corrector`] with an explicit iteration cap.
pub fn solve_corrector_capped(
    coeff: &PeriodicCoefficient,
    z: &[f64],
    grid: TorusGrid,
    tol: f64,
    max_iterations: usize,
) -> Result<Corrector> {
    check_tol(tol)?;
    check_dim(grid.dim(), z.len())?;
    let op = CellOperator::new(coeff, grid)?;
    op.solve(z, tol, max_iterations)
}

/// Solves the `d` corrector problems for the unit directions and assembles
/// the symmetrized effective tensor from the bilinear form.
pub fn homogenized_matrix(coeff: &PeriodicCoefficient, grid: TorusGrid, tol: f64) -> Result<CellSolution> {
    check_tol(tol)?;
    let op = CellOperator::new(coeff, grid)?;
    let d = grid.dim();
    let cap = default_cap(&grid);
    let unit = |k: usize| {
        let mut e = vec![0.0; d];
        e[k] = 1.0;
        e
    };
    let correctors = par::map(d, |k| op.solve(&unit(k), tol, cap))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut a_hom = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in i..d {
            let v = op.bilinear(&correctors[i].values, &unit(i), &correctors[j].values, &unit(j));
            a_hom[i][j] = v;
            a_hom[j][i] = v;
        }
    }
    let residual = correctors.iter().fold(0.0f64, |m, c| m.max(c.residual));
    Ok(CellSolution {
        a_hom,
        correctors,
        residual,
    })
}

/// Smoothing used in `|g|^p ≈ (|g|² + μ²)^{p/2}` for `p < 2`.
pub const P_SMOOTHING: f64 = 1e-8;

/// Minimized discrete `Σ a|z + ∇_h φ|^p h^d` over mean-zero periodic `φ`.
///
/// Preconditioned gradient descent from `φ = 0` with Barzilai–Borwein trial
/// steps and Armijo backtracking; stops when the preconditioned gradient norm
/// falls below `tol` times its initial value.
pub fn homogenized_density_p(coeff: &PeriodicCoefficient, z: &[f64], p: f64, grid: TorusGrid, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    if !(p > 1.0) || !p.is_finite() {
        return Err(invalid("exponent p must exceed 1"));
    }
    check_dim(grid.dim(), z.len())?;
    let op = CellOperator::new(coeff, grid)?;
    let mu2 = if p < 2.0 { P_SMOOTHING * P_SMOOTHING } else { 0.0 };
    let z_norm2: f64 = z.iter().map(|v| v * v).sum();
    if z_norm2 == 0.0 {
        return Ok(0.0);
    }
    let g = grid;
    let d = g.dim();
    let len = op.len();
    let vol = g.cell_volume();
    let objective = |phi: &[f64]| -> f64 {
        par::sum(len, par::CHUNK, |i| {
            let mut s = mu2;
            for k in 0..d {
                let gk = z[k] + g.centered_difference(phi, i, k);
                s += gk * gk;
            }
            op.a[i] * libm::pow(s, 0.5 * p)
        }) * vol
    };
    let gradient = |phi: &[f64], out: &mut [f64]| {
        let mut w = vec![0.0; len];
        par::fill(&mut w, |i| {
            let mut s = mu2;
            for k in 0..d {
                let gk = z[k] + g.centered_difference(phi, i, k);
                s += gk * gk;
            }
            p * op.a[i] * libm::pow(s, 0.5 * p - 1.0) * vol
        });
        // ∇J = Σ_k D_kᵀ(w (z_k + D_k φ)); the z part is −Σ D_k(w z_k).
        op.apply_weighted(phi, &w, out);
        let mut zpart = vec![0.0; len];
        par::fill(&mut zpart, |i| {
            let mut acc = 0.0;
            for (k, &zk) in z.iter().enumerate() {
                if zk != 0.0 {
                    acc -= zk * g.centered_difference(&w, i, k);
                }
            }
            acc
        });
        par::axpy(1.0, &zpart, out);
    };
    // Hessian scale at φ = 0 for the spectral preconditioner.
    let scale = vol * p * op.mean_a * libm::pow(z_norm2 + mu2, 0.5 * p - 1.0) * p.max(2.0) / 2.0;
    let cap = default_cap(&grid);
    let mut phi = vec![0.0; len];
    let mut grad = vec![0.0; len];
    gradient(&phi, &mut grad);
    let mut dir = vec![0.0; len];
    op.precondition(&grad, scale, &mut dir);
    let mut gnorm = par::dot(&grad, &dir).max(0.0);
    let g0 = libm::sqrt(gnorm);
    let mut value = objective(&phi);
    if g0 == 0.0 {
        return Ok(value);
    }
    let mut step = 1.0;
    let mut trial = vec![0.0; len];
    let mut new_grad = vec![0.0; len];
    let mut diff = vec![0.0; len];
    for it in 0..cap {
        if libm::sqrt(gnorm) <= tol * g0 {
            return Ok(value);
        }
        // Armijo backtracking along −dir, with slack for rounding in J.
        let slack = 1e-14 * value.abs();
        let mut t = step;
        let mut accepted = false;
        for _ in 0..60 {
            par::fill(&mut trial, |i| phi[i] - t * dir[i]);
            let v = objective(&trial);
            if v <= value - 1e-4 * t * gnorm + slack {
                value = v;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NotConverged {
                iterations: it,
                residual: libm::sqrt(gnorm) / g0,
            });
        }
        par::remove_mean(&mut trial);
        gradient(&trial, &mut new_grad);
        // Barzilai–Borwein step in the preconditioner metric, ⟨s, M s⟩ / ⟨s, y⟩.
        par::fill(&mut diff, |i| trial[i] - phi[i]);
        let mut sms = 0.0;
        for k in 0..d {
            sms += par::sum(len, par::CHUNK, |i| {
                let v = g.centered_difference(&diff, i, k);
                v * v
            });
        }
        let sy = par::sum(len, par::CHUNK, |i| diff[i] * (new_grad[i] - grad[i]));
        step = if sy > 0.0 { scale * sms / sy } else { 1.0 };
        core::mem::swap(&mut phi, &mut trial);
        core::mem::swap(&mut grad, &mut new_grad);
        op.precondition(&grad, scale, &mut dir);
        gnorm = par::dot(&grad, &dir).max(0.0);
    }
    Err(Error::NotConverged {
        iterations: cap,
        residual: libm::sqrt(gnorm) / g0,
    })
}

/// A smooth 1-periodic function usable as the oscillating profile of a
/// recovery field.
pub trait PeriodicProfile: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, y: &[f64]) -> f64;
    fn gradient(&self, y: &[f64], out: &mut [f64]);
    /// Bound on every entry of the Hessian.
    fn hessian_bound(&self) -> f64;
    fn sup_norm(&self) -> f64;
}

impl<P: PeriodicProfile + ?Sized> PeriodicProfile for Arc<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, y: &[f64]) -> f64 {
        (**self).value(y)
    }
    fn gradient(&self, y: &[f64], out: &mut [f64]) {
        (**self).gradient(y, out)
    }
    fn hessian_bound(&self) -> f64 {
        (**self).hessian_bound()
    }
    fn sup_norm(&self) -> f64 {
        (**self).sup_norm()
    }
}

/// How grid correctors are turned into functions on the torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Interpolation {
    /// Periodic multilinear interpolation (continuous, piecewise smooth).
    Multilinear,
    /// Cubic B-spline quasi-interpolant (C², reproduces cubics).
    CubicBSpline,
}

/// Periodic interpolant of nodal values.
#[derive(Debug, Clone)]
pub struct GridProfile {
    grid: TorusGrid,
    mode: Interpolation,
    coeffs: Vec<f64>,
    hessian_bound: f64,
    sup: f64,
}

impl GridProfile {
    pub fn new(grid: TorusGrid, values: &[f64], mode: Interpolation) -> Self {
        let coeffs = match mode {
            Interpolation::Multilinear => values.to_vec(),
            Interpolation::CubicBSpline => {
                let mut c = values.to_vec();
                let mut tmp = vec![0.0; c.len()];
                for axis in 0..grid.dim() {
                    par::fill(&mut tmp, |i| {
                        let f = grid.neighbor(i, axis, true);
                        let b = grid.neighbor(i, axis, false);
                        (8.0 * c[i] - c[f] - c[b]) / 6.0
                    });
                    core::mem::swap(&mut c, &mut tmp);
                }
                c
            }
        };
        let n2 = (grid.points_per_axis() * grid.points_per_axis()) as f64;
        let d = grid.dim();
        // Second differences of the coefficients bound the spline Hessian; for
        // the multilinear mode they are a finite-difference measurement.
        let mut hb = 0.0f64;
        for k in 0..d {
            for l in k..d {
                let m = par::map(coeffs.len().div_ceil(par::CHUNK), |chunk| {
                    let start = chunk * par::CHUNK;
                    let end = (start + par::CHUNK).min(coeffs.len());
                    let mut m = 0.0f64;
                    for i in start..end {
                        let v = if k == l {
                            coeffs[grid.neighbor(i, k, true)] - 2.0 * coeffs[i] + coeffs[grid.neighbor(i, k, false)]
                        } else {
                            let ik = grid.neighbor(i, k, true);
                            let il = grid.neighbor(i, l, true);
                            let ikl = grid.neighbor(ik, l, true);
                            coeffs[ikl] - coeffs[ik] - coeffs[il] + coeffs[i]
                        };
                        m = m.max(v.abs());
                    }
                    m
                });
                hb = m.into_iter().fold(hb, f64::max);
            }
        }
        let sup = coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Self {
            grid,
            mode,
            coeffs,
            hessian_bound: hb * n2,
            sup,
        }
    }

    pub fn mode(&self) -> Interpolation {
        self.mode
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    /// Value and gradient at `y` (wrapped into the unit cell).
    fn eval(&self, y: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let d = self.grid.dim();
        let n = self.grid.points_per_axis();
        let nf = n as f64;
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for k in 0..d {
            let u = (y[k] - libm::floor(y[k])) * nf;
            let i = libm::floor(u);
            frac[k] = u - i;
            base[k] = (i as usize) % n;
        }
        match self.mode {
            Interpolation::Multilinear => {
                let mut w = [[0.0; 2]; 3];
                let mut dw = [[0.0; 2]; 3];
                for k in 0..d {
                    w[k] = [1.0 - frac[k], frac[k]];
                    dw[k] = [-nf, nf];
                }
                self.tensor_sum::<2>(d, &base, 0, &w, &dw, grad)
            }
            Interpolation::CubicBSpline => {
                let mut w = [[0.0; 4]; 3];
                let mut dw = [[0.0; 4]; 3];
                for k in 0..d {
                    let f = frac[k];
                    let g = 1.0 - f;
                    w[k] = [
                        g * g * g / 6.0,
                        (3.0 * f * f * f - 6.0 * f * f + 4.0) / 6.0,
                        (-3.0 * f * f * f + 3.0 * f * f + 3.0 * f + 1.0) / 6.0,
                        f * f * f / 6.0,
                    ];
                    dw[k] = [
                        -0.5 * g * g * nf,
                        0.5 * (3.0 * f * f - 4.0 * f) * nf,
                        0.5 * (-3.0 * f * f + 2.0 * f + 1.0) * nf,
                        0.5 * f * f * nf,
                    ];
                }
                self.tensor_sum::<4>(d, &base, n - 1, &w, &dw, grad)
            }
        }
    }

    /// `Σ_j c_{base + j − offset} Π_k w_k[j_k]` over the `W^d` stencil.
    fn tensor_sum<const W: usize>(
        &self,
        d: usize,
        base: &[usize; 3],
        offset: usize,
        w: &[[f64; W]; 3],
        dw: &[[f64; W]; 3],
        grad: Option<&mut [f64]>,
    ) -> f64 {
        let n = self.grid.points_per_axis();
        let mut idx = [[0usize; W]; 3];
        let mut stride = 1;
        for k in 0..d {
            for j in 0..W {
                idx[k][j] = ((base[k] + j + offset) % n) * stride;
            }
            stride *= n;
        }
        let mut value = 0.0;
        let mut g = [0.0; 3];
        let want_grad = grad.is_some();
        let total = W.pow(d as u32);
        for t in 0..total {
            let mut j = [0usize; 3];
            let mut rest = t;
            for jk in j.iter_mut().take(d) {
                *jk = rest % W;
                rest /= W;
            }
            let mut flat = 0;
            for k in 0..d {
                flat += idx[k][j[k]];
            }
            let c = self.coeffs[flat];
            let mut prod = 1.0;
            for k in 0..d {
                prod *= w[k][j[k]];
            }
            value += c * prod;
            if want_grad {
                for (k, gk) in g.iter_mut().enumerate().take(d) {
                    let mut pk = dw[k][j[k]];
                    for l in 0..d {
                        if l != k {
                            pk *= w[l][j[l]];
                        }
                    }
                    *gk += c * pk;
                }
            }
        }
        if let Some(out) = grad {
            out[..d].copy_from_slice(&g[..d]);
        }
        value
    }
}

impl PeriodicProfile for GridProfile {
    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn value(&self, y: &[f64]) -> f64 {
        self.eval(y, None)
    }

    fn gradient(&self, y: &[f64], out: &mut [f64]) {
        self.eval(y, Some(out));
    }

    fn hessian_bound(&self) -> f64 {
        self.hessian_bound
    }

    fn sup_norm(&self) -> f64 {
        self.sup
    }
}

/// Closed-form trigonometric profile `Σ amplitude · Π trig(2π k_i y_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierProfile {
    dim: usize,
    terms: Vec<FourierTerm>,
}

impl FourierProfile {
    pub fn new(dim: usize, terms: Vec<FourierTerm>) -> Result<Self> {
        if dim == 0 || dim > crate::MAX_DIM {
            return Err(invalid("profile dimension must be between 1 and 4"));
        }
        for t in &terms {
            check_dim(dim, t.k.len())?;
            check_dim(dim, t.factors.len())?;
        }
        Ok(Self { dim, terms })
    }

    pub fn terms(&self) -> &[FourierTerm] {
        &self.terms
    }
}

fn trig(f: Trig, x: f64) -> (f64, f64) {
    match f {
        Trig::Cos => (libm::cos(x), -libm::sin(x)),
        Trig::Sin => (libm::sin(x), libm::cos(x)),
    }
}

impl PeriodicProfile for FourierProfile {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, y: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let mut v = t.amplitude;
                for i in 0..self.dim {
                    v *= trig(t.factors[i], 2.0 * PI * t.k[i] as f64 * y[i]).0;
                }
                v
            })
            .sum()
    }

    fn gradient(&self, y: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for o in out.iter_mut().take(d) {
            *o = 0.0;
        }
        let mut vals = [(0.0, 0.0); crate::MAX_DIM];
        for t in &self.terms {
            for i in 0..d {
                vals[i] = trig(t.factors[i], 2.0 * PI * t.k[i] as f64 * y[i]);
            }
            for (k, o) in out.iter_mut().enumerate().take(d) {
                let mut v = t.amplitude * 2.0 * PI * t.k[k] as f64 * vals[k].1;
                for (i, vi) in vals.iter().enumerate().take(d) {
                    if i != k {
                        v *= vi.0;
                    }
                }
                *o += v;
            }
        }
    }

    fn hessian_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let kmax = t.k.iter().map(|k| k.unsigned_abs()).max().unwrap_or(0) as f64;
                t.amplitude.abs() * (2.0 * PI * kmax) * (2.0 * PI * kmax)
            })
            .sum()
    }

    fn sup_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.amplitude.abs()).sum()
    }
}

/// `∫_{(0,1)^d} a(y)|z + ∇φ(y)|² dy` for a continuous profile, by tensor
/// Gauss–Legendre on `cells^d` subcells with `order` nodes per axis.
pub fn profile_cell_energy(
    coeff: &PeriodicCoefficient,
    profile: &dyn PeriodicProfile,
    z: &[f64],
    cells: usize,
    order: usize,
) -> Result<f64> {
    let d = coeff.dim();
    check_dim(d, profile.dim())?;
    check_dim(d, z.len())?;
    let gl = crate::quadrature::GaussLegendre::new(order)?;
    if cells == 0 {
        return Err(invalid("need at least one subcell"));
    }
    let per_axis: Vec<(f64, f64)> = (0..cells)
        .flat_map(|c| {
            let lo = c as f64 / cells as f64;
            let hi = (c + 1) as f64 / cells as f64;
            gl.on(lo, hi).collect::<Vec<_>>()
        })
        .collect();
    let m = per_axis.len();
    let total = m.pow(d as u32);
    Ok(par::sum(total, par::CHUNK, |t| {
        let mut y = [0.0; crate::MAX_DIM];
        let mut w = 1.0;
        let mut rest = t;
        for yk in y.iter_mut().take(d) {
            let (x, wx) = per_axis[rest % m];
            *yk = x;
            w *= wx;
            rest /= m;
        }
        let mut g = [0.0; crate::MAX_DIM];
        profile.gradient(&y[..d], &mut g[..d]);
        let s: f64 = (0..d).map(|k| (z[k] + g[k]) * (z[k] + g[k])).sum();
        w * coeff.evaluate(&y[..d]) * s
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_phase() -> PeriodicCoefficient {
        PeriodicCoefficient::two_phase_layers(1, 1.0, 4.0, 0.05).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(TorusGrid::new(2, 4).is_err());
        assert!(TorusGrid::new(2, 12).is_err());
        assert!(TorusGrid::new(4, 8).is_err());
        let g = TorusGrid::new(2, 8).unwrap();
        assert_eq!(g.len(), 64);
        assert_eq!(g.coords(8 * 3 + 5), [5, 3, 0]);
    }

    #[test]
    fn constant_coefficient_gives_zero_corrector() {
        let c = PeriodicCoefficient::constant(2, 7.0).unwrap();
        let grid = TorusGrid::new(2, 16).unwrap();
        let cor = solve_corrector(&c, &[0.3, -1.2], grid, 1e-10).unwrap();
        assert!(cor.values.iter().all(|v| *v == 0.0));
        let sol = homogenized_matrix(&c, grid, 1e-10).unwrap();
        assert!((sol.a_hom[0][0] - 7.0).abs() < 1e-10 && sol.a_hom[0][1].abs() < 1e-10);
    }

    #[test]
    fn zero_direction_and_bad_tol() {
        let grid = TorusGrid::new(1, 64).unwrap();
        let cor = solve_corrector(&two_phase(), &[0.0], grid, 1e-10).unwrap();
        assert!(cor.values.iter().all(|v| *v == 0.0));
        assert_eq!(cor.energy(&two_phase()).unwrap(), 0.0);
        assert!(solve_corrector(&two_phase(), &[1.0], grid, 0.0).is_err());
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let grid = TorusGrid::new(1, 256).unwrap();
        match solve_corrector_capped(&two_phase(), &[1.0], grid, 1e-12, 1) {
            Err(Error::NotConverged { iterations, residual }) => {
                assert_eq!(iterations, 1);
                assert!(residual > 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn one_dimensional_harmonic_mean() {
        let c = two_phase();
        let grid = TorusGrid::new(1, 1024).unwrap();
        let sol = homogenized_matrix(&c, grid, 1e-10).unwrap();
        let m = 1_000_000;
        let inv: f64 = (0..m).map(|i| 1.0 / c.evaluate(&[(i as f64 + 0.5) / m as f64])).sum::<f64>() / m as f64;
        let harmonic = 1.0 / inv;
        assert!((sol.a_hom[0][0] / harmonic - 1.0).abs() < 5e-3, "{} vs {harmonic}", sol.a_hom[0][0]);
    }

    #[test]
    fn p_version_matches_quadratic_form() {
        let c = PeriodicCoefficient::checkerboard(2, 1.0, 4.0, 0.05).unwrap();
        let grid = TorusGrid::new(2, 32).unwrap();
        let sol = homogenized_matrix(&c, grid, 1e-10).unwrap();
        let z = [0.6, -0.8];
        let q = sol.quadratic_form(&z);
        let p2 = homogenized_density_p(&c, &z, 2.0, grid, 1e-10).unwrap();
        assert!((p2 - q).abs() <= 1e-9 * q, "{p2} vs {q}");
    }

    #[test]
    fn spline_reproduces_smooth_functions() {
        let grid = TorusGrid::new(2, 64).unwrap();
        let f = |y: &[f64]| libm::sin(2.0 * PI * y[0]) * libm::cos(2.0 * PI * y[1]);
        let mut vals = vec![0.0; grid.len()];
        let mut y = [0.0; 2];
        for (i, v) in vals.iter_mut().enumerate() {
            grid.point(i, &mut y);
            *v = f(&y);
        }
        for mode in [Interpolation::Multilinear, Interpolation::CubicBSpline] {
            let prof = GridProfile::new(grid, &vals, mode);
            let tol = if mode == Interpolation::Multilinear { 5e-3 } else { 1e-5 };
            for &p in &[[0.13, 0.71], [0.5, 0.25], [-0.37, 1.9]] {
                assert!((prof.value(&p) - f(&p)).abs() < tol);
            }
            let bound = prof.hessian_bound();
            assert!(bound > 0.9 * 4.0 * PI * PI && bound < 1.1 * 4.0 * PI * PI, "{bound}");
        }
        // nodal values are matched exactly by the multilinear mode
        let prof = GridProfile::new(grid, &vals, Interpolation::Multilinear);
        grid.point(77, &mut y);
        assert!((prof.value(&y) - vals[77]).abs() < 1e-14);
    }

    #[test]
    fn profile_gradient_matches_finite_differences() {
        let fp = FourierProfile::new(
            2,
            vec![
                FourierTerm::new(vec![1, 2], 0.3, vec![Trig::Sin, Trig::Cos]),
                FourierTerm::cosine(vec![0, 1], -0.2),
            ],
        )
        .unwrap();
        let grid = TorusGrid::new(2, 32).unwrap();
        let mut vals = vec![0.0; grid.len()];
        let mut y = [0.0; 2];
        for (i, v) in vals.iter_mut().enumerate() {
            grid.point(i, &mut y);
            *v = fp.value(&y);
        }
        let spline = GridProfile::new(grid, &vals, Interpolation::CubicBSpline);
        let profiles: [&dyn PeriodicProfile; 2] = [&fp, &spline];
        for prof in profiles {
            let x = [0.31, 0.77];
            let mut g = [0.0; 2];
            prof.gradient(&x, &mut g);
            for k in 0..2 {
                let h = 1e-6;
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                let fd = (prof.value(&xp) - prof.value(&xm)) / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-6, "{fd} {}", g[k]);
            }
        }
    }
}
