//! Simplices in `R^d` with barycentric coordinates.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, invalid, Result};
use crate::linalg;

/// A nondegenerate `d`-simplex. Barycentric coordinates are affine:
/// `λ_i(x) = ⟨g_i, x⟩ + c_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Simplex {
    vertices: Vec<Vec<f64>>,
    grads: Vec<Vec<f64>>,
    offsets: Vec<f64>,
    volume: f64,
}

fn factorial(d: usize) -> f64 {
    (1..=d).map(|k| k as f64).product()
}

impl Simplex {
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let d = vertices.len().saturating_sub(1);
        if d == 0 || d > crate::MAX_DIM {
            return Err(invalid("a simplex needs between 2 and 5 vertices"));
        }
        for v in &vertices {
            check_dim(d, v.len())?;
        }
        // Columns v_j − v_0; λ_{1..d}(x) = M⁻¹ (x − v_0).
        let mut m = vec![vec![0.0; d]; d];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = vertices[j + 1][i] - vertices[0][i];
            }
        }
        let volume = linalg::determinant(&m).abs() / factorial(d);
        let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        if !(volume > 1e-14 * libm::pow(scale, d as f64)) {
            return Err(invalid("degenerate simplex"));
        }
        let inv = linalg::inverse(&m)?;
        let mut grads = vec![vec![0.0; d]; d + 1];
        let mut offsets = vec![0.0; d + 1];
        for i in 0..d {
            grads[i + 1] = inv[i].clone();
            offsets[i + 1] = -linalg::dot(&inv[i], &vertices[0]);
        }
        for k in 0..d {
            grads[0][k] = -(1..=d).map(|i| grads[i][k]).sum::<f64>();
        }
        offsets[0] = 1.0 - offsets[1..].iter().sum::<f64>();
        Ok(Self {
            vertices,
            grads,
            offsets,
            volume,
        })
    }

    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Gradients of the barycentric coordinates (one per vertex).
    pub fn barycentric_gradients(&self) -> &[Vec<f64>] {
        &self.grads
    }

    pub fn barycentric(&self, x: &[f64], out: &mut [f64]) {
        for ((o, g), c) in out.iter_mut().zip(&self.grads).zip(&self.offsets) {
            *o = linalg::dot(g, x) + c;
        }
    }

    /// Smallest barycentric coordinate of `x`.
    pub fn min_barycentric(&self, x: &[f64]) -> f64 {
        self.grads
            .iter()
            .zip(&self.offsets)
            .map(|(g, c)| linalg::dot(g, x) + c)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.min_barycentric(x) >= -tol
    }

    /// Euclidean distance from `x` to the complement of the simplex
    /// (zero outside): the distance to the nearest facet plane.
    pub fn distance_to_complement(&self, x: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for (g, c) in self.grads.iter().zip(&self.offsets) {
            let lam = linalg::dot(g, x) + c;
            best = best.min(lam / linalg::norm(g));
        }
        best.max(0.0)
    }

    /// Radius of the inscribed ball, `1 / Σ_i |∇λ_i|`.
    pub fn inradius(&self) -> f64 {
        1.0 / self.grads.iter().map(|g| linalg::norm(g)).sum::<f64>()
    }

    pub fn centroid(&self) -> Vec<f64> {
        let d = self.dim();
        let mut c = vec![0.0; d];
        for v in &self.vertices {
            for (ci, vi) in c.iter_mut().zip(v) {
                *ci += vi / (d + 1) as f64;
            }
        }
        c
    }

    /// Parameters `ρ` with `x + ρν` in the closed simplex, as an interval.
    pub fn ray_interval(&self, x: &[f64], nu: &[f64]) -> Option<(f64, f64)> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for (g, c) in self.grads.iter().zip(&self.offsets) {
            let lam = linalg::dot(g, x) + c;
            let slope = linalg::dot(g, nu);
            if slope > 0.0 {
                lo = lo.max(-lam / slope);
            } else if slope < 0.0 {
                hi = hi.min(-lam / slope);
            } else if lam < 0.0 {
                return None;
            }
        }
        if lo <= hi {
            Some((lo, hi))
        } else {
            None
        }
    }

    /// Regular simplex with unit edge length, centered at the origin.
    pub fn regular(d: usize) -> Result<Self> {
        if d == 0 || d > crate::MAX_DIM {
            return Err(invalid("dimension must be between 1 and 4"));
        }
        // Standard basis vectors of R^{d+1} projected onto the hyperplane
        // Σx = 1, expressed in an orthonormal basis of that hyperplane.
        let n = d + 1;
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
        for k in 0..d {
            let mut v = vec![0.0; n];
            v[k] = 1.0;
            v[k + 1] = -1.0;
            for b in &basis {
                let p = linalg::dot(&v, b);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= p * bi;
                }
            }
            let nv = linalg::norm(&v);
            v.iter_mut().for_each(|x| *x /= nv);
            basis.push(v);
        }
        let inv_sqrt2 = 1.0 / libm::sqrt(2.0);
        let verts = (0..n)
            .map(|i| basis.iter().map(|b| b[i] * inv_sqrt2).collect::<Vec<f64>>())
            .collect::<Vec<_>>();
        let mut s = Self::new(verts)?;
        let c = s.centroid();
        for v in s.vertices.iter_mut() {
            for (vi, ci) in v.iter_mut().zip(&c) {
                *vi -= ci;
            }
        }
        Self::new(s.vertices)
    }
}
