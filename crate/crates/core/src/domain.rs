//! Bounded domains: axis-aligned boxes and unions of simplices.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{check_dim, invalid, Result};
use crate::geometry::Simplex;

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Simplices with pairwise-disjoint interiors.
    Polytope(Vec<Simplex>),
}

impl Domain {
    pub fn cube(d: usize) -> Self {
        Domain::Box {
            lo: vec![0.0; d],
            hi: vec![1.0; d],
        }
    }

    pub fn new_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.is_empty() || lo.len() > crate::MAX_DIM {
            return Err(invalid("box dimension must be between 1 and 4"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(b > a) || !a.is_finite() || !b.is_finite()) {
            return Err(invalid("box needs hi > lo on every axis"));
        }
        Ok(Domain::Box { lo, hi })
    }

    pub fn polytope(simplices: Vec<Simplex>) -> Result<Self> {
        let first = simplices.first().ok_or_else(|| invalid("polytope needs at least one simplex"))?;
        let d = first.dim();
        for s in &simplices {
            check_dim(d, s.dim())?;
        }
        Ok(Domain::Polytope(simplices))
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lo, .. } => lo.len(),
            Domain::Polytope(s) => s[0].dim(),
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Domain::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| b - a).product(),
            Domain::Polytope(s) => s.iter().map(Simplex::volume).sum(),
        }
    }

    /// Smallest axis-aligned box containing the domain.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Box { lo, hi } => (lo.clone(), hi.clone()),
            Domain::Polytope(s) => {
                let d = self.dim();
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for v in s.iter().flat_map(|s| s.vertices()) {
                    for k in 0..d {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                }
                (lo, hi)
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Box { lo, hi } => libm::sqrt(lo.iter().zip(hi).map(|(a, b)| (b - a) * (b - a)).sum()),
            Domain::Polytope(s) => {
                let verts: Vec<&Vec<f64>> = s.iter().flat_map(|s| s.vertices()).collect();
                let mut best = 0.0f64;
                for (i, a) in verts.iter().enumerate() {
                    for b in &verts[i + 1..] {
                        let d2: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
                        best = best.max(d2);
                    }
                }
                libm::sqrt(best)
            }
        }
    }

    /// Membership in the closed domain, up to `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            Domain::Box { lo, hi } => x.iter().zip(lo).zip(hi).all(|((v, a), b)| *v >= a - tol && *v <= b + tol),
            Domain::Polytope(s) => s.iter().any(|s| s.contains(x, tol)),
        }
    }

    /// The set `{ρ ≥ 0 : x + ρν ∈ closure(Ω)}` as sorted disjoint intervals.
    pub fn ray_intervals(&self, x: &[f64], nu: &[f64], out: &mut Vec<(f64, f64)>) {
        out.clear();
        match self {
            Domain::Box { lo, hi } => {
                let mut a = 0.0f64;
                let mut b = f64::INFINITY;
                for k in 0..x.len() {
                    if nu[k] > 0.0 {
                        a = a.max((lo[k] - x[k]) / nu[k]);
                        b = b.min((hi[k] - x[k]) / nu[k]);
                    } else if nu[k] < 0.0 {
                        a = a.max((hi[k] - x[k]) / nu[k]);
                        b = b.min((lo[k] - x[k]) / nu[k]);
                    } else if x[k] < lo[k] || x[k] > hi[k] {
                        return;
                    }
                }
                if a < b {
                    out.push((a, b));
                }
            }
            Domain::Polytope(s) => {
                for simplex in s {
                    if let Some((a, b)) = simplex.ray_interval(x, nu) {
                        let a = a.max(0.0);
                        if a < b {
                            out.push((a, b));
                        }
                    }
                }
                out.sort_by(|p, q| p.0.total_cmp(&q.0));
                // Merge intervals that touch (shared faces) up to rounding.
                let mut merged: Vec<(f64, f64)> = Vec::with_capacity(out.len());
                for &(a, b) in out.iter() {
                    if let Some(last) = merged.last_mut() {
                        if a <= last.1 + 1e-12 * (1.0 + last.1.abs()) {
                            last.1 = last.1.max(b);
                            continue;
                        }
                    }
                    merged.push((a, b));
                }
                *out = merged;
            }
        }
    }

    /// Uniform sample from the domain.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Domain::Box { lo, hi } => {
                for ((o, a), b) in out.iter_mut().zip(lo).zip(hi) {
                    let u: f64 = rng.random();
                    *o = a + (b - a) * u;
                }
            }
            Domain::Polytope(s) => {
                let total = self.volume();
                let mut pick = rng.random::<f64>() * total;
                let mut chosen = &s[s.len() - 1];
                for simplex in s {
                    if pick < simplex.volume() {
                        chosen = simplex;
                        break;
                    }
                    pick -= simplex.volume();
                }
                // Uniform barycentric weights from sorted uniforms.
                let d = self.dim();
                let mut u: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
                u.sort_by(f64::total_cmp);
                let mut prev = 0.0;
                out.iter_mut().for_each(|o| *o = 0.0);
                for (j, v) in chosen.vertices().iter().enumerate() {
                    let next = if j < d { u[j] } else { 1.0 };
                    let w = next - prev;
                    prev = next;
                    for (o, vk) in out.iter_mut().zip(v) {
                        *o += w * vk;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_rays() {
        let d = Domain::cube(2);
        let mut iv = Vec::new();
        d.ray_intervals(&[0.25, 0.5], &[1.0, 0.0], &mut iv);
        assert_eq!(iv, vec![(0.0, 0.75)]);
        let s = 1.0 / libm::sqrt(2.0);
        d.ray_intervals(&[0.25, 0.5], &[-s, -s], &mut iv);
        assert_eq!(iv.len(), 1);
        assert!((iv[0].1 - 0.25 / s).abs() < 1e-15);
        assert!((d.diameter() - libm::sqrt(2.0)).abs() < 1e-15);
    }

    #[test]
    fn split_square_matches_box() {
        let t1 = Simplex::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let t2 = Simplex::new(vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let p = Domain::polytope(vec![t1, t2]).unwrap();
        assert!((p.volume() - 1.0).abs() < 1e-15);
        let b = Domain::cube(2);
        let mut a = Vec::new();
        let mut c = Vec::new();
        for &(x, y, nx, ny) in &[(0.3, 0.6, 0.6, -0.8), (0.9, 0.1, -1.0, 0.0), (0.5, 0.5, 0.0, 1.0)] {
            p.ray_intervals(&[x, y], &[nx, ny], &mut a);
            b.ray_intervals(&[x, y], &[nx, ny], &mut c);
            assert_eq!(a.len(), 1);
            assert!((a[0].0 - c[0].0).abs() < 1e-12 && (a[0].1 - c[0].1).abs() < 1e-12);
        }
    }

    #[test]
    fn nonconvex_polytope_rays() {
        // L-shape from two triangles touching only at one vertex line.
        let t1 = Simplex::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let t2 = Simplex::new(vec![vec![2.0, 0.0], vec![3.0, 0.0], vec![2.0, 1.0]]).unwrap();
        let p = Domain::polytope(vec![t1, t2]).unwrap();
        let mut iv = Vec::new();
        p.ray_intervals(&[0.1, 0.1], &[1.0, 0.0], &mut iv);
        assert_eq!(iv.len(), 2);
        assert!((iv[0].1 - 0.8).abs() < 1e-12 && (iv[1].0 - 1.9).abs() < 1e-12);
    }
}
