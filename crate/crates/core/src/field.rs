//! Scalar fields `u : Ω → R`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::domain::Domain;
use crate::error::{check_dim, invalid, Result};
use crate::quadrature::GaussLegendre;

/// An evaluable function on a bounded domain. Implementations are immutable
/// and may be evaluated from many threads.
pub trait ScalarField: Send + Sync {
    fn domain(&self) -> &Domain;

    fn dim(&self) -> usize {
        self.domain().dim()
    }

    fn value(&self, x: &[f64]) -> f64;

    /// Gradient; the default is a centered difference with step
    /// `1e-6 · diam(Ω)`.
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let h = 1e-6 * self.domain().diameter();
        let mut p = [0.0; crate::MAX_DIM];
        let d = self.dim();
        p[..d].copy_from_slice(&x[..d]);
        for k in 0..d {
            p[k] = x[k] + h;
            let fp = self.value(&p[..d]);
            p[k] = x[k] - h;
            let fm = self.value(&p[..d]);
            p[k] = x[k];
            out[k] = (fp - fm) / (2.0 * h);
        }
    }

    /// Sampling step of grid-based fields; `None` for closed-form fields.
    fn grid_spacing(&self) -> Option<f64> {
        None
    }
}

impl<F: ScalarField + ?Sized> ScalarField for Arc<F> {
    fn domain(&self) -> &Domain {
        (**self).domain()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (**self).gradient(x, out)
    }
    fn grid_spacing(&self) -> Option<f64> {
        (**self).grid_spacing()
    }
}

impl<F: ScalarField + ?Sized> ScalarField for &F {
    fn domain(&self) -> &Domain {
        (**self).domain()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (**self).gradient(x, out)
    }
    fn grid_spacing(&self) -> Option<f64> {
        (**self).grid_spacing()
    }
}

/// `u(x) = ⟨z, x⟩ + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineField {
    domain: Domain,
    z: Vec<f64>,
    offset: f64,
}

impl AffineField {
    pub fn new(domain: Domain, z: Vec<f64>, offset: f64) -> Result<Self> {
        check_dim(domain.dim(), z.len())?;
        Ok(Self { domain, z, offset })
    }

    pub fn constant(domain: Domain, c: f64) -> Self {
        let d = domain.dim();
        Self {
            domain,
            z: vec![0.0; d],
            offset: c,
        }
    }

    pub fn slope(&self) -> &[f64] {
        &self.z
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }
}

impl ScalarField for AffineField {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn value(&self, x: &[f64]) -> f64 {
        crate::linalg::dot(&self.z, x) + self.offset
    }

    fn gradient(&self, _x: &[f64], out: &mut [f64]) {
        out[..self.z.len()].copy_from_slice(&self.z);
    }
}

/// A closed-form field given by a value closure and a gradient closure.
pub struct FnField<V, G> {
    domain: Domain,
    value: V,
    gradient: G,
}

impl<V, G> FnField<V, G>
where
    V: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(domain: Domain, value: V, gradient: G) -> Self {
        Self { domain, value, gradient }
    }
}

impl<V, G> ScalarField for FnField<V, G>
where
    V: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (self.gradient)(x, out)
    }
}

/// Nodal values on a regular grid over a box, multilinearly interpolated.
/// Node `(i_0, …, i_{d-1})` sits at `lo + i ⊙ (hi − lo)/(nodes − 1)`; axis 0
/// varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    domain: Domain,
    lo: Vec<f64>,
    hi: Vec<f64>,
    nodes: Vec<usize>,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(domain: Domain, nodes: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let (lo, hi) = match &domain {
            Domain::Box { lo, hi } => (lo.clone(), hi.clone()),
            Domain::Polytope(_) => return Err(invalid("grid fields live on boxes")),
        };
        check_dim(lo.len(), nodes.len())?;
        if nodes.iter().any(|&n| n < 2) {
            return Err(invalid("grid fields need at least two nodes per axis"));
        }
        check_dim(nodes.iter().product(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("grid values must be finite"));
        }
        Ok(Self {
            domain,
            lo,
            hi,
            nodes,
            values,
        })
    }

    /// Samples `f` at the grid nodes.
    pub fn from_fn(domain: Domain, nodes: Vec<usize>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let (lo, hi) = domain.bounding_box();
        check_dim(lo.len(), nodes.len())?;
        let total: usize = nodes.iter().product();
        let d = lo.len();
        let mut x = vec![0.0; d];
        let values = (0..total)
            .map(|idx| {
                let mut rest = idx;
                for k in 0..d {
                    let i = rest % nodes[k];
                    rest /= nodes[k];
                    x[k] = lo[k] + (hi[k] - lo[k]) * i as f64 / (nodes[k] - 1).max(1) as f64;
                }
                f(&x)
            })
            .collect();
        Self::new(domain, nodes, values)
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node_point(&self, idx: usize, out: &mut [f64]) {
        let mut rest = idx;
        for k in 0..self.lo.len() {
            let i = rest % self.nodes[k];
            rest /= self.nodes[k];
            out[k] = self.lo[k] + (self.hi[k] - self.lo[k]) * i as f64 / (self.nodes[k] - 1) as f64;
        }
    }

    fn locate(&self, x: &[f64], cell: &mut [usize], frac: &mut [f64]) {
        for k in 0..self.lo.len() {
            let cells = self.nodes[k] - 1;
            let u = (x[k] - self.lo[k]) / (self.hi[k] - self.lo[k]) * cells as f64;
            let u = u.clamp(0.0, cells as f64);
            let i = (libm::floor(u) as usize).min(cells - 1);
            cell[k] = i;
            frac[k] = u - i as f64;
        }
    }

    /// Exact `∫_Ω u²` of the multilinear interpolant.
    pub fn l2_norm_sq(&self) -> f64 {
        let d = self.lo.len();
        let gl = GaussLegendre::new(2).expect("two-point rule");
        let cells: Vec<usize> = self.nodes.iter().map(|n| n - 1).collect();
        let total: usize = cells.iter().product();
        let h: Vec<f64> = (0..d).map(|k| (self.hi[k] - self.lo[k]) / cells[k] as f64).collect();
        let unit: Vec<(f64, f64)> = gl.on(0.0, 1.0).collect();
        let cell_volume: f64 = h.iter().product();
        crate::par::sum(total, 64, |c| {
            let mut rest = c;
            let mut base = [0.0; crate::MAX_DIM];
            for k in 0..d {
                let i = rest % cells[k];
                rest /= cells[k];
                base[k] = self.lo[k] + i as f64 * h[k];
            }
            let mut acc = 0.0;
            for q in 0..2usize.pow(d as u32) {
                let mut x = [0.0; crate::MAX_DIM];
                let mut w = cell_volume;
                for k in 0..d {
                    let (t, wt) = unit[(q >> k) & 1];
                    x[k] = base[k] + t * h[k];
                    w *= wt;
                }
                let v = self.value(&x[..d]);
                acc += w * v * v;
            }
            acc
        })
    }
}

impl ScalarField for GridField {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn value(&self, x: &[f64]) -> f64 {
        let d = self.lo.len();
        let mut cell = [0usize; crate::MAX_DIM];
        let mut frac = [0.0; crate::MAX_DIM];
        self.locate(x, &mut cell[..d], &mut frac[..d]);
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = 0;
            let mut stride = 1;
            for k in 0..d {
                let bit = (corner >> k) & 1;
                w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
                idx += (cell[k] + bit) * stride;
                stride *= self.nodes[k];
            }
            if w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        acc
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let d = self.lo.len();
        let mut cell = [0usize; crate::MAX_DIM];
        let mut frac = [0.0; crate::MAX_DIM];
        self.locate(x, &mut cell[..d], &mut frac[..d]);
        for (k, o) in out.iter_mut().enumerate().take(d) {
            let scale = (self.nodes[k] - 1) as f64 / (self.hi[k] - self.lo[k]);
            let mut acc = 0.0;
            for corner in 0..(1usize << d) {
                let mut w = 1.0;
                let mut idx = 0;
                let mut stride = 1;
                for l in 0..d {
                    let bit = (corner >> l) & 1;
                    w *= if l == k {
                        if bit == 1 {
                            scale
                        } else {
                            -scale
                        }
                    } else if bit == 1 {
                        frac[l]
                    } else {
                        1.0 - frac[l]
                    };
                    idx += (cell[l] + bit) * stride;
                    stride *= self.nodes[l];
                }
                acc += w * self.values[idx];
            }
            *o = acc;
        }
    }

    fn grid_spacing(&self) -> Option<f64> {
        (0..self.lo.len())
            .map(|k| (self.hi[k] - self.lo[k]) / (self.nodes[k] - 1) as f64)
            .reduce(f64::max)
    }
}

/// Pointwise clamp `(u ∧ M) ∨ −M`.
pub struct Truncated<F> {
    inner: F,
    level: f64,
}

impl<F: ScalarField> Truncated<F> {
    pub fn new(inner: F, level: f64) -> Result<Self> {
        if !(level > 0.0) {
            return Err(invalid("truncation level must be positive"));
        }
        Ok(Self { inner, level })
    }

    pub fn level(&self) -> f64 {
        self.level
    }
}

impl<F: ScalarField> ScalarField for Truncated<F> {
    fn domain(&self) -> &Domain {
        self.inner.domain()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(x).clamp(-self.level, self.level)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let v = self.inner.value(x);
        if v.abs() < self.level {
            self.inner.gradient(x, out);
        } else {
            out[..self.dim()].iter_mut().for_each(|o| *o = 0.0);
        }
    }

    fn grid_spacing(&self) -> Option<f64> {
        self.inner.grid_spacing()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_field_interpolates_multilinear_exactly() {
        let dom = Domain::new_box(vec![0.0, -1.0], vec![2.0, 1.0]).unwrap();
        let f = |x: &[f64]| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1];
        let g = GridField::from_fn(dom, vec![5, 9], f).unwrap();
        for p in [[0.3, 0.2], [1.99, -0.99], [1.0, 0.0]] {
            assert!((g.value(&p) - f(&p)).abs() < 1e-14);
            let mut gr = [0.0; 2];
            g.gradient(&p, &mut gr);
            assert!((gr[0] - (2.0 + 0.5 * p[1])).abs() < 1e-12);
            assert!((gr[1] - (-1.0 + 0.5 * p[0])).abs() < 1e-12);
        }
        assert_eq!(g.grid_spacing(), Some(0.5));
    }

    #[test]
    fn l2_norm_is_exact() {
        let dom = Domain::cube(2);
        let g = GridField::from_fn(dom, vec![3, 3], |x| x[0] * x[1]).unwrap();
        // interpolant equals x*y exactly (bilinear), ∫ x²y² = 1/9
        assert!((g.l2_norm_sq() - 1.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn truncation_clamps() {
        let dom = Domain::cube(1);
        let u = AffineField::new(dom, vec![1.0], 0.0).unwrap();
        let t = Truncated::new(&u, 0.5).unwrap();
        assert_eq!(t.value(&[0.3]), 0.3);
        assert_eq!(t.value(&[0.8]), 0.5);
        assert!(Truncated::new(&u, 0.0).is_err());
    }
}
