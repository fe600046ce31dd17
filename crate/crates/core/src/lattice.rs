//! Orthonormal frames, rotated cube lattices, Kuhn simplices and the
//! cube-average piecewise-affine interpolants built on them.
//!
//! A frame `ν̄ = (ν_1, …, ν_d)` and a cell size `c = rρ` define the lattice
//! points `c Σ k_i ν_i`, `k ∈ Z^d`, and cubes `c(k + [0,1]^d)` in frame
//! coordinates. Inside a cube the Kuhn simplex of a permutation `τ` is the
//! set where the local coordinates satisfy `f_{τ(1)} ≥ … ≥ f_{τ(d)}`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::coefficient::PeriodicCoefficient;
use crate::domain::Domain;
use crate::error::{check_dim, invalid, Error, Result};
use crate::field::ScalarField;
use crate::geometry::Simplex;
use crate::quadrature::{simplex_rule, GaussLegendre};
use crate::{linalg, par, rng};

/// Relative clearance used for strict containment of lattice cubes.
pub const MARGIN: f64 = 1e-12;
/// Gauss–Legendre points per axis for cube averages.
pub const AVERAGE_ORDER: usize = 4;
/// Smallest `ρ` drawn by the averaged interpolant.
pub const MIN_RHO: f64 = 1e-9;

/// Dimension `d(d−1)/2` of the manifold of orthonormal frames.
pub fn frame_dimension(d: usize) -> usize {
    d * d.saturating_sub(1) / 2
}

/// `d` orthonormal vectors of `R^d` (stored as rows).
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalFrame {
    vectors: Vec<Vec<f64>>,
}

impl OrthonormalFrame {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let d = vectors.len();
        if d == 0 || d > crate::MAX_DIM {
            return Err(invalid("frame dimension must be between 1 and 4"));
        }
        for v in &vectors {
            check_dim(d, v.len())?;
        }
        for i in 0..d {
            for j in 0..d {
                let g = linalg::dot(&vectors[i], &vectors[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                if (g - want).abs() > 1e-12 {
                    return Err(invalid("frame vectors are not orthonormal"));
                }
            }
        }
        Ok(Self { vectors })
    }

    pub fn standard(d: usize) -> Self {
        let vectors = (0..d)
            .map(|i| {
                let mut e = vec![0.0; d];
                e[i] = 1.0;
                e
            })
            .collect();
        Self { vectors }
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// Frame coordinates `⟨x, ν_i⟩`.
    pub fn to_local(&self, x: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(&self.vectors) {
            *o = linalg::dot(v, x);
        }
    }

    /// `Σ c_i ν_i`.
    pub fn to_global(&self, c: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (ci, v) in c.iter().zip(&self.vectors) {
            for (o, vk) in out.iter_mut().zip(v) {
                *o += ci * vk;
            }
        }
    }
}

/// Haar-distributed frame: Gram–Schmidt on a Gaussian matrix with the
/// positive-diagonal convention for the triangular factor. Draws whose
/// triangular factor has condition number above `1e12` are redrawn.
pub fn sample_frame<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Result<OrthonormalFrame> {
    if d == 0 || d > crate::MAX_DIM {
        return Err(invalid("frame dimension must be between 1 and 4"));
    }
    loop {
        let cols: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| rng::standard_normal(rng)).collect()).collect();
        let mut q: Vec<Vec<f64>> = Vec::with_capacity(d);
        let mut diag = Vec::with_capacity(d);
        for col in &cols {
            let mut v = col.clone();
            // Two Gram–Schmidt passes for orthogonality to rounding level.
            for _ in 0..2 {
                for b in &q {
                    let p = linalg::dot(&v, b);
                    for (vi, bi) in v.iter_mut().zip(b) {
                        *vi -= p * bi;
                    }
                }
            }
            let n = linalg::norm(&v);
            diag.push(n);
            if n > 0.0 {
                v.iter_mut().for_each(|x| *x /= n);
            }
            q.push(v);
        }
        let max = diag.iter().copied().fold(0.0f64, f64::max);
        let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
        if min > 0.0 && max / min <= 1e12 {
            return OrthonormalFrame::new(q);
        }
    }
}

/// All permutations of `0..d` in lexicographic order.
pub fn permutations(d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..d).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (0..d.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            break;
        };
        let j = (i + 1..d).rev().find(|&j| cur[j] > cur[i]).unwrap_or(i + 1);
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
    out
}

/// One simplex of Kuhn's decomposition of `anchor + ρ[0,1]^d` (frame coordinates).
#[derive(Debug, Clone, PartialEq)]
pub struct KuhnSimplex {
    /// `τ` as a permutation of `0..d`.
    pub permutation: Vec<usize>,
    pub scale: f64,
    pub anchor: Vec<f64>,
    /// `Δ^{τ,0} = anchor`, `Δ^{τ,j} = Δ^{τ,j−1} + ρ ν_{τ(j)}`.
    pub vertices: Vec<Vec<f64>>,
}

impl KuhnSimplex {
    pub fn new(permutation: Vec<usize>, scale: f64, frame: &OrthonormalFrame, anchor: Vec<f64>) -> Result<Self> {
        let d = frame.dim();
        check_dim(d, permutation.len())?;
        check_dim(d, anchor.len())?;
        if !(scale > 0.0) {
            return Err(invalid("Kuhn simplex scale must be positive"));
        }
        let mut vertices = Vec::with_capacity(d + 1);
        let mut v = anchor.clone();
        vertices.push(v.clone());
        for &t in &permutation {
            for (vk, nk) in v.iter_mut().zip(&frame.vectors()[t]) {
                *vk += scale * nk;
            }
            vertices.push(v.clone());
        }
        Ok(Self {
            permutation,
            scale,
            anchor,
            vertices,
        })
    }

    pub fn volume(&self) -> f64 {
        let d = self.anchor.len();
        let m: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| self.vertices[j + 1][i] - self.vertices[0][i]).collect())
            .collect();
        linalg::determinant(&m).abs() / (1..=d).map(|k| k as f64).product::<f64>()
    }

    pub fn to_simplex(&self) -> Result<Simplex> {
        Simplex::new(self.vertices.clone())
    }
}

/// The `d!` Kuhn simplices of the cube `anchor + ρ Q_ν̄`.
pub fn kuhn_decompose(rho: f64, frame: &OrthonormalFrame, anchor: &[f64]) -> Result<Vec<KuhnSimplex>> {
    if !(rho > 0.0) {
        return Err(invalid("rho must be positive"));
    }
    permutations(frame.dim())
        .into_iter()
        .map(|p| KuhnSimplex::new(p, rho, frame, anchor.to_vec()))
        .collect()
}

/// Rotated lattice of cubes of side `c = rρ` tested against a domain.
#[derive(Debug, Clone)]
pub struct CubeLattice<'a> {
    domain: &'a Domain,
    frame: OrthonormalFrame,
    cell: f64,
}

impl<'a> CubeLattice<'a> {
    pub fn new(domain: &'a Domain, r: f64, rho: f64, frame: OrthonormalFrame) -> Result<Self> {
        check_dim(domain.dim(), frame.dim())?;
        if !(r > 0.0) || !(rho > 0.0) {
            return Err(invalid("r and rho must be positive"));
        }
        Ok(Self {
            domain,
            frame,
            cell: r * rho,
        })
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }

    pub fn frame(&self) -> &OrthonormalFrame {
        &self.frame
    }

    /// Global position of the lattice point with (possibly fractional) index `k`.
    pub fn position(&self, k: &[f64], out: &mut [f64]) {
        let scaled: Vec<f64> = k.iter().map(|v| v * self.cell).collect();
        self.frame.to_global(&scaled, out);
    }

    fn point_inside(&self, k: &[f64]) -> bool {
        let d = k.len();
        let mut x = [0.0; crate::MAX_DIM];
        self.position(k, &mut x[..d]);
        let m = MARGIN * self.cell;
        match self.domain {
            Domain::Box { lo, hi } => x[..d].iter().zip(lo).zip(hi).all(|((v, a), b)| *v >= a + m && *v <= b - m),
            Domain::Polytope(s) => s.iter().any(|s| s.distance_to_complement(&x[..d]) >= m),
        }
    }

    /// Whether the closed cube `c(k + [0,1]^d)` lies inside the domain with
    /// clearance `MARGIN · c`, judged at its `2^d` corners.
    pub fn contains_cell(&self, k: &[i64]) -> bool {
        let d = k.len();
        let mut p = [0.0; crate::MAX_DIM];
        (0..1usize << d).all(|b| {
            for i in 0..d {
                p[i] = (k[i] + ((b >> i) & 1) as i64) as f64;
            }
            self.point_inside(&p[..d])
        })
    }

    /// Whether all `2^d` lattice cells `k + b`, `b ∈ {0,1}^d`, are admitted,
    /// i.e. `k` indexes a cube of the coarse lattice.
    pub fn is_coarse(&self, k: &[i64]) -> bool {
        let d = k.len();
        let mut p = [0.0; crate::MAX_DIM];
        let total = 3usize.pow(d as u32);
        (0..total).all(|t| {
            let mut rest = t;
            for i in 0..d {
                p[i] = (k[i] + (rest % 3) as i64) as f64;
                rest /= 3;
            }
            self.point_inside(&p[..d])
        })
    }

    /// Index range covering the domain's bounding box, per frame axis.
    fn index_range(&self) -> Vec<(i64, i64)> {
        let d = self.frame.dim();
        let (lo, hi) = self.domain.bounding_box();
        let mut mins = vec![f64::INFINITY; d];
        let mut maxs = vec![f64::NEG_INFINITY; d];
        let mut corner = vec![0.0; d];
        let mut local = vec![0.0; d];
        for b in 0..1usize << d {
            for i in 0..d {
                corner[i] = if (b >> i) & 1 == 1 { hi[i] } else { lo[i] };
            }
            self.frame.to_local(&corner, &mut local);
            for i in 0..d {
                mins[i] = mins[i].min(local[i] / self.cell);
                maxs[i] = maxs[i].max(local[i] / self.cell);
            }
        }
        (0..d)
            .map(|i| (libm::floor(mins[i]) as i64 - 1, libm::ceil(maxs[i]) as i64 + 1))
            .collect()
    }

    /// All admitted cell indices, in lexicographic order (axis 0 slowest).
    pub fn cells(&self) -> Vec<Vec<i64>> {
        let ranges = self.index_range();
        let d = ranges.len();
        let counts: Vec<i64> = ranges.iter().map(|(a, b)| b - a + 1).collect();
        let total: i64 = counts.iter().product();
        let mut out = Vec::new();
        let mut k = vec![0i64; d];
        for t in 0..total {
            let mut rest = t;
            for i in (0..d).rev() {
                k[i] = ranges[i].0 + rest % counts[i];
                rest /= counts[i];
            }
            if self.contains_cell(&k) {
                out.push(k.clone());
            }
        }
        out
    }

    /// Average of `u` over the cube `c(k + [0,1]^d)` by tensor Gauss–Legendre.
    pub fn cube_average(&self, u: &dyn ScalarField, k: &[i64], rule: &[(f64, f64)]) -> f64 {
        let d = k.len();
        let m = rule.len();
        let mut acc = 0.0;
        let mut local = [0.0; crate::MAX_DIM];
        let mut x = [0.0; crate::MAX_DIM];
        for t in 0..m.pow(d as u32) {
            let mut rest = t;
            let mut w = 1.0;
            for i in 0..d {
                let (xi, wi) = rule[rest % m];
                rest /= m;
                local[i] = (k[i] as f64 + xi) * self.cell;
                w *= wi;
            }
            self.frame.to_global(&local[..d], &mut x[..d]);
            acc += w * u.value(&x[..d]);
        }
        acc
    }

    /// Cube index and local coordinates in `[0,1)^d` of a global point.
    pub fn locate(&self, x: &[f64], k: &mut [i64], frac: &mut [f64]) {
        let d = k.len();
        let mut local = [0.0; crate::MAX_DIM];
        self.frame.to_local(x, &mut local[..d]);
        for i in 0..d {
            let u = local[i] / self.cell;
            let f = libm::floor(u);
            k[i] = f as i64;
            frac[i] = u - f;
        }
    }
}

/// Result of [`lattice_cells`]; `empty` flags an empty index set.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeCells {
    pub indices: Vec<Vec<i64>>,
    pub empty: bool,
}

/// Indices `k` whose cube `rk + rQ_{ρν̄}` is compactly contained in the domain.
pub fn lattice_cells(domain: &Domain, r: f64, rho: f64, frame: &OrthonormalFrame) -> Result<LatticeCells> {
    let lattice = CubeLattice::new(domain, r, rho, frame.clone())?;
    let indices = lattice.cells();
    let empty = indices.is_empty();
    Ok(LatticeCells { indices, empty })
}

fn average_rule() -> Vec<(f64, f64)> {
    GaussLegendre::new(AVERAGE_ORDER)
        .expect("fixed order")
        .on(0.0, 1.0)
        .collect()
}

/// Order of the local coordinates, largest first: the Kuhn permutation of
/// the simplex containing the point.
fn kuhn_order(frac: &[f64]) -> [usize; crate::MAX_DIM] {
    let d = frac.len();
    let mut tau = [0, 1, 2, 3];
    tau[..d].sort_by(|&a, &b| frac[b].total_cmp(&frac[a]).then(a.cmp(&b)));
    tau
}

/// Affine function on one Kuhn simplex of a coarse cube.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePiece {
    pub cube: Vec<i64>,
    pub permutation: Vec<usize>,
    pub gradient: Vec<f64>,
    /// Value at the cube anchor.
    pub anchor_value: f64,
}

/// Continuous piecewise-affine interpolant of cube averages.
#[derive(Debug, Clone)]
pub struct AffineInterpolant {
    frame: OrthonormalFrame,
    r: f64,
    rho: f64,
    nodes: BTreeMap<Vec<i64>, f64>,
    coarse: BTreeSet<Vec<i64>>,
}

impl AffineInterpolant {
    pub fn frame(&self) -> &OrthonormalFrame {
        &self.frame
    }

    pub fn cell(&self) -> f64 {
        self.r * self.rho
    }

    pub fn scales(&self) -> (f64, f64) {
        (self.r, self.rho)
    }

    pub fn node_value(&self, k: &[i64]) -> Option<f64> {
        self.nodes.get(k).copied()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&Vec<i64>, &f64)> {
        self.nodes.iter()
    }

    pub fn coarse_cubes(&self) -> impl Iterator<Item = &Vec<i64>> {
        self.coarse.iter()
    }

    /// Total volume of the coarse cubes.
    pub fn covered_volume(&self) -> f64 {
        self.coarse.len() as f64 * libm::pow(self.cell(), self.frame.dim() as f64)
    }

    /// Value at `x`, or `None` outside the union of coarse cubes.
    pub fn evaluate(&self, x: &[f64]) -> Option<f64> {
        let d = self.frame.dim();
        let c = self.cell();
        let mut local = [0.0; crate::MAX_DIM];
        self.frame.to_local(x, &mut local[..d]);
        let mut k = [0i64; crate::MAX_DIM];
        let mut frac = [0.0; crate::MAX_DIM];
        for i in 0..d {
            let u = local[i] / c;
            let f = libm::floor(u);
            k[i] = f as i64;
            frac[i] = u - f;
        }
        if !self.coarse.contains(&k[..d]) {
            return None;
        }
        interpolate(&k[..d], &frac[..d], |idx| self.nodes.get(idx).copied())
    }

    /// Every affine piece, cube by cube.
    pub fn pieces(&self) -> Vec<AffinePiece> {
        let d = self.frame.dim();
        let c = self.cell();
        let mut out = Vec::with_capacity(self.coarse.len() * permutations(d).len());
        for k in &self.coarse {
            for tau in permutations(d) {
                let values = simplex_values(k, &tau, |idx| self.nodes.get(idx).copied()).expect("coarse nodes exist");
                let mut gradient = vec![0.0; d];
                for j in 0..d {
                    let slope = (values[j + 1] - values[j]) / c;
                    for (g, nk) in gradient.iter_mut().zip(&self.frame.vectors()[tau[j]]) {
                        *g += slope * nk;
                    }
                }
                out.push(AffinePiece {
                    cube: k.clone(),
                    permutation: tau,
                    gradient,
                    anchor_value: values[0],
                });
            }
        }
        out
    }
}

/// Values at the Kuhn vertices `k, k + e_{τ(1)}, …` of one simplex.
fn simplex_values(k: &[i64], tau: &[usize], node: impl Fn(&[i64]) -> Option<f64>) -> Option<Vec<f64>> {
    let mut idx = k.to_vec();
    let mut values = Vec::with_capacity(tau.len() + 1);
    values.push(node(&idx)?);
    for &t in tau {
        idx[t] += 1;
        values.push(node(&idx)?);
    }
    Some(values)
}

fn interpolate(k: &[i64], frac: &[f64], node: impl Fn(&[i64]) -> Option<f64>) -> Option<f64> {
    let d = k.len();
    let tau = kuhn_order(frac);
    let values = simplex_values(k, &tau[..d], node)?;
    let mut v = values[0];
    for j in 0..d {
        v += (values[j + 1] - values[j]) * frac[tau[j]];
    }
    Some(v)
}

/// Cube averages on the admitted cells, Kuhn-affine on the coarse cubes.
pub fn cube_average_interpolant(
    u: &dyn ScalarField,
    r: f64,
    rho: f64,
    frame: &OrthonormalFrame,
) -> Result<AffineInterpolant> {
    let domain = u.domain();
    let lattice = CubeLattice::new(domain, r, rho, frame.clone())?;
    let cells = lattice.cells();
    if cells.is_empty() {
        return Err(Error::EmptyLattice);
    }
    let rule = average_rule();
    let values = par::map(cells.len(), |i| lattice.cube_average(u, &cells[i], &rule));
    let nodes: BTreeMap<Vec<i64>, f64> = cells.iter().cloned().zip(values).collect();
    let d = frame.dim();
    let coarse: BTreeSet<Vec<i64>> = cells
        .iter()
        .filter(|k| {
            (0..1usize << d).all(|b| {
                let idx: Vec<i64> = (0..d).map(|i| k[i] + ((b >> i) & 1) as i64).collect();
                nodes.contains_key(&idx)
            })
        })
        .cloned()
        .collect();
    if coarse.is_empty() {
        return Err(Error::EmptyLattice);
    }
    Ok(AffineInterpolant {
        frame: frame.clone(),
        r,
        rho,
        nodes,
        coarse,
    })
}

/// How the coefficient is sampled in [`interpolant_dirichlet_energy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// `a(rk/ε)` at the cube anchor.
    Corner,
    /// Collapsed Gauss rule of `a(x/ε)` on every simplex.
    Pointwise,
}

/// `Σ_k a_k Σ_τ |∇u^{ρν̄}|² |simplex|` over the coarse cubes.
pub fn interpolant_dirichlet_energy(
    interp: &AffineInterpolant,
    coeff: &PeriodicCoefficient,
    epsilon: f64,
    sampling: Sampling,
) -> Result<f64> {
    let d = interp.frame.dim();
    check_dim(d, coeff.dim())?;
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon must be positive"));
    }
    let c = interp.cell();
    let pieces = interp.pieces();
    let simplex_volume = libm::pow(c, d as f64) / (1..=d).map(|k| k as f64).product::<f64>();
    let values = par::map(pieces.len(), |i| -> Result<f64> {
        let p = &pieces[i];
        let g2: f64 = p.gradient.iter().map(|g| g * g).sum();
        if g2 == 0.0 {
            return Ok(0.0);
        }
        let anchor: Vec<f64> = {
            let k: Vec<f64> = p.cube.iter().map(|&v| v as f64).collect();
            let mut x = vec![0.0; d];
            let scaled: Vec<f64> = k.iter().map(|v| v * c).collect();
            interp.frame.to_global(&scaled, &mut x);
            x
        };
        let a_int = match sampling {
            Sampling::Corner => {
                let y: Vec<f64> = anchor.iter().map(|v| v / epsilon).collect();
                coeff.evaluate(&y) * simplex_volume
            }
            Sampling::Pointwise => {
                let kuhn = KuhnSimplex::new(p.permutation.clone(), c, &interp.frame, anchor)?;
                simplex_rule(&kuhn.vertices, 4)?
                    .iter()
                    .map(|(x, w)| {
                        let y: Vec<f64> = x.iter().map(|v| v / epsilon).collect();
                        w * coeff.evaluate(&y)
                    })
                    .sum()
            }
        };
        Ok(g2 * a_int)
    });
    let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(par::tree_sum(&values))
}

/// `∫_simplex |∇u^{ρν̄}|²` and the Jensen upper bound
/// `(1/d!) Σ_j ∫_{cube at k+Δ^{τ,j−1}} |u(y + rρν_{τ(j)}) − u(y)|² / (rρ)² dy`
/// for one Kuhn simplex of the coarse cube `k`, both with the cube-average rule.
pub fn discrete_jensen(
    u: &dyn ScalarField,
    r: f64,
    rho: f64,
    frame: &OrthonormalFrame,
    k: &[i64],
    tau: &[usize],
) -> Result<(f64, f64)> {
    let d = frame.dim();
    check_dim(d, k.len())?;
    check_dim(d, tau.len())?;
    let lattice = CubeLattice::new(u.domain(), r, rho, frame.clone())?;
    let c = lattice.cell();
    let rule = average_rule();
    let m = rule.len();
    let fact: f64 = (1..=d).map(|v| v as f64).product();
    let vol = libm::pow(c, d as f64);
    let mut idx = k.to_vec();
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    let mut local = [0.0; crate::MAX_DIM];
    let mut y = [0.0; crate::MAX_DIM];
    let mut y2 = [0.0; crate::MAX_DIM];
    for &t in tau {
        let before = lattice.cube_average(u, &idx, &rule);
        let mut next = idx.clone();
        next[t] += 1;
        let after = lattice.cube_average(u, &next, &rule);
        lhs += (after - before) * (after - before) / (c * c) * vol / fact;
        let nu = &frame.vectors()[t];
        let mut acc = 0.0;
        for q in 0..m.pow(d as u32) {
            let mut rest = q;
            let mut w = 1.0;
            for i in 0..d {
                let (xi, wi) = rule[rest % m];
                rest /= m;
                local[i] = (idx[i] as f64 + xi) * c;
                w *= wi;
            }
            frame.to_global(&local[..d], &mut y[..d]);
            for i in 0..d {
                y2[i] = y[i] + c * nu[i];
            }
            let diff = u.value(&y2[..d]) - u.value(&y[..d]);
            acc += w * diff * diff;
        }
        rhs += acc * vol / (c * c) / fact;
        idx = next;
    }
    Ok((lhs, rhs))
}

/// Inverse-CDF draw from the normalized radial density `2(1−s)ρ^{1−2s}` on (0,1).
pub fn sample_rho(s: f64, uniform: f64) -> f64 {
    libm::exp(libm::log(uniform) / (2.0 - 2.0 * s))
}

/// Interpolant evaluated on demand: cube averages are computed only for the
/// `d + 1` nodes of the simplex containing the query point.
struct LazyInterpolant<'a> {
    lattice: CubeLattice<'a>,
    rule: Vec<(f64, f64)>,
}

impl LazyInterpolant<'_> {
    fn evaluate(&self, u: &dyn ScalarField, x: &[f64]) -> Option<f64> {
        let d = x.len();
        let mut k = [0i64; crate::MAX_DIM];
        let mut frac = [0.0; crate::MAX_DIM];
        self.lattice.locate(x, &mut k[..d], &mut frac[..d]);
        if !self.lattice.is_coarse(&k[..d]) {
            return None;
        }
        interpolate(&k[..d], &frac[..d], |idx| Some(self.lattice.cube_average(u, idx, &self.rule)))
    }
}

/// Monte Carlo average `ū` of `M` interpolants sampled on a regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedInterpolant {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Grid nodes per axis (axis 0 fastest).
    pub nodes: Vec<usize>,
    pub values: Vec<f64>,
    /// Whether every one of the `M` interpolants covers the node.
    pub covered: Vec<bool>,
    /// The sampled `(ρ_i, ν̄_i)`.
    pub samples: Vec<(f64, OrthonormalFrame)>,
}

impl AveragedInterpolant {
    pub fn node_point(&self, idx: usize, out: &mut [f64]) {
        let mut rest = idx;
        for k in 0..self.lo.len() {
            let i = rest % self.nodes[k];
            rest /= self.nodes[k];
            out[k] = self.lo[k] + (self.hi[k] - self.lo[k]) * i as f64 / (self.nodes[k] - 1) as f64;
        }
    }

    pub fn coverage(&self) -> f64 {
        self.covered.iter().filter(|c| **c).count() as f64 / self.covered.len() as f64
    }

    /// The averaged interpolant as a grid field; fails unless every node is covered.
    pub fn to_field(&self) -> Result<crate::field::GridField> {
        if self.covered.iter().any(|c| !c) {
            return Err(invalid("averaged interpolant does not cover every output node"));
        }
        crate::field::GridField::new(
            Domain::new_box(self.lo.clone(), self.hi.clone())?,
            self.nodes.clone(),
            self.values.clone(),
        )
    }
}

/// `ū(x) = (1/M) Σ_i u^{ρ_i ν̄_i}(x)` with `(ρ_i, ν̄_i)` drawn from `μ_ε`:
/// Haar frames and `ρ = U^{1/(2−2s)}` (clamped below by [`MIN_RHO`]).
/// Sample `i` uses random stream `i` of `seed`.
pub fn averaged_interpolant(
    u: &dyn ScalarField,
    s: f64,
    r: f64,
    frame_samples: usize,
    seed: u64,
    output_nodes: &[usize],
) -> Result<AveragedInterpolant> {
    if frame_samples == 0 {
        return Err(invalid("need at least one frame sample"));
    }
    if !(s > 0.0 && s < 1.0) || !(r > 0.0) {
        return Err(invalid("need 0 < s < 1 and r > 0"));
    }
    let domain = u.domain();
    let d = domain.dim();
    check_dim(d, output_nodes.len())?;
    if output_nodes.iter().any(|&n| n < 2) {
        return Err(invalid("output grid needs at least two nodes per axis"));
    }
    let samples: Vec<(f64, OrthonormalFrame)> = (0..frame_samples)
        .map(|i| {
            let mut g = rng::stream(seed, i as u64);
            let frame = sample_frame(&mut g, d)?;
            let rho = sample_rho(s, rng::open01(&mut g)).max(MIN_RHO);
            Ok((rho, frame))
        })
        .collect::<Result<_>>()?;
    let lazies: Vec<LazyInterpolant> = samples
        .iter()
        .map(|(rho, frame)| {
            Ok(LazyInterpolant {
                lattice: CubeLattice::new(domain, r, *rho, frame.clone())?,
                rule: average_rule(),
            })
        })
        .collect::<Result<_>>()?;
    let (lo, hi) = domain.bounding_box();
    let total: usize = output_nodes.iter().product();
    let mut out = AveragedInterpolant {
        lo,
        hi,
        nodes: output_nodes.to_vec(),
        values: vec![0.0; total],
        covered: vec![false; total],
        samples: Vec::new(),
    };
    let evaluated = par::map(total, |idx| {
        let mut x = [0.0; crate::MAX_DIM];
        out.node_point(idx, &mut x[..d]);
        let mut acc = 0.0;
        for lazy in &lazies {
            acc += lazy.evaluate(u, &x[..d])?;
        }
        Some(acc / lazies.len() as f64)
    });
    for (i, v) in evaluated.into_iter().enumerate() {
        if let Some(v) = v {
            out.values[i] = v;
            out.covered[i] = true;
        }
    }
    out.samples = samples;
    Ok(out)
}

/// Partition check of one Kuhn decomposition by rejection sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionReport {
    pub volume_sum: f64,
    pub expected_volume: f64,
    /// Sample points interior to two or more simplices.
    pub overlaps: usize,
    /// Sample points interior to the cube but in no simplex.
    pub uncovered: usize,
}

/// Samples `samples` points of the cube `anchor + ρQ_ν̄` and counts how many
/// simplices of the decomposition contain each one in their interior.
pub fn partition_check<R: Rng + ?Sized>(
    rng: &mut R,
    rho: f64,
    frame: &OrthonormalFrame,
    anchor: &[f64],
    samples: usize,
) -> Result<PartitionReport> {
    let d = frame.dim();
    let simplices = kuhn_decompose(rho, frame, anchor)?
        .iter()
        .map(KuhnSimplex::to_simplex)
        .collect::<Result<Vec<_>>>()?;
    let volume_sum = simplices.iter().map(Simplex::volume).sum();
    let mut overlaps = 0;
    let mut uncovered = 0;
    let mut local = vec![0.0; d];
    let mut x = vec![0.0; d];
    let tol = 1e-12;
    for _ in 0..samples {
        for l in local.iter_mut() {
            *l = rho * rng::open01(rng);
        }
        frame.to_global(&local, &mut x);
        for (xi, ai) in x.iter_mut().zip(anchor) {
            *xi += ai;
        }
        let inside = simplices.iter().filter(|s| s.min_barycentric(&x) > tol).count();
        let on_boundary = simplices.iter().any(|s| s.min_barycentric(&x).abs() <= tol);
        if inside > 1 {
            overlaps += 1;
        } else if inside == 0 && !on_boundary {
            uncovered += 1;
        }
    }
    Ok(PartitionReport {
        volume_sum,
        expected_volume: libm::pow(rho, d as f64),
        overlaps,
        uncovered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{AffineField, FnField};

    #[test]
    fn permutations_are_complete() {
        assert_eq!(permutations(1), vec![vec![0]]);
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(4).len(), 24);
        let p = permutations(3);
        let unique: BTreeSet<_> = p.iter().cloned().collect();
        assert_eq!(unique.len(), 6);
    }

    #[test]
    fn kuhn_examples() {
        let one = kuhn_decompose(0.5, &OrthonormalFrame::standard(1), &[0.2]).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].vertices, vec![vec![0.2], vec![0.7]]);
        let two = kuhn_decompose(1.0, &OrthonormalFrame::standard(2), &[0.0, 0.0]).unwrap();
        assert_eq!(two.len(), 2);
        assert!(two.iter().all(|s| (s.volume() - 0.5).abs() < 1e-15));
        let three = kuhn_decompose(1.0, &OrthonormalFrame::standard(3), &[0.0; 3]).unwrap();
        assert_eq!(three.len(), 6);
        let total: f64 = three.iter().map(KuhnSimplex::volume).sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!(kuhn_decompose(0.0, &OrthonormalFrame::standard(2), &[0.0, 0.0]).is_err());
    }

    #[test]
    fn vertex_differences_follow_the_frame() {
        let mut g = rng::stream(5, 0);
        let frame = sample_frame(&mut g, 3).unwrap();
        for s in kuhn_decompose(0.7, &frame, &[0.1, 0.2, 0.3]).unwrap() {
            for j in 1..=3 {
                let nu = &frame.vectors()[s.permutation[j - 1]];
                for i in 0..3 {
                    let diff = s.vertices[j][i] - s.vertices[j - 1][i];
                    assert!((diff - 0.7 * nu[i]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn interval_lattice_cells() {
        let dom = Domain::cube(1);
        let frame = OrthonormalFrame::standard(1);
        let cells = lattice_cells(&dom, 1.0, 0.25, &frame).unwrap();
        assert_eq!(cells.indices, vec![vec![1], vec![2]]);
        let none = lattice_cells(&dom, 1.0, 1.0, &frame).unwrap();
        assert!(none.empty);
    }

    #[test]
    fn affine_gradients_are_reproduced() {
        let dom = Domain::cube(2);
        let u = AffineField::new(dom, vec![0.3, -1.1], 0.4).unwrap();
        let mut g = rng::stream(9, 0);
        let frame = sample_frame(&mut g, 2).unwrap();
        let interp = cube_average_interpolant(&u, 1.0, 0.1, &frame).unwrap();
        for p in interp.pieces() {
            assert!((p.gradient[0] - 0.3).abs() < 1e-12 && (p.gradient[1] + 1.1).abs() < 1e-12);
        }
    }

    #[test]
    fn discrete_jensen_holds_for_a_smooth_field() {
        let dom = Domain::cube(2);
        let u = FnField::new(
            dom,
            |x: &[f64]| libm::sin(5.0 * x[0]) * libm::cos(3.0 * x[1]) + x[0] * x[0],
            |_x: &[f64], _g: &mut [f64]| unreachable!(),
        );
        let frame = OrthonormalFrame::new(vec![vec![0.6, 0.8], vec![-0.8, 0.6]]).unwrap();
        let interp = cube_average_interpolant(&u, 1.0, 0.2, &frame).unwrap();
        let k = interp.coarse_cubes().next().unwrap().clone();
        for tau in permutations(2) {
            let (lhs, rhs) = discrete_jensen(&u, 1.0, 0.2, &frame, &k, &tau).unwrap();
            assert!(rhs - lhs >= -1e-12, "{lhs} > {rhs}");
            // lhs is the interpolant's own energy on that simplex
            let piece = interp.pieces().into_iter().find(|p| p.cube == k && p.permutation == tau).unwrap();
            let g2: f64 = piece.gradient.iter().map(|v| v * v).sum();
            assert!((g2 * 0.04 / 2.0 - lhs).abs() < 1e-12);
        }
    }

    #[test]
    fn rho_sampler_inverts_the_cdf() {
        // CDF of ρ is ρ^{2−2s}; at s = 0.75 the median is 0.25.
        assert!((sample_rho(0.75, 0.5) - 0.25).abs() < 1e-15);
    }
}
