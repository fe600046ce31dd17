//! Recovery sequences: affine functions perturbed by a rescaled corrector,
//! piecewise-affine targets glued with cut-offs, and truncation.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::cell_problem::{Corrector, GridProfile, Interpolation, PeriodicProfile};
use crate::domain::Domain;
use crate::error::{check_dim, invalid, Error, Result};
use crate::field::{ScalarField, Truncated};
use crate::geometry::Simplex;
use crate::{linalg, rng, sphere_measure};

/// Points sampled when certifying a cut-off.
pub const CUTOFF_SAMPLES: usize = 10_000;
const CUTOFF_SEED: u64 = 0x5eed_c0f0;

/// `u_ε(x) = ⟨z, x⟩ + m + ε φ(x/ε)`.
#[derive(Clone)]
pub struct RecoveryAffine<P> {
    domain: Domain,
    z: Vec<f64>,
    offset: f64,
    epsilon: f64,
    profile: P,
}

impl<P: PeriodicProfile> RecoveryAffine<P> {
    pub fn new(domain: Domain, z: Vec<f64>, offset: f64, epsilon: f64, profile: P) -> Result<Self> {
        check_dim(domain.dim(), z.len())?;
        check_dim(domain.dim(), profile.dim())?;
        if !(epsilon > 0.0) {
            return Err(invalid("epsilon must be positive"));
        }
        Ok(Self {
            domain,
            z,
            offset,
            epsilon,
            profile,
        })
    }

    pub fn slope(&self) -> &[f64] {
        &self.z
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn profile(&self) -> &P {
        &self.profile
    }
}

impl<P: PeriodicProfile> ScalarField for RecoveryAffine<P> {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn value(&self, x: &[f64]) -> f64 {
        let d = self.z.len();
        let mut y = [0.0; crate::MAX_DIM];
        for k in 0..d {
            y[k] = x[k] / self.epsilon;
        }
        linalg::dot(&self.z, &x[..d]) + self.offset + self.epsilon * self.profile.value(&y[..d])
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let d = self.z.len();
        let mut y = [0.0; crate::MAX_DIM];
        for k in 0..d {
            y[k] = x[k] / self.epsilon;
        }
        self.profile.gradient(&y[..d], &mut out[..d]);
        for k in 0..d {
            out[k] += self.z[k];
        }
    }
}

fn corrector_profile(corrector: &Corrector, z: &[f64], mode: Interpolation) -> Result<Arc<GridProfile>> {
    check_dim(corrector.z.len(), z.len())?;
    if corrector.z.iter().zip(z).any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + b.abs())) {
        return Err(invalid("corrector was solved for a different direction"));
    }
    Ok(Arc::new(corrector.profile(mode)))
}

/// Recovery field built from a grid corrector solved for `z`.
pub fn recovery_affine(
    domain: Domain,
    z: &[f64],
    corrector: &Corrector,
    epsilon: f64,
    mode: Interpolation,
) -> Result<RecoveryAffine<Arc<GridProfile>>> {
    let profile = corrector_profile(corrector, z, mode)?;
    RecoveryAffine::new(domain, z.to_vec(), 0.0, epsilon, profile)
}

/// The ramp `g`: 0 below 0, 1 above 1, `2t²` on `[0, ½]` and `1 − 2(1−t)²`
/// on `[½, 1]`. It is `C^{1,1}` with `|g'| ≤ 2` and `|g''| ≤ 4`.
pub fn ramp(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0, 0.0)
    } else if t <= 0.5 {
        (2.0 * t * t, 4.0 * t, 4.0)
    } else {
        let u = 1.0 - t;
        (1.0 - 2.0 * u * u, 4.0 * u, -4.0)
    }
}

/// Sampled derivative bounds recorded when a cut-off is built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffCertificate {
    pub max_gradient: f64,
    pub max_hessian: f64,
    pub gradient_cap: f64,
    pub hessian_cap: f64,
    /// Samples whose stencil met the ridge of the distance function.
    pub skipped: usize,
    pub samples: usize,
}

/// `ψ(x) = g(dist(x, Δᶜ)/ε − 1)`: zero off the ε-erosion of the simplex,
/// one on its 2ε-erosion.
#[derive(Debug, Clone)]
pub struct CutoffFunction {
    simplex: Simplex,
    epsilon: f64,
    normals: Vec<Vec<f64>>,
    offsets: Vec<f64>,
    certificate: CutoffCertificate,
}

impl CutoffFunction {
    pub fn simplex(&self) -> &Simplex {
        &self.simplex
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn certificate(&self) -> &CutoffCertificate {
        &self.certificate
    }

    /// Signed distances to the facet planes, smallest first: `(distance, facet)`.
    fn active(&self, x: &[f64]) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for (i, (n, c)) in self.normals.iter().zip(&self.offsets).enumerate() {
            let v = linalg::dot(n, x) + c;
            if v < best.0 {
                best = (v, i);
            }
        }
        best
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        self.active(x).0.max(0.0)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        ramp(self.distance(x) / self.epsilon - 1.0).0
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let (dist, facet) = self.active(x);
        let (_, dg, _) = ramp(dist.max(0.0) / self.epsilon - 1.0);
        for (o, n) in out.iter_mut().zip(&self.normals[facet]) {
            *o = dg / self.epsilon * n;
        }
    }

    /// Operator norm of the Hessian away from the ridge: `|g''| / ε²`.
    pub fn hessian_norm(&self, x: &[f64]) -> f64 {
        let (dist, _) = self.active(x);
        ramp(dist.max(0.0) / self.epsilon - 1.0).2.abs() / (self.epsilon * self.epsilon)
    }
}

/// Uniform point of a simplex from sorted uniforms.
fn sample_simplex<R: rand::Rng + ?Sized>(s: &Simplex, rng: &mut R, out: &mut [f64]) {
    let d = s.dim();
    let mut u = [0.0; crate::MAX_DIM];
    for v in u.iter_mut().take(d) {
        *v = rng::open01(rng);
    }
    u[..d].sort_by(f64::total_cmp);
    out.iter_mut().for_each(|o| *o = 0.0);
    let mut prev = 0.0;
    for (j, v) in s.vertices().iter().enumerate() {
        let next = if j < d { u[j] } else { 1.0 };
        let w = next - prev;
        prev = next;
        for (o, vk) in out.iter_mut().zip(v) {
            *o += w * vk;
        }
    }
}

/// Builds the cut-off of `simplex` at scale `ε` and certifies
/// `‖∇ψ‖ ≤ 2/ε`, `‖∇²ψ‖ ≤ 4/ε²`, `0 ≤ ψ ≤ 1`, the plateau and the support
/// on [`CUTOFF_SAMPLES`] points by finite differences of `ψ` itself.
pub fn build_cutoff(simplex: &Simplex, epsilon: f64) -> Result<CutoffFunction> {
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon must be positive"));
    }
    if epsilon >= simplex.inradius() / 4.0 {
        return Err(invalid("epsilon must be below a quarter of the simplex inradius"));
    }
    let d = simplex.dim();
    let grads = simplex.barycentric_gradients();
    let mut normals = Vec::with_capacity(d + 1);
    let mut offsets = Vec::with_capacity(d + 1);
    // λ_i(x) = ⟨g_i, x⟩ + c_i with c_i recovered from the vertex where λ_i = 1.
    for (i, g) in grads.iter().enumerate() {
        let norm = linalg::norm(g);
        let c = 1.0 - linalg::dot(g, &simplex.vertices()[i]);
        normals.push(g.iter().map(|v| v / norm).collect::<Vec<f64>>());
        offsets.push(c / norm);
    }
    let mut cut = CutoffFunction {
        simplex: simplex.clone(),
        epsilon,
        normals,
        offsets,
        certificate: CutoffCertificate {
            max_gradient: 0.0,
            max_hessian: 0.0,
            gradient_cap: 2.0 / epsilon,
            hessian_cap: 4.0 / (epsilon * epsilon),
            skipped: 0,
            samples: CUTOFF_SAMPLES,
        },
    };
    cut.certificate = certify(&cut)?;
    Ok(cut)
}

fn certify(cut: &CutoffFunction) -> Result<CutoffCertificate> {
    let d = cut.simplex.dim();
    let eps = cut.epsilon;
    let h = 1e-4 * eps;
    let mut g = rng::stream(CUTOFF_SEED, 0);
    let mut cert = cut.certificate;
    let mut x = [0.0; crate::MAX_DIM];
    let mut p = [0.0; crate::MAX_DIM];
    let mut q = [0.0; crate::MAX_DIM];
    // Rounding slack of the difference quotients.
    let slack = 1e-6;
    for _ in 0..CUTOFF_SAMPLES {
        sample_simplex(&cut.simplex, &mut g, &mut x[..d]);
        let psi = cut.value(&x[..d]);
        let dist = cut.distance(&x[..d]);
        if !(0.0..=1.0).contains(&psi) {
            return Err(Error::Certification("cut-off leaves [0, 1]".into()));
        }
        if dist >= 2.0 * eps && psi != 1.0 {
            return Err(Error::Certification("cut-off is not 1 on the 2ε-erosion".into()));
        }
        if dist <= eps && psi != 0.0 {
            return Err(Error::Certification("cut-off is not 0 off the ε-erosion".into()));
        }
        let (_, facet) = cut.active(&x[..d]);
        // Skip stencils that reach the ridge where the active facet changes.
        let ridge = (0..d).any(|k| {
            [h, -h].iter().any(|&step| {
                p[..d].copy_from_slice(&x[..d]);
                p[k] += step;
                cut.active(&p[..d]).1 != facet
            })
        });
        if ridge {
            cert.skipped += 1;
            continue;
        }
        let mut grad2 = 0.0;
        for k in 0..d {
            p[..d].copy_from_slice(&x[..d]);
            q[..d].copy_from_slice(&x[..d]);
            p[k] += h;
            q[k] -= h;
            let dk = (cut.value(&p[..d]) - cut.value(&q[..d])) / (2.0 * h);
            grad2 += dk * dk;
        }
        cert.max_gradient = cert.max_gradient.max(libm::sqrt(grad2));
        // The Hessian is rank one along the active normal: its norm is the
        // second difference in that direction.
        let n = &cut.normals[facet];
        for k in 0..d {
            p[k] = x[k] + h * n[k];
            q[k] = x[k] - h * n[k];
        }
        if cut.active(&p[..d]).1 == facet && cut.active(&q[..d]).1 == facet {
            let second = (cut.value(&p[..d]) - 2.0 * psi + cut.value(&q[..d])) / (h * h);
            cert.max_hessian = cert.max_hessian.max(second.abs());
        } else {
            cert.skipped += 1;
        }
    }
    if cert.max_gradient > cert.gradient_cap * (1.0 + slack) {
        return Err(Error::Certification("cut-off gradient exceeds 2/ε".into()));
    }
    if cert.max_hessian > cert.hessian_cap * (1.0 + slack) {
        return Err(Error::Certification("cut-off Hessian exceeds 4/ε²".into()));
    }
    Ok(cert)
}

/// `u(x) = ⟨z_i, x⟩ + m_i` on simplex `Δ_i`.
#[derive(Debug, Clone)]
pub struct PiecewiseAffineTarget {
    domain: Domain,
    gradients: Vec<Vec<f64>>,
    offsets: Vec<f64>,
}

impl PiecewiseAffineTarget {
    pub fn new(simplices: Vec<Simplex>, gradients: Vec<Vec<f64>>, offsets: Vec<f64>) -> Result<Self> {
        let n = simplices.len();
        check_dim(n, gradients.len())?;
        check_dim(n, offsets.len())?;
        let domain = Domain::polytope(simplices)?;
        let d = domain.dim();
        for g in &gradients {
            check_dim(d, g.len())?;
        }
        let Domain::Polytope(ref s) = domain else { unreachable!() };
        let scale = domain.diameter();
        for i in 0..n {
            for j in i + 1..n {
                if s[j].min_barycentric(&s[i].centroid()) > 1e-12 || s[i].min_barycentric(&s[j].centroid()) > 1e-12 {
                    return Err(invalid("target simplices overlap"));
                }
                for vi in s[i].vertices() {
                    for vj in s[j].vertices() {
                        let gap: f64 = vi.iter().zip(vj).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                        if gap <= 1e-12 * scale {
                            let ui = linalg::dot(&gradients[i], vi) + offsets[i];
                            let uj = linalg::dot(&gradients[j], vj) + offsets[j];
                            if (ui - uj).abs() > 1e-12 {
                                return Err(invalid("target is discontinuous across a shared vertex"));
                            }
                        }
                    }
                }
            }
        }
        Ok(Self {
            domain,
            gradients,
            offsets,
        })
    }

    pub fn simplices(&self) -> &[Simplex] {
        match &self.domain {
            Domain::Polytope(s) => s,
            Domain::Box { .. } => unreachable!(),
        }
    }

    pub fn gradients(&self) -> &[Vec<f64>] {
        &self.gradients
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// Index of the simplex owning `x`: the one with the largest smallest
    /// barycentric coordinate.
    pub fn locate(&self, x: &[f64]) -> usize {
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, s) in self.simplices().iter().enumerate() {
            let m = s.min_barycentric(x);
            if m > best.0 {
                best = (m, i);
            }
        }
        best.1
    }
}

impl ScalarField for PiecewiseAffineTarget {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn value(&self, x: &[f64]) -> f64 {
        let i = self.locate(x);
        linalg::dot(&self.gradients[i], x) + self.offsets[i]
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let i = self.locate(x);
        out[..self.gradients[i].len()].copy_from_slice(&self.gradients[i]);
    }
}

/// `u_ε(x) = ⟨z_i, x⟩ + m_i + ε φ_i(x/ε) ψ_i(x)` on `Δ_i`.
#[derive(Clone)]
pub struct RecoveryPiecewise {
    target: PiecewiseAffineTarget,
    profiles: Vec<Arc<dyn PeriodicProfile>>,
    cutoffs: Vec<CutoffFunction>,
    epsilon: f64,
}

impl RecoveryPiecewise {
    pub fn new(target: PiecewiseAffineTarget, profiles: Vec<Arc<dyn PeriodicProfile>>, epsilon: f64) -> Result<Self> {
        check_dim(target.simplices().len(), profiles.len())?;
        let d = target.domain.dim();
        for p in &profiles {
            check_dim(d, p.dim())?;
        }
        let cutoffs = target
            .simplices()
            .iter()
            .map(|s| build_cutoff(s, epsilon))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            target,
            profiles,
            cutoffs,
            epsilon,
        })
    }

    pub fn target(&self) -> &PiecewiseAffineTarget {
        &self.target
    }

    pub fn cutoffs(&self) -> &[CutoffFunction] {
        &self.cutoffs
    }

    /// Value computed as if `x` belonged to simplex `i`.
    pub fn value_on(&self, i: usize, x: &[f64]) -> f64 {
        let d = x.len();
        let mut y = [0.0; crate::MAX_DIM];
        for k in 0..d {
            y[k] = x[k] / self.epsilon;
        }
        let base = linalg::dot(&self.target.gradients[i], x) + self.target.offsets[i];
        let psi = self.cutoffs[i].value(x);
        if psi == 0.0 {
            return base;
        }
        base + self.epsilon * self.profiles[i].value(&y[..d]) * psi
    }
}

impl ScalarField for RecoveryPiecewise {
    fn domain(&self) -> &Domain {
        &self.target.domain
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.value_on(self.target.locate(x), x)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let i = self.target.locate(x);
        let d = x.len();
        let mut y = [0.0; crate::MAX_DIM];
        for k in 0..d {
            y[k] = x[k] / self.epsilon;
        }
        let psi = self.cutoffs[i].value(x);
        let mut gphi = [0.0; crate::MAX_DIM];
        let mut gpsi = [0.0; crate::MAX_DIM];
        self.profiles[i].gradient(&y[..d], &mut gphi[..d]);
        self.cutoffs[i].gradient(x, &mut gpsi[..d]);
        let phi = self.profiles[i].value(&y[..d]);
        for k in 0..d {
            out[k] = self.target.gradients[i][k] + psi * gphi[k] + self.epsilon * phi * gpsi[k];
        }
    }
}

/// Recovery field for a piecewise-affine target from per-simplex grid correctors.
pub fn recovery_piecewise(
    target: PiecewiseAffineTarget,
    correctors: &[Corrector],
    epsilon: f64,
    mode: Interpolation,
) -> Result<RecoveryPiecewise> {
    check_dim(target.simplices().len(), correctors.len())?;
    let profiles = correctors
        .iter()
        .zip(target.gradients())
        .map(|(c, z)| corrector_profile(c, z, mode).map(|p| p as Arc<dyn PeriodicProfile>))
        .collect::<Result<Vec<_>>>()?;
    RecoveryPiecewise::new(target, profiles, epsilon)
}

/// `(u ∧ M) ∨ −M`.
pub fn truncate<F: ScalarField>(u: F, level: f64) -> Result<Truncated<F>> {
    Truncated::new(u, level)
}

/// Worst measured Taylor remainder of the rescaled profile against the budget
/// `d² H |x − y|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorReport {
    pub pairs: usize,
    /// Largest `|ε² R| / (d² H |x − y|²)`; at most 1 when the budget holds.
    pub worst_ratio: f64,
    pub hessian_bound: f64,
}

impl TaylorReport {
    pub fn holds(&self) -> bool {
        self.worst_ratio <= 1.0
    }
}

/// Samples `pairs` pairs with `|x − y| ≤ ε` and measures
/// `ε² (φ(y/ε) − φ(x/ε) − ∇φ(x/ε)·(y − x)/ε)`.
pub fn taylor_remainder_check(profile: &dyn PeriodicProfile, epsilon: f64, pairs: usize, seed: u64) -> Result<TaylorReport> {
    if !(epsilon > 0.0) || pairs == 0 {
        return Err(invalid("need epsilon > 0 and at least one pair"));
    }
    let d = profile.dim();
    let hb = profile.hessian_bound();
    let budget = (d * d) as f64 * hb;
    let ratios = crate::par::map(pairs, |i| {
        let mut g = rng::stream(seed, i as u64);
        let mut x = [0.0; crate::MAX_DIM];
        let mut dir = [0.0; crate::MAX_DIM];
        for v in x.iter_mut().take(d) {
            *v = rng::open01(&mut g);
        }
        rng::unit_vector(&mut g, &mut dir[..d]);
        let t = epsilon * rng::open01(&mut g);
        let mut ys = [0.0; crate::MAX_DIM];
        let mut yx = [0.0; crate::MAX_DIM];
        let mut yy = [0.0; crate::MAX_DIM];
        for k in 0..d {
            yx[k] = x[k] / epsilon;
            yy[k] = (x[k] + t * dir[k]) / epsilon;
        }
        profile.gradient(&yx[..d], &mut ys[..d]);
        let lin: f64 = (0..d).map(|k| ys[k] * t * dir[k] / epsilon).sum();
        let rem = epsilon * epsilon * (profile.value(&yy[..d]) - profile.value(&yx[..d]) - lin);
        let allowed = budget * t * t;
        if allowed > 0.0 {
            rem.abs() / allowed
        } else if rem == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    });
    Ok(TaylorReport {
        pairs,
        worst_ratio: ratios.into_iter().fold(0.0, f64::max),
        hessian_bound: hb,
    })
}

/// Both sides of the recovery energy split
/// `F ≤ (1+η)·main + (1+1/η)·rem` with
/// `main = σ_{d−1}/(2d) r^{2−2s} |Ω| ∫_{(0,1)^d} a|z + ∇φ|²` and
/// `rem = (1−s)/ε² · d⁴ β σ_{d−1} |Ω| H² r^{4−2s} / (4 − 2s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySplit {
    pub measured: f64,
    pub main: f64,
    pub remainder: f64,
    pub eta: f64,
}

impl EnergySplit {
    pub fn bound(&self) -> f64 {
        (1.0 + self.eta) * self.main + (1.0 + 1.0 / self.eta) * self.remainder
    }

    pub fn holds(&self) -> bool {
        self.measured <= self.bound()
    }
}

#[allow(clippy::too_many_arguments)]
pub fn energy_split(
    measured: f64,
    cell_energy: f64,
    hessian_bound: f64,
    beta: f64,
    volume: f64,
    d: usize,
    epsilon: f64,
    s: f64,
    r: f64,
    eta: f64,
) -> Result<EnergySplit> {
    if !(eta > 0.0) || !(epsilon > 0.0) || !(s > 0.0 && s < 1.0) || !(r > 0.0) {
        return Err(invalid("energy split needs eta, epsilon, r > 0 and 0 < s < 1"));
    }
    let sigma = sphere_measure(d);
    let main = crate::limit_constant(d) * libm::pow(r, 2.0 - 2.0 * s) * volume * cell_energy;
    let d4 = libm::pow(d as f64, 4.0);
    let remainder = (1.0 - s) / (epsilon * epsilon) * d4 * beta * sigma * volume * hessian_bound * hessian_bound
        * libm::pow(r, 4.0 - 2.0 * s)
        / (4.0 - 2.0 * s);
    Ok(EnergySplit {
        measured,
        main,
        remainder,
        eta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::cell_problem::{FourierProfile, TorusGrid};
    use crate::coefficient::{FourierTerm, Trig};

    fn sine_profile() -> FourierProfile {
        FourierProfile::new(1, vec![FourierTerm::new(vec![1], 0.1, vec![Trig::Sin])]).unwrap()
    }

    #[test]
    fn ramp_bounds() {
        for i in 0..=1000 {
            let t = i as f64 / 1000.0;
            let (g, dg, ddg) = ramp(t);
            assert!((0.0..=1.0).contains(&g) && dg.abs() <= 2.0 && ddg.abs() <= 4.0);
        }
        assert_eq!(ramp(0.5).0, 0.5);
        assert_eq!(ramp(-1.0).0, 0.0);
        assert_eq!(ramp(3.0).0, 1.0);
    }

    #[test]
    fn zero_profile_is_affine() {
        let grid = TorusGrid::new(1, 16).unwrap();
        let cor = Corrector {
            grid,
            values: vec![0.0; 16],
            z: vec![2.0],
            iterations: 0,
            residual: 0.0,
        };
        let u = recovery_affine(Domain::cube(1), &[2.0], &cor, 0.1, Interpolation::Multilinear).unwrap();
        assert_eq!(u.value(&[0.3]), 0.6);
        assert!(recovery_affine(Domain::cube(1), &[1.0], &cor, 0.1, Interpolation::Multilinear).is_err());
    }

    #[test]
    fn recovery_stays_near_the_affine_function() {
        let p = sine_profile();
        let u = RecoveryAffine::new(Domain::cube(1), vec![1.0], 0.0, 0.01, p).unwrap();
        for i in 0..100 {
            let x = i as f64 / 100.0;
            assert!((u.value(&[x]) - x).abs() <= 0.01 * 0.1 + 1e-15);
        }
    }

    #[test]
    fn cutoff_plateau_and_support() {
        let s = Simplex::regular(2).unwrap();
        let eps = s.inradius() / 10.0;
        let c = build_cutoff(&s, eps).unwrap();
        let center = s.centroid();
        assert_eq!(c.value(&center), 1.0);
        assert_eq!(c.value(&s.vertices()[0]), 0.0);
        let cert = c.certificate();
        assert!(cert.max_gradient <= cert.gradient_cap * (1.0 + 1e-6));
        assert!(cert.max_hessian > 0.5 * cert.hessian_cap);
        assert!(build_cutoff(&s, s.inradius() / 3.0).is_err());
    }

    #[test]
    fn taylor_budget_for_a_fourier_profile() {
        let rep = taylor_remainder_check(&sine_profile(), 0.05, 10_000, 3).unwrap();
        assert!(rep.holds(), "{}", rep.worst_ratio);
        // ½ H |Δ|² is attained up to sampling, so the ratio sits near 1/(2d²)
        assert!(rep.worst_ratio > 0.3);
    }

    #[test]
    fn discontinuous_target_is_rejected() {
        let t1 = Simplex::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let t2 = Simplex::new(vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let ok = PiecewiseAffineTarget::new(vec![t1.clone(), t2.clone()], vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]);
        assert!(ok.is_ok());
        let bad = PiecewiseAffineTarget::new(vec![t1, t2], vec![vec![1.0, 0.0], vec![1.0, 1.0]], vec![0.0, 0.0]);
        assert!(bad.is_err());
    }
}
