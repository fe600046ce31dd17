//! The truncated fractional energy
//!
//! ```text
//! F(u) = (1 − s) ∬_{Ω×Ω, |x−y| ≤ r} a(x/ε) |u(x) − u(y)|² / |x − y|^{d+2s} dx dy
//! ```
//!
//! in polar form around each `x`. With `y = x + ρν` and `t = ρ^{2−2s}` the
//! radial weight `(1 − s)ρ^{1−2s} dρ` becomes `dt / 2`, so
//!
//! ```text
//! F(u) = ½ ∫_Ω a(x/ε) ∫_{S^{d−1}} ∫ Q(x, ρ(t), ν) 1_Ω(x + ρν) dt dν dx,
//! Q = |u(x + ρν) − u(x)|² / ρ².
//! ```
//!
//! The `t` integral is taken on geometric `ρ`-panels (ratio 1/8) down to a
//! clamp radius `1e-8 · diam(Ω)`, below which `Q` is frozen at the clamp.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::coefficient::PeriodicCoefficient;
use crate::domain::Domain;
use crate::error::{check_dim, invalid, Result};
use crate::field::ScalarField;
use crate::quadrature::{simplex_rule, GaussLegendre, OuterRule};
use crate::{limit_constant, par, rng, sphere_measure};

/// Clamp radius relative to the domain diameter.
pub const CLAMP: f64 = 1e-8;
/// Ratio between consecutive radial panel edges.
const RADIAL_RATIO: f64 = 8.0;
/// Outer points per work chunk.
const OUTER_CHUNK: usize = 16;
/// Monte Carlo samples per work chunk (and per random stream).
const MC_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// No truncation; only allowed for Monte Carlo quadrature.
    Full,
    Radius(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolarRule {
    /// Outer rule per axis (boxes) or collapsed rule order `panels · order`
    /// per simplex (polytopes).
    pub outer: OuterRule,
    /// Gauss–Legendre nodes per geometric radial panel.
    pub radial_order: usize,
    /// Angles for `d = 2`; azimuths for `d = 3` (with half as many polar nodes).
    pub directions: usize,
}

impl Default for PolarRule {
    fn default() -> Self {
        Self {
            outer: OuterRule::default(),
            radial_order: 4,
            directions: 64,
        }
    }
}

impl PolarRule {
    pub fn validate(&self) -> Result<()> {
        self.outer.validate()?;
        if self.radial_order == 0 || self.directions == 0 {
            return Err(invalid("quadrature node counts must be positive"));
        }
        Ok(())
    }

    /// Half resolution in every component; used for the error estimate.
    pub fn halved(&self) -> Self {
        Self {
            outer: self.outer.halved(),
            radial_order: (self.radial_order / 2).max(1),
            directions: (self.directions / 2).max(2),
        }
    }

    /// The same rule at double resolution.
    pub fn doubled(&self) -> Self {
        Self {
            outer: OuterRule {
                panels: 2 * self.outer.panels,
                ..self.outer
            },
            radial_order: 2 * self.radial_order,
            directions: 2 * self.directions,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quadrature {
    Polar(PolarRule),
    MonteCarlo { samples: u64, seed: u64 },
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature::Polar(PolarRule::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    pub epsilon: f64,
    pub s: f64,
    pub truncation: Truncation,
    pub quadrature: Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub value: f64,
    /// `|value − value at half resolution|` (polar) or two standard errors (Monte Carlo).
    pub quad_error: f64,
    /// Monte Carlo standard error.
    pub std_error: Option<f64>,
    /// Certified bound on the discarded far field, when truncated.
    pub tail_bound: Option<f64>,
    /// `∫_Ω u²` by the outer rule (used for the tail bound).
    pub l2_norm_sq: f64,
}

fn validate(u: &dyn ScalarField, params: &EnergyParams) -> Result<f64> {
    let EnergyParams { epsilon, s, .. } = *params;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid("epsilon must lie in (0, 1)"));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid("s must lie in (0, 1)"));
    }
    let diam = u.domain().diameter();
    if let Some(h) = u.grid_spacing() {
        if s > 1.0 - h * h {
            return Err(invalid("s too close to 1 for a grid-sampled field: need s <= 1 - h^2"));
        }
    }
    match params.truncation {
        Truncation::Full => Ok(diam),
        Truncation::Radius(r) => {
            if !(r > 0.0) || r > diam * (1.0 + 1e-12) {
                return Err(invalid("truncation radius must lie in (0, diam(Ω)]"));
            }
            Ok(r)
        }
    }
}

/// Quadrature approximation of the truncated energy with an error estimate.
pub fn energy(u: &dyn ScalarField, coeff: &PeriodicCoefficient, params: &EnergyParams) -> Result<EnergyReport> {
    check_dim(u.dim(), coeff.dim())?;
    let r = validate(u, params)?;
    let d = u.dim();
    let diam = u.domain().diameter();
    let truncated = matches!(params.truncation, Truncation::Radius(r) if r < diam);
    match params.quadrature {
        Quadrature::Polar(rule) => {
            if params.truncation == Truncation::Full {
                return Err(invalid("polar quadrature needs a finite truncation radius; add tail_bound for the rest"));
            }
            rule.validate()?;
            if d > 3 {
                return Err(invalid("polar quadrature supports d <= 3"));
            }
            let (value, l2) = polar(u, coeff, params, r, &rule)?;
            let (coarse, _) = polar(u, coeff, params, r, &rule.halved())?;
            let tail = if truncated {
                Some(tail_bound(l2, coeff.beta(), params.s, r, d)?)
            } else {
                None
            };
            Ok(EnergyReport {
                value,
                quad_error: (value - coarse).abs(),
                std_error: None,
                tail_bound: tail,
                l2_norm_sq: l2,
            })
        }
        Quadrature::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(invalid("Monte Carlo needs at least two samples"));
            }
            let (value, se, l2) = monte_carlo(u, coeff, params, r, samples, seed);
            let tail = if truncated {
                Some(tail_bound(l2, coeff.beta(), params.s, r, d)?)
            } else {
                None
            };
            Ok(EnergyReport {
                value,
                quad_error: 2.0 * se,
                std_error: Some(se),
                tail_bound: tail,
                l2_norm_sq: l2,
            })
        }
    }
}

/// Direction nodes and weights on `S^{d−1}`; the weights sum to `σ_{d−1}`.
pub fn sphere_rule(d: usize, directions: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    match d {
        1 => Ok(vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)]),
        2 => {
            let n = directions;
            Ok((0..n)
                .map(|j| {
                    let th = 2.0 * PI * (j as f64 + 0.5) / n as f64;
                    (vec![libm::cos(th), libm::sin(th)], 2.0 * PI / n as f64)
                })
                .collect())
        }
        3 => {
            let n = directions.max(2);
            let gl = GaussLegendre::new((n / 2).max(1))?;
            let mut out = Vec::with_capacity(n * gl.len());
            for (c, wc) in gl.on(-1.0, 1.0) {
                let sn = libm::sqrt((1.0 - c * c).max(0.0));
                for j in 0..n {
                    let ph = 2.0 * PI * (j as f64 + 0.5) / n as f64;
                    out.push((vec![sn * libm::cos(ph), sn * libm::sin(ph), c], wc * 2.0 * PI / n as f64));
                }
            }
            Ok(out)
        }
        _ => Err(invalid("sphere rules exist for d <= 3")),
    }
}

/// Outer integration points and weights over the domain.
enum OuterPoints {
    Tensor { axes: Vec<Vec<(f64, f64)>> },
    List(Vec<(Vec<f64>, f64)>),
}

impl OuterPoints {
    /// Box rules are split at the interface layers of `a(x/ε)`.
    fn new(domain: &Domain, rule: &OuterRule, coeff: &PeriodicCoefficient, epsilon: f64) -> Result<Self> {
        match domain {
            Domain::Box { lo, hi } => {
                let edges = coeff.layer_edges();
                let axes = lo
                    .iter()
                    .zip(hi)
                    .map(|(a, b)| {
                        let mut breaks = Vec::new();
                        if !edges.is_empty() {
                            let first = libm::floor(a / epsilon) as i64;
                            let last = libm::ceil(b / epsilon) as i64;
                            for k in first..=last {
                                breaks.extend(edges.iter().map(|e| epsilon * (k as f64 + e)));
                            }
                        }
                        rule.nodes_with_breaks(*a, *b, &breaks)
                    })
                    .collect::<Result<_>>()?;
                Ok(OuterPoints::Tensor { axes })
            }
            Domain::Polytope(simplices) => {
                let q = rule.panels * rule.order;
                let mut pts = Vec::new();
                for s in simplices {
                    pts.extend(simplex_rule(s.vertices(), q)?);
                }
                Ok(OuterPoints::List(pts))
            }
        }
    }

    fn len(&self) -> usize {
        match self {
            OuterPoints::Tensor { axes } => axes.iter().map(Vec::len).product(),
            OuterPoints::List(p) => p.len(),
        }
    }

    fn get(&self, idx: usize, x: &mut [f64]) -> f64 {
        match self {
            OuterPoints::Tensor { axes } => {
                let mut rest = idx;
                let mut w = 1.0;
                for (k, ax) in axes.iter().enumerate() {
                    let (p, wp) = ax[rest % ax.len()];
                    rest /= ax.len();
                    x[k] = p;
                    w *= wp;
                }
                w
            }
            OuterPoints::List(p) => {
                x.copy_from_slice(&p[idx].0);
                p[idx].1
            }
        }
    }
}

/// `∫ Q dt` over `ρ ∈ [lo, hi]` with `t = ρ^q`, `q = 2 − 2s`.
struct Radial<'a> {
    q: f64,
    clamp: f64,
    gl: &'a [(f64, f64)],
}

impl Radial<'_> {
    /// GL in `t` on the panel `[ρa, ρb]`, computed without cancellation near `t = 1`.
    fn panel(&self, ra: f64, rb: f64, f: &mut impl FnMut(f64) -> f64) -> f64 {
        let la = libm::log(ra);
        let ta = libm::exp(self.q * la);
        let dt = ta * libm::expm1(self.q * (libm::log(rb) - la));
        let mut acc = 0.0;
        for &(xi, w) in self.gl {
            let rho = libm::exp(la + libm::log1p(dt * xi / ta) / self.q);
            acc += w * f(rho);
        }
        acc * dt
    }

    fn integrate(&self, lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        if !(hi > lo) {
            return 0.0;
        }
        let mut acc = 0.0;
        if lo <= 0.0 {
            if hi <= self.clamp {
                return f(hi) * libm::pow(hi, self.q);
            }
            let mut b = hi;
            while b > self.clamp {
                let a = (b / RADIAL_RATIO).max(self.clamp);
                acc += self.panel(a, b, &mut f);
                b = a;
            }
            acc += f(self.clamp) * libm::pow(self.clamp, self.q);
        } else {
            let mut a = lo;
            while a < hi {
                let b = (a * RADIAL_RATIO).min(hi);
                acc += self.panel(a, b, &mut f);
                a = b;
            }
        }
        acc
    }
}

fn polar(
    u: &dyn ScalarField,
    coeff: &PeriodicCoefficient,
    params: &EnergyParams,
    r: f64,
    rule: &PolarRule,
) -> Result<(f64, f64)> {
    let domain = u.domain();
    let d = domain.dim();
    let outer = OuterPoints::new(domain, &rule.outer, coeff, params.epsilon)?;
    let dirs = sphere_rule(d, rule.directions)?;
    let gl: Vec<(f64, f64)> = GaussLegendre::new(rule.radial_order)?.on(0.0, 1.0).collect();
    let radial = Radial {
        q: 2.0 - 2.0 * params.s,
        clamp: CLAMP * domain.diameter(),
        gl: &gl,
    };
    let eps = params.epsilon;
    let sums = par::sum_vec(outer.len(), OUTER_CHUNK, 2, |i, acc| {
        let mut x = [0.0; 3];
        let wx = outer.get(i, &mut x[..d]);
        let x = &x[..d];
        let ux = u.value(x);
        acc[1] += wx * ux * ux;
        let mut y = [0.0; 3];
        for k in 0..d {
            y[k] = x[k] / eps;
        }
        let ax = coeff.evaluate(&y[..d]);
        let mut intervals = Vec::with_capacity(2);
        let mut inner = 0.0;
        for (nu, wn) in &dirs {
            domain.ray_intervals(x, nu, &mut intervals);
            let mut along = 0.0;
            for &(lo, hi) in &intervals {
                let hi = hi.min(r);
                along += radial.integrate(lo, hi, |rho| {
                    let mut p = [0.0; 3];
                    for k in 0..d {
                        p[k] = x[k] + rho * nu[k];
                    }
                    let q = (u.value(&p[..d]) - ux) / rho;
                    q * q
                });
            }
            inner += wn * along;
        }
        acc[0] += wx * ax * 0.5 * inner;
    });
    Ok((sums[0], sums[1]))
}

fn monte_carlo(
    u: &dyn ScalarField,
    coeff: &PeriodicCoefficient,
    params: &EnergyParams,
    r: f64,
    samples: u64,
    seed: u64,
) -> (f64, f64, f64) {
    let domain = u.domain();
    let d = domain.dim();
    let q = 2.0 - 2.0 * params.s;
    let clamp = CLAMP * domain.diameter();
    let n = samples as usize;
    let chunks = n.div_ceil(MC_CHUNK);
    let eps = params.epsilon;
    // Per chunk: Σf, Σf², Σu².
    let parts = par::map(chunks, |c| {
        let mut g = rng::stream(seed, c as u64);
        let start = c * MC_CHUNK;
        let end = (start + MC_CHUNK).min(n);
        let mut acc = [0.0; 3];
        let mut x = [0.0; crate::MAX_DIM];
        let mut nu = [0.0; crate::MAX_DIM];
        let mut p = [0.0; crate::MAX_DIM];
        let mut y = [0.0; crate::MAX_DIM];
        for _ in start..end {
            domain.sample(&mut g, &mut x[..d]);
            rng::unit_vector(&mut g, &mut nu[..d]);
            let uu = rng::open01(&mut g);
            let rho = (r * libm::exp(libm::log(uu) / q)).max(clamp);
            for k in 0..d {
                p[k] = x[k] + rho * nu[k];
                y[k] = x[k] / eps;
            }
            let ux = u.value(&x[..d]);
            acc[2] += ux * ux;
            if !domain.contains(&p[..d], 0.0) {
                continue;
            }
            let dq = (u.value(&p[..d]) - ux) / rho;
            let f = coeff.evaluate(&y[..d]) * dq * dq;
            acc[0] += f;
            acc[1] += f * f;
        }
        acc
    });
    let col = |k: usize| par::tree_sum(&parts.iter().map(|a| a[k]).collect::<Vec<_>>());
    let (s1, s2, su) = (col(0), col(1), col(2));
    let nf = n as f64;
    let mean = s1 / nf;
    let var = ((s2 / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
    let vol = domain.volume();
    let scale = vol * sphere_measure(d) * 0.5 * libm::pow(r, q);
    (scale * mean, scale * libm::sqrt(var / nf), vol * su / nf)
}

/// Certified bound on the far-field energy discarded by truncating at `r`:
/// `4β σ_{d−1} (1 − s) r^{−2s} / (2s) · ‖u‖²`.
pub fn tail_bound(l2_norm_sq: f64, beta: f64, s: f64, r: f64, d: usize) -> Result<f64> {
    if !(r > 0.0) {
        return Err(invalid("tail bound needs r > 0"));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid("s must lie in (0, 1)"));
    }
    if !(l2_norm_sq >= 0.0) || !(beta > 0.0) || d == 0 {
        return Err(invalid("tail bound needs ‖u‖² >= 0, beta > 0 and d >= 1"));
    }
    Ok(4.0 * beta * sphere_measure(d) * (1.0 - s) * libm::pow(r, -2.0 * s) / (2.0 * s) * l2_norm_sq)
}

/// `r = √(ε √(1 − s))`, the truncation radius with `r^{1−s} → 1`.
pub fn balanced_radius(epsilon: f64, s: f64) -> f64 {
    libm::sqrt(epsilon * libm::sqrt(1.0 - s))
}

/// `r^{1−s}`.
pub fn radius_power(r: f64, s: f64) -> f64 {
    libm::pow(r, 1.0 - s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BbmRow {
    pub s: f64,
    pub energy: f64,
    pub quad_error: f64,
    /// `σ_{d−1}/(2d) ∫_Ω a(x/ε)|∇u|²`
    pub target: f64,
    /// `energy / target`; `None` when the target vanishes.
    pub ratio: Option<f64>,
}

/// Energies along an `s` ladder next to the local limit value.
pub fn bbm_limit_check(
    u: &dyn ScalarField,
    coeff: &PeriodicCoefficient,
    epsilon: f64,
    s_ladder: &[f64],
    quadrature: Quadrature,
) -> Result<Vec<BbmRow>> {
    let domain = u.domain();
    let d = domain.dim();
    let outer_rule = match quadrature {
        Quadrature::Polar(rule) => rule.outer,
        Quadrature::MonteCarlo { .. } => OuterRule::default(),
    };
    let outer = OuterPoints::new(domain, &outer_rule, coeff, epsilon)?;
    let dirichlet = par::sum(outer.len(), OUTER_CHUNK, |i| {
        let mut x = [0.0; 3];
        let w = outer.get(i, &mut x[..d]);
        let mut g = [0.0; 3];
        u.gradient(&x[..d], &mut g[..d]);
        let mut y = [0.0; 3];
        for k in 0..d {
            y[k] = x[k] / epsilon;
        }
        w * coeff.evaluate(&y[..d]) * g[..d].iter().map(|v| v * v).sum::<f64>()
    });
    let target = limit_constant(d) * dirichlet;
    let r = domain.diameter();
    s_ladder
        .iter()
        .map(|&s| {
            let params = EnergyParams {
                epsilon,
                s,
                truncation: Truncation::Radius(r),
                quadrature,
            };
            let rep = energy(u, coeff, &params)?;
            Ok(BbmRow {
                s,
                energy: rep.value,
                quad_error: rep.quad_error,
                target,
                ratio: if target > 0.0 { Some(rep.value / target) } else { None },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::AffineField;

    fn unit_interval_linear() -> AffineField {
        AffineField::new(Domain::cube(1), vec![1.0], 0.0).unwrap()
    }

    fn params(s: f64, r: f64) -> EnergyParams {
        EnergyParams {
            epsilon: 0.5,
            s,
            truncation: Truncation::Radius(r),
            quadrature: Quadrature::default(),
        }
    }

    #[test]
    fn closed_form_one_dimensional() {
        let u = unit_interval_linear();
        let one = PeriodicCoefficient::constant(1, 1.0).unwrap();
        for s in [0.5, 0.9, 0.99, 0.999] {
            let rep = energy(&u, &one, &params(s, 1.0)).unwrap();
            let exact = 1.0 / (3.0 - 2.0 * s);
            assert!((rep.value / exact - 1.0).abs() < 1e-6, "s={s}: {} vs {exact}", rep.value);
            assert!(rep.tail_bound.is_none());
        }
    }

    #[test]
    fn constants_have_zero_energy() {
        let u = AffineField::constant(Domain::cube(2), 3.0);
        let c = PeriodicCoefficient::constant(2, 2.0).unwrap();
        let rep = energy(&u, &c, &params(0.7, 0.5)).unwrap();
        assert_eq!(rep.value, 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        let u = unit_interval_linear();
        let one = PeriodicCoefficient::constant(1, 1.0).unwrap();
        let mut p = params(0.5, 1.0);
        p.truncation = Truncation::Full;
        assert!(energy(&u, &one, &p).is_err());
        assert!(energy(&u, &one, &params(1.0, 1.0)).is_err());
        assert!(energy(&u, &one, &params(0.5, 2.0)).is_err());
        let mut p = params(0.5, 1.0);
        p.quadrature = Quadrature::Polar(PolarRule {
            radial_order: 0,
            ..PolarRule::default()
        });
        assert!(energy(&u, &one, &p).is_err());
    }

    #[test]
    fn tail_bound_examples() {
        assert!((tail_bound(1.0, 1.0, 0.5, 1.0, 1).unwrap() - 4.0).abs() < 1e-14);
        assert!(tail_bound(1.0, 1.0, 1.0 - 1e-12, 1.0, 1).unwrap() < 1e-10);
        assert!(tail_bound(1.0, 1.0, 0.5, 0.0, 1).is_err());
    }

    #[test]
    fn monte_carlo_agrees_with_closed_form() {
        let u = unit_interval_linear();
        let one = PeriodicCoefficient::constant(1, 1.0).unwrap();
        let p = EnergyParams {
            epsilon: 0.5,
            s: 0.5,
            truncation: Truncation::Full,
            quadrature: Quadrature::MonteCarlo { samples: 200_000, seed: 3 },
        };
        let rep = energy(&u, &one, &p).unwrap();
        let se = rep.std_error.unwrap();
        assert!((rep.value - 0.5).abs() < 5.0 * se, "{} ± {se}", rep.value);
    }

    #[test]
    fn two_dimensional_linear_limit() {
        let u = AffineField::new(Domain::cube(2), vec![1.0, 0.0], 0.0).unwrap();
        let one = PeriodicCoefficient::constant(2, 1.0).unwrap();
        let rule = PolarRule {
            outer: OuterRule { panels: 4, order: 4, grading: 10 },
            radial_order: 4,
            directions: 16,
        };
        let rows = bbm_limit_check(&u, &one, 0.5, &[0.999], Quadrature::Polar(rule)).unwrap();
        assert!((rows[0].target - PI / 2.0).abs() < 1e-12);
        assert!((rows[0].ratio.unwrap() - 1.0).abs() < 0.01, "{:?}", rows[0]);
    }
}
