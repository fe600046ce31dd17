//! Scaling studies: energies of recovery fields along an epsilon ladder next
//! to the homogenized limit value.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::cell_problem::{solve_corrector, GridProfile, Interpolation, PeriodicProfile, TorusGrid};
use crate::coefficient::PeriodicCoefficient;
use crate::domain::Domain;
use crate::energy::{self, EnergyParams, PolarRule, Quadrature, Truncation};
use crate::error::{check_dim, invalid, Error, Result};
use crate::field::ScalarField;
use crate::recovery::{PiecewiseAffineTarget, RecoveryAffine, RecoveryPiecewise};
use crate::{limit_constant, linalg};

/// The function whose homogenized energy is approximated.
#[derive(Debug, Clone)]
pub enum Target {
    Affine { z: Vec<f64>, offset: f64 },
    Piecewise(PiecewiseAffineTarget),
}

/// How `s` follows `ε` along the ladder.
#[derive(Debug, Clone, PartialEq)]
pub enum Coupling {
    /// `s(ε) = 1 − ε^γ`.
    Exponent(f64),
    /// Explicit `(ε, s)` pairs; these replace the ladder.
    Pairs(Vec<(f64, f64)>),
}

/// Truncation radius as a function of `(ε, s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusRule {
    /// `r = ε`.
    Epsilon,
    /// `r = √(ε √(1 − s))`.
    Balanced,
    Explicit(f64),
}

impl RadiusRule {
    pub fn radius(&self, epsilon: f64, s: f64) -> f64 {
        match *self {
            RadiusRule::Epsilon => epsilon,
            RadiusRule::Balanced => energy::balanced_radius(epsilon, s),
            RadiusRule::Explicit(r) => r,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub domain: Domain,
    pub coefficient: PeriodicCoefficient,
    pub target: Target,
    pub epsilon_ladder: Vec<f64>,
    pub coupling: Coupling,
    pub radius: RadiusRule,
    pub quadrature: PolarRule,
    /// Outer panels per period `ε` along each axis of a box domain; the
    /// outer rule is refined so that panel edges fall on period boundaries.
    pub panels_per_period: usize,
    /// Corrector grid points per axis.
    pub cell_points: usize,
    pub cell_tol: f64,
    pub interpolation: Interpolation,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let d = self.domain.dim();
        check_dim(d, self.coefficient.dim())?;
        match &self.target {
            Target::Affine { z, .. } => check_dim(d, z.len())?,
            Target::Piecewise(t) => check_dim(d, t.domain().dim())?,
        }
        if d > 3 {
            return Err(invalid("scaling studies support d <= 3"));
        }
        let ladder = self.ladder();
        if ladder.iter().any(|&(e, s)| !(e > 0.0 && e < 1.0) || !(s > 0.0 && s < 1.0)) {
            return Err(invalid("ladder entries need ε in (0, 1) and s in (0, 1)"));
        }
        if ladder.windows(2).any(|w| !(w[1].0 < w[0].0)) {
            return Err(invalid("epsilon ladder must be strictly decreasing"));
        }
        if let Coupling::Exponent(g) = self.coupling {
            if !(g > 0.0) {
                return Err(invalid("coupling exponent must be positive"));
            }
        }
        if let RadiusRule::Explicit(r) = self.radius {
            if !(r > 0.0) {
                return Err(invalid("explicit radius must be positive"));
            }
        }
        if self.panels_per_period == 0 {
            return Err(invalid("need at least one outer panel per period"));
        }
        self.quadrature.validate()?;
        TorusGrid::new(d, self.cell_points)?;
        if !(self.cell_tol > 0.0) {
            return Err(invalid("cell tolerance must be positive"));
        }
        Ok(())
    }

    /// The `(ε, s)` entries of the ladder.
    pub fn ladder(&self) -> Vec<(f64, f64)> {
        match &self.coupling {
            Coupling::Exponent(g) => self
                .epsilon_ladder
                .iter()
                .map(|&e| (e, 1.0 - libm::pow(e, *g)))
                .collect(),
            Coupling::Pairs(p) => p.clone(),
        }
    }

    /// Polar rule for one ladder entry, with period-aligned outer panels.
    pub fn rule_for(&self, epsilon: f64) -> PolarRule {
        let mut rule = self.quadrature;
        if let Domain::Box { lo, hi } = &self.domain {
            let extent = lo.iter().zip(hi).map(|(a, b)| b - a).fold(0.0, f64::max);
            let periods = libm::ceil(extent / epsilon - 1e-9) as usize;
            rule.outer.panels = rule.outer.panels.max(periods * self.panels_per_period);
        }
        rule
    }
}

/// One row of the study output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    pub epsilon: f64,
    pub s: f64,
    pub r: f64,
    pub f_recovery: f64,
    pub f_target_hom: f64,
    pub ratio: f64,
    pub tail_bound: f64,
    pub quad_error: f64,
    pub wall_time_seconds: f64,
}

/// Column names of [`ScalingRow`], in order.
pub const CSV_COLUMNS: [&str; 9] = [
    "epsilon",
    "s",
    "r",
    "F_recovery",
    "F_target_hom",
    "ratio",
    "tail_bound",
    "quad_error",
    "wall_time_seconds",
];

/// Source of wall-clock readings; the core crate has no clock of its own.
pub trait Clock {
    fn seconds(&self) -> f64;
}

/// A clock that always reads zero (reproducible output).
pub struct NoClock;

impl Clock for NoClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}

/// A failure tied to the ladder entry that caused it.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("ladder entry {entry} (epsilon = {epsilon}): {source}")]
pub struct StudyError {
    pub entry: usize,
    pub epsilon: f64,
    pub source: Error,
}

type CacheKey = (u64, usize, Vec<u64>);

/// Correctors keyed by (coefficient fingerprint, grid, direction).
#[derive(Default)]
pub struct CorrectorCache {
    entries: BTreeMap<CacheKey, (Arc<GridProfile>, f64)>,
    solves: usize,
}

impl CorrectorCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of corrector solves performed so far.
    pub fn solves(&self) -> usize {
        self.solves
    }

    /// Interpolated corrector for `z` and the discrete `⟨A_hom z, z⟩`.
    pub fn get(
        &mut self,
        coeff: &PeriodicCoefficient,
        z: &[f64],
        points: usize,
        tol: f64,
        mode: Interpolation,
    ) -> Result<(Arc<GridProfile>, f64)> {
        let key = (coeff.fingerprint(), points, z.iter().map(|v| v.to_bits()).collect::<Vec<u64>>());
        if let Some((p, e)) = self.entries.get(&key) {
            if p.mode() == mode {
                return Ok((p.clone(), *e));
            }
            let p = Arc::new(GridProfile::new(p.grid(), &grid_values(p), mode));
            return Ok((p, *e));
        }
        let grid = TorusGrid::new(coeff.dim(), points)?;
        let cor = solve_corrector(coeff, z, grid, tol)?;
        self.solves += 1;
        let e = cor.energy(coeff)?;
        let p = Arc::new(cor.profile(mode));
        self.entries.insert(key, (p.clone(), e));
        Ok((p, e))
    }
}

/// Nodal values of a profile (exact for both interpolation modes, which
/// interpolate at the nodes).
fn grid_values(p: &GridProfile) -> Vec<f64> {
    let grid = p.grid();
    let d = grid.dim();
    let mut y = [0.0; 3];
    (0..grid.len())
        .map(|i| {
            grid.point(i, &mut y[..d]);
            p.value(&y[..d])
        })
        .collect()
}

/// Recovery field of the configured target at `ε` and its homogenized
/// limit energy.
pub fn recovery_field(
    config: &ExperimentConfig,
    cache: &mut CorrectorCache,
    epsilon: f64,
) -> Result<(alloc::boxed::Box<dyn ScalarField>, f64)> {
    let d = config.domain.dim();
    let c = limit_constant(d);
    match &config.target {
        Target::Affine { z, offset } => {
            let (profile, form) = cache.get(&config.coefficient, z, config.cell_points, config.cell_tol, config.interpolation)?;
            let field = RecoveryAffine::new(config.domain.clone(), z.clone(), *offset, epsilon, profile)?;
            Ok((alloc::boxed::Box::new(field), c * form * config.domain.volume()))
        }
        Target::Piecewise(target) => {
            let mut profiles: Vec<Arc<dyn PeriodicProfile>> = Vec::new();
            let mut total = 0.0;
            for (s, z) in target.simplices().iter().zip(target.gradients()) {
                let (p, form) = cache.get(&config.coefficient, z, config.cell_points, config.cell_tol, config.interpolation)?;
                profiles.push(p);
                total += s.volume() * form;
            }
            let field = RecoveryPiecewise::new(target.clone(), profiles, epsilon)?;
            Ok((alloc::boxed::Box::new(field), c * total))
        }
    }
}

/// Evaluates one ladder entry.
fn run_entry(
    config: &ExperimentConfig,
    cache: &mut CorrectorCache,
    clock: &dyn Clock,
    epsilon: f64,
    s: f64,
    rule: PolarRule,
) -> Result<ScalingRow> {
    let start = clock.seconds();
    let (field, target) = recovery_field(config, cache, epsilon)?;
    let r = config.radius.radius(epsilon, s).min(config.domain.diameter());
    let params = EnergyParams {
        epsilon,
        s,
        truncation: Truncation::Radius(r),
        quadrature: Quadrature::Polar(rule),
    };
    let rep = energy::energy(field.as_ref(), &config.coefficient, &params)?;
    let ratio = if target > 0.0 { rep.value / target } else { f64::NAN };
    Ok(ScalingRow {
        epsilon,
        s,
        r,
        f_recovery: rep.value,
        f_target_hom: target,
        ratio,
        tail_bound: rep.tail_bound.unwrap_or(0.0),
        quad_error: rep.quad_error,
        wall_time_seconds: clock.seconds() - start,
    })
}

/// Runs the ladder in order. Each finished row is handed to `on_row`
/// before the next entry starts, so partial output survives a failure.
pub fn run_scaling_study(
    config: &ExperimentConfig,
    cache: &mut CorrectorCache,
    clock: &dyn Clock,
    on_row: &mut dyn FnMut(&ScalingRow),
) -> core::result::Result<Vec<ScalingRow>, StudyError> {
    config.validate().map_err(|source| StudyError {
        entry: 0,
        epsilon: f64::NAN,
        source,
    })?;
    let mut rows = Vec::new();
    for (entry, (epsilon, s)) in config.ladder().into_iter().enumerate() {
        let row = run_entry(config, cache, clock, epsilon, s, config.rule_for(epsilon))
            .map_err(|source| StudyError { entry, epsilon, source })?;
        on_row(&row);
        rows.push(row);
    }
    Ok(rows)
}

/// `quad_error` of the first ladder entry at the configured and at doubled
/// resolution.
pub fn refinement_check(config: &ExperimentConfig, cache: &mut CorrectorCache) -> Result<(f64, f64)> {
    config.validate()?;
    let (epsilon, s) = *config.ladder().first().ok_or_else(|| invalid("empty ladder"))?;
    let rule = config.rule_for(epsilon);
    let base = run_entry(config, cache, &NoClock, epsilon, s, rule)?;
    let fine = run_entry(config, cache, &NoClock, epsilon, s, rule.doubled())?;
    Ok((base.quad_error, fine.quad_error))
}

/// Whether the coupling `1 − s = ε^γ` satisfies `(1 − s)/ε² → 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    TheoremApplies,
    Open,
}

impl Regime {
    pub fn of(gamma: f64) -> Self {
        if gamma > 2.0 {
            Regime::TheoremApplies
        } else {
            Regime::Open
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Regime::TheoremApplies => "theorem applies",
            Regime::Open => "regime open",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeRow {
    pub gamma: f64,
    pub regime: Regime,
    pub rows: Vec<ScalingRow>,
}

impl RegimeRow {
    pub fn final_ratio(&self) -> Option<f64> {
        self.rows.last().map(|r| r.ratio)
    }
}

/// The study once per `γ`, sharing one corrector cache.
pub fn run_regime_comparison(
    base: &ExperimentConfig,
    gammas: &[f64],
    cache: &mut CorrectorCache,
    clock: &dyn Clock,
    on_row: &mut dyn FnMut(f64, &ScalingRow),
) -> core::result::Result<Vec<RegimeRow>, StudyError> {
    let mut out = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let mut config = base.clone();
        if let Coupling::Pairs(p) = &base.coupling {
            config.epsilon_ladder = p.iter().map(|(e, _)| *e).collect();
        }
        config.coupling = Coupling::Exponent(gamma);
        let rows = run_scaling_study(&config, cache, clock, &mut |row| on_row(gamma, row))?;
        out.push(RegimeRow {
            gamma,
            regime: Regime::of(gamma),
            rows,
        });
    }
    Ok(out)
}

/// `σ_{d−1}/(2d) Σ_i |Δ_i| ⟨A z_i, z_i⟩` for a fixed tensor `A`.
pub fn homogenized_target_energy(a_hom: &[Vec<f64>], target: &PiecewiseAffineTarget) -> f64 {
    let d = a_hom.len();
    let mut total = 0.0;
    for (s, z) in target.simplices().iter().zip(target.gradients()) {
        total += s.volume() * linalg::dot(z, &linalg::mat_vec(a_hom, z));
    }
    limit_constant(d) * total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_config(gamma: f64) -> ExperimentConfig {
        ExperimentConfig {
            domain: Domain::cube(1),
            coefficient: PeriodicCoefficient::constant(1, 1.0).unwrap(),
            target: Target::Affine {
                z: alloc::vec![1.0],
                offset: 0.0,
            },
            epsilon_ladder: alloc::vec![0.1, 0.05, 0.025],
            coupling: Coupling::Exponent(gamma),
            radius: RadiusRule::Explicit(1.0),
            quadrature: PolarRule::default(),
            panels_per_period: 1,
            cell_points: 64,
            cell_tol: 1e-10,
            interpolation: Interpolation::CubicBSpline,
        }
    }

    #[test]
    fn constant_coefficient_ladder_matches_closed_form() {
        let cfg = constant_config(3.0);
        let mut cache = CorrectorCache::new();
        let rows = run_scaling_study(&cfg, &mut cache, &NoClock, &mut |_| {}).unwrap();
        assert_eq!(cache.solves(), 1);
        for row in &rows {
            let exact = 1.0 / (3.0 - 2.0 * row.s);
            assert!((row.f_recovery - exact).abs() < 1e-6 * exact, "{row:?}");
            assert!((row.f_target_hom - 1.0).abs() < 1e-12);
        }
        assert!(rows.windows(2).all(|w| (w[1].ratio - 1.0).abs() < (w[0].ratio - 1.0).abs()));
    }

    #[test]
    fn empty_ladder_gives_no_rows() {
        let mut cfg = constant_config(3.0);
        cfg.epsilon_ladder.clear();
        let rows = run_scaling_study(&cfg, &mut CorrectorCache::new(), &NoClock, &mut |_| {}).unwrap();
        assert!(rows.is_empty());
    }

    #[test]
    fn ladder_must_decrease() {
        let mut cfg = constant_config(3.0);
        cfg.epsilon_ladder = alloc::vec![0.05, 0.1];
        let err = run_scaling_study(&cfg, &mut CorrectorCache::new(), &NoClock, &mut |_| {}).unwrap_err();
        assert!(matches!(err.source, Error::InvalidParameter(_)));
    }

    #[test]
    fn regime_labels() {
        assert_eq!(Regime::of(4.0).label(), "theorem applies");
        assert_eq!(Regime::of(2.0).label(), "regime open");
        assert_eq!(Regime::of(2.0000001), Regime::TheoremApplies);
    }
}
