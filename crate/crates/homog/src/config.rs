//! JSON experiment files.
//!
//! One file format serves every subcommand; each subcommand reads the
//! sections it needs and reports the missing ones as config errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use homog_core::cell_problem::{default_points, Interpolation, DEFAULT_TOL};
use homog_core::coefficient::{FourierTerm, PeriodicCoefficient, Trig};
use homog_core::domain::Domain;
use homog_core::energy::PolarRule;
use homog_core::geometry::Simplex;
use homog_core::quadrature::OuterRule;
use homog_core::recovery::PiecewiseAffineTarget;
use homog_core::study::{Coupling, ExperimentConfig, RadiusRule, Target};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    UnitCube,
    /// Simplices as vertex lists.
    Polytope(Vec<Vec<Vec<f64>>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrigSpec {
    Cos,
    Sin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTermSpec {
    pub k: Vec<i32>,
    pub amplitude: f64,
    /// One factor per axis; all cosines when omitted.
    #[serde(default)]
    pub factors: Option<Vec<TrigSpec>>,
}

/// Tagged by `form`, e.g. `{"form": "two_phase", "alpha": 1, "beta": 4}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientSpec {
    Constant {
        value: f64,
    },
    Fourier {
        mean: f64,
        terms: Vec<FourierTermSpec>,
    },
    TwoPhase {
        alpha: f64,
        beta: f64,
        #[serde(default)]
        smoothing: Option<f64>,
    },
    Checkerboard {
        alpha: f64,
        beta: f64,
        #[serde(default)]
        smoothing: Option<f64>,
    },
    Piecewise {
        cells_per_axis: usize,
        table: Vec<f64>,
        #[serde(default)]
        smoothing: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Affine {
        z: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    Piecewise {
        simplices: Vec<Vec<Vec<f64>>>,
        gradients: Vec<Vec<f64>>,
        offsets: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingSpec {
    Gamma(f64),
    Pairs(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TruncationSpec {
    Epsilon,
    Balanced,
    Explicit(f64),
    /// Whole-domain interactions; Monte Carlo `energy` runs only.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    pub panels: usize,
    pub order: usize,
    pub grading: usize,
    pub radial_order: usize,
    pub directions: usize,
    pub panels_per_period: usize,
    /// Monte Carlo samples; polar quadrature when absent.
    pub monte_carlo_samples: Option<u64>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        let p = PolarRule::default();
        Self {
            panels: p.outer.panels,
            order: p.outer.order,
            grading: p.outer.grading,
            radial_order: p.radial_order,
            directions: p.directions,
            panels_per_period: 2,
            monte_carlo_samples: None,
        }
    }
}

impl QuadratureSpec {
    pub fn polar(&self) -> PolarRule {
        PolarRule {
            outer: OuterRule {
                panels: self.panels,
                order: self.order,
                grading: self.grading,
            },
            radial_order: self.radial_order,
            directions: self.directions,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolationSpec {
    Multilinear,
    CubicBSpline,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellSpec {
    /// Grid points per axis; dimension-dependent default when absent.
    pub points: Option<usize>,
    pub tol: f64,
    pub interpolation: InterpolationSpec,
}

impl Default for CellSpec {
    fn default() -> Self {
        Self {
            points: None,
            tol: DEFAULT_TOL,
            interpolation: InterpolationSpec::CubicBSpline,
        }
    }
}

/// Field whose energy the `energy` subcommand evaluates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Affine {
        z: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// Nodal values on a regular grid over the (box) domain, axis 0 fastest.
    Grid { nodes: Vec<usize>, values: Vec<f64> },
    /// The recovery field of `target` at the configured `epsilon`.
    Recovery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub dimension: usize,
    #[serde(default = "default_domain")]
    pub domain: DomainSpec,
    pub coefficient: CoefficientSpec,
    #[serde(default)]
    pub target: Option<TargetSpec>,
    #[serde(default)]
    pub epsilon_ladder: Vec<f64>,
    #[serde(default)]
    pub coupling: Option<CouplingSpec>,
    #[serde(default = "default_truncation")]
    pub truncation: TruncationSpec,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub cell: CellSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Single-evaluation settings for the `energy` subcommand.
    #[serde(default)]
    pub field: Option<FieldSpec>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub s: Option<f64>,
}

fn default_domain() -> DomainSpec {
    DomainSpec::UnitCube
}

fn default_truncation() -> TruncationSpec {
    TruncationSpec::Balanced
}

fn config_error(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Config = serde_json::from_str(text).map_err(config_error)?;
        if cfg.dimension == 0 || cfg.dimension > 3 {
            return Err(CliError::Config("dimension must be 1, 2 or 3".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Ok((Self::from_json(&text)?, text))
    }

    pub fn domain(&self) -> Result<Domain, CliError> {
        let d = self.dimension;
        let dom = match &self.domain {
            DomainSpec::UnitCube => Domain::cube(d),
            DomainSpec::Box { lo, hi } => Domain::new_box(lo.clone(), hi.clone()).map_err(config_error)?,
            DomainSpec::Polytope(s) => {
                let simplices = s
                    .iter()
                    .map(|v| Simplex::new(v.clone()))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(config_error)?;
                Domain::polytope(simplices).map_err(config_error)?
            }
        };
        if dom.dim() != d {
            return Err(CliError::Config("domain dimension differs from `dimension`".into()));
        }
        Ok(dom)
    }

    pub fn coefficient(&self) -> Result<PeriodicCoefficient, CliError> {
        let d = self.dimension;
        let smooth = |s: Option<f64>, m: usize| s.unwrap_or_else(|| PeriodicCoefficient::default_smoothing(m));
        match &self.coefficient {
            CoefficientSpec::Constant { value } => PeriodicCoefficient::constant(d, *value),
            CoefficientSpec::Fourier { mean, terms } => {
                let terms = terms
                    .iter()
                    .map(|t| {
                        let factors = match &t.factors {
                            Some(f) => f
                                .iter()
                                .map(|f| match f {
                                    TrigSpec::Cos => Trig::Cos,
                                    TrigSpec::Sin => Trig::Sin,
                                })
                                .collect(),
                            None => vec![Trig::Cos; t.k.len()],
                        };
                        FourierTerm::new(t.k.clone(), t.amplitude, factors)
                    })
                    .collect();
                PeriodicCoefficient::fourier(d, *mean, terms)
            }
            CoefficientSpec::TwoPhase { alpha, beta, smoothing } => {
                PeriodicCoefficient::two_phase_layers(d, *alpha, *beta, smooth(*smoothing, 2))
            }
            CoefficientSpec::Checkerboard { alpha, beta, smoothing } => {
                PeriodicCoefficient::checkerboard(d, *alpha, *beta, smooth(*smoothing, 2))
            }
            CoefficientSpec::Piecewise {
                cells_per_axis,
                table,
                smoothing,
            } => PeriodicCoefficient::smoothed_piecewise(
                d,
                *cells_per_axis,
                table.clone(),
                smooth(*smoothing, (*cells_per_axis).max(1)),
            ),
        }
        .map_err(config_error)
    }

    pub fn cell_points(&self) -> usize {
        self.cell.points.unwrap_or_else(|| default_points(self.dimension))
    }

    pub fn interpolation(&self) -> Interpolation {
        match self.cell.interpolation {
            InterpolationSpec::Multilinear => Interpolation::Multilinear,
            InterpolationSpec::CubicBSpline => Interpolation::CubicBSpline,
        }
    }

    pub fn target(&self) -> Result<Target, CliError> {
        match self.target.as_ref().ok_or_else(|| CliError::Config("missing `target`".into()))? {
            TargetSpec::Affine { z, offset } => Ok(Target::Affine {
                z: z.clone(),
                offset: *offset,
            }),
            TargetSpec::Piecewise {
                simplices,
                gradients,
                offsets,
            } => {
                let s = simplices
                    .iter()
                    .map(|v| Simplex::new(v.clone()))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(config_error)?;
                Ok(Target::Piecewise(
                    PiecewiseAffineTarget::new(s, gradients.clone(), offsets.clone()).map_err(config_error)?,
                ))
            }
        }
    }

    /// `None` for `full`, which only single Monte Carlo evaluations accept.
    pub fn radius_rule(&self) -> Option<RadiusRule> {
        match self.truncation {
            TruncationSpec::Epsilon => Some(RadiusRule::Epsilon),
            TruncationSpec::Balanced => Some(RadiusRule::Balanced),
            TruncationSpec::Explicit(r) => Some(RadiusRule::Explicit(r)),
            TruncationSpec::Full => None,
        }
    }

    /// The study configuration; validated.
    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        let coupling = match self.coupling.as_ref().ok_or_else(|| CliError::Config("missing `coupling`".into()))? {
            CouplingSpec::Gamma(g) => Coupling::Exponent(*g),
            CouplingSpec::Pairs(p) => Coupling::Pairs(p.clone()),
        };
        self.experiment_with(coupling)
    }

    /// The study configuration with `coupling` in place of the configured one.
    pub fn experiment_with(&self, coupling: Coupling) -> Result<ExperimentConfig, CliError> {
        let radius = self
            .radius_rule()
            .ok_or_else(|| CliError::Config("truncation `full` is only for Monte Carlo energy runs".into()))?;
        let cfg = ExperimentConfig {
            domain: self.domain()?,
            coefficient: self.coefficient()?,
            target: self.target()?,
            epsilon_ladder: self.epsilon_ladder.clone(),
            coupling,
            radius,
            quadrature: self.quadrature.polar(),
            panels_per_period: self.quadrature.panels_per_period,
            cell_points: self.cell_points(),
            cell_tol: self.cell.tol,
            interpolation: self.interpolation(),
        };
        cfg.validate().map_err(config_error)?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STUDY: &str = r#"{
        "dimension": 1,
        "coefficient": {"form": "two_phase", "alpha": 1.0, "beta": 4.0, "smoothing": 0.01},
        "target": {"form": "affine", "z": [1.0]},
        "epsilon_ladder": [0.1, 0.05, 0.025],
        "coupling": {"gamma": 3.0}
    }"#;

    #[test]
    fn minimal_study_parses() {
        let cfg = Config::from_json(STUDY).unwrap();
        let exp = cfg.experiment().unwrap();
        assert_eq!(exp.cell_points, 1024);
        assert_eq!(exp.ladder().len(), 3);
        assert_eq!(exp.radius, RadiusRule::Balanced);
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn bad_configs_are_config_errors() {
        assert!(matches!(Config::from_json("{"), Err(CliError::Config(_))));
        let unknown = STUDY.replace("\"dimension\": 1,", "\"dimension\": 1, \"bogus\": 2,");
        assert!(matches!(Config::from_json(&unknown), Err(CliError::Config(_))));
        let increasing = STUDY.replace("[0.1, 0.05, 0.025]", "[0.025, 0.05]");
        let cfg = Config::from_json(&increasing).unwrap();
        assert!(matches!(cfg.experiment(), Err(CliError::Config(_))));
    }

    #[test]
    fn fourier_factors_default_to_cosines() {
        let text = r#"{"dimension": 2, "coefficient": {"form": "fourier", "mean": 1.0,
            "terms": [{"k": [1, 1], "amplitude": 0.5, "factors": ["sin", "sin"]}, {"k": [0, 2], "amplitude": 0.1}]}}"#;
        let c = Config::from_json(text).unwrap().coefficient().unwrap();
        // sin(π/2)² · 0.5 + cos(π) · 0.1
        assert!((c.evaluate(&[0.25, 0.25]) - 1.4).abs() < 1e-12);
    }
}
