//! Subcommand bodies. Each returns `Ok(())` on success; `main` maps errors
//! to exit codes.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use homog_core::cell_problem::{homogenized_matrix, TorusGrid};
use homog_core::domain::Domain;
use homog_core::energy::{energy, EnergyParams, Quadrature, Truncation};
use homog_core::field::{AffineField, GridField, ScalarField};
use homog_core::lattice;
use homog_core::rng;
use homog_core::study::{self, Clock, Coupling, CorrectorCache, ScalingRow};

use crate::config::{Config, FieldSpec};
use crate::output::{self, fmt_f64, LockFile, RegimeSummary, RowWriter, Summary};
use crate::verify::{self, Check};
use crate::CliError;

/// Seconds since construction.
pub struct WallClock(Instant);

impl WallClock {
    pub fn new() -> Self {
        Self(Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Options shared by the two study commands.
#[derive(Debug, Clone, Default)]
pub struct StudyOptions {
    /// Overrides the config's `output`.
    pub output: Option<PathBuf>,
    /// Record wall times; off gives byte-identical CSVs across runs.
    pub timing: bool,
    pub plot_script: bool,
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

fn output_path(cfg: &Config, opts: &StudyOptions) -> Result<PathBuf, CliError> {
    opts.output
        .clone()
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| CliError::Config("no output path: set `output` or pass --output".into()))
}

/// Writes `value` at the grid points of the bounding box of `domain` that
/// lie inside it, as `x0,..,value` rows.
pub fn write_grid_csv(
    path: &Path,
    domain: &Domain,
    nodes: usize,
    value: impl Fn(&[f64]) -> Option<f64>,
) -> Result<usize, CliError> {
    if nodes < 2 {
        return Err(CliError::Config("grid export needs at least 2 nodes per axis".into()));
    }
    let d = domain.dim();
    let (lo, hi) = domain.bounding_box();
    let mut w = csv::Writer::from_path(path).map_err(numerical)?;
    let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    header.push("value".into());
    w.write_record(&header).map_err(numerical)?;
    let total = nodes.pow(d as u32);
    let mut x = vec![0.0; d];
    let mut written = 0;
    for idx in 0..total {
        let mut rest = idx;
        for k in 0..d {
            let i = rest % nodes;
            rest /= nodes;
            x[k] = lo[k] + (hi[k] - lo[k]) * i as f64 / (nodes - 1) as f64;
        }
        if !domain.contains(&x, 1e-12) {
            continue;
        }
        if let Some(v) = value(&x) {
            let mut rec: Vec<String> = x.iter().map(|v| fmt_f64(*v)).collect();
            rec.push(fmt_f64(v));
            w.write_record(&rec).map_err(numerical)?;
            written += 1;
        }
    }
    w.flush()?;
    Ok(written)
}

#[derive(Serialize)]
struct CellReport {
    a_hom: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
    alpha: f64,
    beta: f64,
    points_per_axis: usize,
    iterations: Vec<usize>,
    residual: f64,
}

/// Effective tensor of the configured coefficient; optionally the nodal
/// correctors as `direction,node,y0,..,value` rows.
pub fn cell_solve(config: &Path, correctors: Option<&Path>) -> Result<(), CliError> {
    let (cfg, _) = Config::load(config)?;
    let coeff = cfg.coefficient()?;
    let grid = TorusGrid::new(cfg.dimension, cfg.cell_points())?;
    let sol = homogenized_matrix(&coeff, grid, cfg.cell.tol)?;
    if let Some(path) = correctors {
        let d = grid.dim();
        let mut w = csv::Writer::from_path(path).map_err(numerical)?;
        let mut header = vec!["direction".to_string(), "node".to_string()];
        header.extend((0..d).map(|i| format!("y{i}")));
        header.push("value".into());
        w.write_record(&header).map_err(numerical)?;
        let mut y = [0.0; 3];
        for (dir, cor) in sol.correctors.iter().enumerate() {
            for (i, v) in cor.values.iter().enumerate() {
                grid.point(i, &mut y[..d]);
                let mut rec = vec![dir.to_string(), i.to_string()];
                rec.extend(y[..d].iter().map(|v| fmt_f64(*v)));
                rec.push(fmt_f64(*v));
                w.write_record(&rec).map_err(numerical)?;
            }
        }
        w.flush()?;
    }
    let report = CellReport {
        eigenvalues: sol.eigenvalues(),
        a_hom: sol.a_hom.clone(),
        alpha: coeff.alpha(),
        beta: coeff.beta(),
        points_per_axis: grid.points_per_axis(),
        iterations: sol.correctors.iter().map(|c| c.iterations).collect(),
        residual: sol.residual,
    };
    println!("{}", serde_json::to_string_pretty(&report).map_err(numerical)?);
    Ok(())
}

#[derive(Serialize)]
struct EnergyJson {
    value: f64,
    quad_error_estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    tail_bound_if_truncated: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    std_error: Option<f64>,
    epsilon: f64,
    s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    r: Option<f64>,
}

/// Options of the `energy` subcommand.
#[derive(Debug, Clone, Default)]
pub struct EnergyOptions {
    /// Where to write the JSON report; stdout after the value otherwise.
    pub report: Option<PathBuf>,
    /// CSV grid export of the evaluated field.
    pub export_grid: Option<PathBuf>,
    pub grid_nodes: usize,
}

/// Truncated energy of the configured field. Prints the value on its own
/// line, then the JSON report unless it goes to a file.
pub fn energy_cmd(config: &Path, opts: &EnergyOptions) -> Result<(), CliError> {
    let (cfg, _) = Config::load(config)?;
    let epsilon = cfg.epsilon.ok_or_else(|| CliError::Config("missing `epsilon`".into()))?;
    let s = cfg.s.ok_or_else(|| CliError::Config("missing `s`".into()))?;
    let coeff = cfg.coefficient()?;
    let domain = cfg.domain()?;
    let field_spec = cfg
        .field
        .clone()
        .ok_or_else(|| CliError::Config("missing `field`".into()))?;
    let field: Box<dyn ScalarField> = match field_spec {
        FieldSpec::Affine { z, offset } => Box::new(AffineField::new(domain.clone(), z, offset)?),
        FieldSpec::Grid { nodes, values } => Box::new(GridField::new(domain.clone(), nodes, values)?),
        FieldSpec::Recovery => {
            let exp = cfg.experiment_with(Coupling::Pairs(vec![(epsilon, s)]))?;
            study::recovery_field(&exp, &mut CorrectorCache::new(), epsilon)?.0
        }
    };
    let r = cfg.radius_rule().map(|rule| rule.radius(epsilon, s).min(domain.diameter()));
    let quadrature = match cfg.quadrature.monte_carlo_samples {
        Some(samples) => Quadrature::MonteCarlo { samples, seed: cfg.seed },
        None => Quadrature::Polar(cfg.quadrature.polar()),
    };
    let params = EnergyParams {
        epsilon,
        s,
        truncation: r.map_or(Truncation::Full, Truncation::Radius),
        quadrature,
    };
    let rep = energy(field.as_ref(), &coeff, &params)?;
    if let Some(path) = &opts.export_grid {
        write_grid_csv(path, &domain, opts.grid_nodes, |x| Some(field.value(x)))?;
    }
    let json = EnergyJson {
        value: rep.value,
        quad_error_estimate: rep.quad_error,
        tail_bound_if_truncated: rep.tail_bound,
        std_error: rep.std_error,
        epsilon,
        s,
        r,
    };
    println!("{}", fmt_f64(rep.value));
    match &opts.report {
        Some(path) => output::write_json(path, &json)?,
        None => println!("{}", serde_json::to_string_pretty(&json).map_err(numerical)?),
    }
    Ok(())
}

fn study_clock(timing: bool) -> Box<dyn Clock> {
    if timing {
        Box::new(WallClock::new())
    } else {
        Box::new(study::NoClock)
    }
}

fn finish_outputs(out: &Path, opts: &StudyOptions, summary: &Summary<'_>) -> Result<(), CliError> {
    output::write_json(&output::with_suffix(out, ".json"), summary)?;
    if opts.plot_script {
        std::fs::write(output::with_suffix(out, ".gp"), output::plot_script(out))?;
    }
    Ok(())
}

/// Ratio study along the configured ladder; CSV rows are flushed as they finish.
pub fn gamma_study(config: &Path, opts: &StudyOptions) -> Result<Vec<ScalingRow>, CliError> {
    let (cfg, text) = Config::load(config)?;
    let exp = cfg.experiment()?;
    let out = output_path(&cfg, opts)?;
    let _lock = LockFile::acquire(&out)?;
    let mut writer = RowWriter::create(&out, opts.timing)?;
    let mut cache = CorrectorCache::new();
    let clock = study_clock(opts.timing);
    let mut write_err = None;
    let result = study::run_scaling_study(&exp, &mut cache, clock.as_ref(), &mut |row| {
        if write_err.is_none() {
            write_err = writer.write(row).err();
        }
    });
    if let Some(e) = write_err {
        return Err(e);
    }
    let rows = result.map_err(|e| match e.source {
        homog_core::Error::InvalidParameter(_) | homog_core::Error::DimensionMismatch { .. } => {
            CliError::Config(e.to_string())
        }
        _ => CliError::Numerical(e.to_string()),
    })?;
    let summary = Summary {
        command: "gamma-study",
        config_sha256: output::sha256_hex(text.as_bytes()),
        homog_version: env!("CARGO_PKG_VERSION"),
        homog_core_version: homog_core::VERSION,
        rows: rows.len(),
        final_ratio: rows.last().map(|r| r.ratio),
        corrector_solves: cache.solves(),
        regimes: None,
    };
    finish_outputs(&out, opts, &summary)?;
    Ok(rows)
}

/// The study once per `γ`; one CSV with a leading `gamma,annotation` pair
/// on every row and the final ratios in the JSON summary.
pub fn regime_compare(config: &Path, gammas: &[f64], opts: &StudyOptions) -> Result<Vec<RegimeSummary>, CliError> {
    if gammas.is_empty() || gammas.iter().any(|g| !(*g > 0.0)) {
        return Err(CliError::Config("--gammas needs positive exponents".into()));
    }
    let (cfg, text) = Config::load(config)?;
    let base = match cfg.coupling {
        Some(_) => cfg.experiment()?,
        None => cfg.experiment_with(Coupling::Exponent(gammas[0]))?,
    };
    let out = output_path(&cfg, opts)?;
    let _lock = LockFile::acquire(&out)?;
    let mut w = csv::Writer::from_path(&out).map_err(numerical)?;
    let mut header = vec!["gamma", "annotation"];
    header.extend(study::CSV_COLUMNS);
    w.write_record(&header).map_err(numerical)?;
    w.flush()?;
    let mut cache = CorrectorCache::new();
    let clock = study_clock(opts.timing);
    let timing = opts.timing;
    let mut write_err: Option<CliError> = None;
    let result = study::run_regime_comparison(&base, gammas, &mut cache, clock.as_ref(), &mut |gamma, row| {
        if write_err.is_some() {
            return;
        }
        let wall = if timing { row.wall_time_seconds } else { 0.0 };
        let mut rec = vec![fmt_f64(gamma), study::Regime::of(gamma).label().to_string()];
        rec.extend(
            [
                row.epsilon,
                row.s,
                row.r,
                row.f_recovery,
                row.f_target_hom,
                row.ratio,
                row.tail_bound,
                row.quad_error,
                wall,
            ]
            .iter()
            .map(|v| fmt_f64(*v)),
        );
        let res = w.write_record(&rec).map_err(numerical).and_then(|_| w.flush().map_err(CliError::from));
        write_err = res.err();
    });
    if let Some(e) = write_err {
        return Err(e);
    }
    let regimes = result.map_err(|e| CliError::Numerical(e.to_string()))?;
    let table: Vec<RegimeSummary> = regimes
        .iter()
        .map(|r| RegimeSummary {
            gamma: r.gamma,
            annotation: r.regime.label(),
            final_ratio: r.final_ratio(),
        })
        .collect();
    let summary = Summary {
        command: "regime-compare",
        config_sha256: output::sha256_hex(text.as_bytes()),
        homog_version: env!("CARGO_PKG_VERSION"),
        homog_core_version: homog_core::VERSION,
        rows: regimes.iter().map(|r| r.rows.len()).sum(),
        final_ratio: None,
        corrector_solves: cache.solves(),
        regimes: Some(table.clone()),
    };
    finish_outputs(&out, opts, &summary)?;
    let mut stdout = std::io::stdout().lock();
    for r in &table {
        let ratio = r.final_ratio.map_or("-".to_string(), fmt_f64);
        writeln!(stdout, "gamma {:<6} {:<16} final ratio {ratio}", fmt_f64(r.gamma), r.annotation)?;
    }
    Ok(table)
}

fn report(checks: &[Check]) -> Result<(), CliError> {
    let mut stdout = std::io::stdout().lock();
    for c in checks {
        writeln!(stdout, "{c}")?;
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        writeln!(stdout, "all {} checks passed", checks.len())?;
        Ok(())
    } else {
        Err(CliError::Property(format!("failed: {}", failed.join(", "))))
    }
}

/// Partition and Jensen suites; `export` writes the cube-average
/// interpolant of a random field on the unit cube as a CSV grid.
pub fn kuhn_check(d: Option<usize>, export: Option<&Path>) -> Result<(), CliError> {
    let checks = verify::kuhn_suite(d)?;
    if let Some(path) = export {
        let d = d.unwrap_or(2);
        if d > 3 {
            return Err(CliError::Config("interpolant export supports d <= 3".into()));
        }
        let u = verify::random_grid_field(d, 17, 1)?;
        let frame = lattice::sample_frame(&mut rng::stream(1, 0), d)?;
        let interp = lattice::cube_average_interpolant(&u, 1.0, 0.1, &frame)?;
        let nodes = if d == 3 { 21 } else { 81 };
        write_grid_csv(path, &Domain::cube(d), nodes, |x| interp.evaluate(x))?;
    }
    report(&checks)
}

pub fn verify_cmd(full: bool) -> Result<(), CliError> {
    report(&verify::verify_suite(full))
}
