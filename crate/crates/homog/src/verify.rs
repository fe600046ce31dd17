//! Property suite behind `homog verify` and `homog kuhn-check`.

use std::time::Instant;

use homog_core::cell_problem::{homogenized_matrix, solve_corrector, Corrector, Interpolation, TorusGrid};
use homog_core::coefficient::{FourierTerm, PeriodicCoefficient, Trig};
use homog_core::domain::Domain;
use homog_core::energy::{energy, EnergyParams, PolarRule, Quadrature, Truncation};
use homog_core::field::{AffineField, GridField};
use homog_core::geometry::Simplex;
use homog_core::lattice;
use homog_core::quadrature::OuterRule;
use homog_core::recovery::{build_cutoff, truncate};
use homog_core::study::{self, Coupling, CorrectorCache, ExperimentConfig, NoClock, RadiusRule, Target};
use homog_core::rng;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {:<28} {} ({:.2}s)", self.name, self.detail, self.seconds)
    }
}

fn run(name: &str, f: impl FnOnce() -> Result<(bool, String), CliError>) -> Check {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(v) => v,
        Err(e) => (false, e.to_string()),
    };
    Check {
        name: name.to_string(),
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Smooth random field on the unit cube sampled at `nodes` points per axis:
/// a few random Fourier modes plus a random affine part.
pub fn random_grid_field(d: usize, nodes: usize, seed: u64) -> Result<GridField, CliError> {
    let mut g = rng::stream(seed, 0);
    let modes: Vec<(Vec<f64>, f64, f64)> = (0..4)
        .map(|_| {
            let k: Vec<f64> = (0..d).map(|_| (rng::open01(&mut g) * 3.0).floor() + 1.0).collect();
            let amp = rng::standard_normal(&mut g);
            let phase = rng::open01(&mut g) * std::f64::consts::TAU;
            (k, amp, phase)
        })
        .collect();
    let slope: Vec<f64> = (0..d).map(|_| rng::standard_normal(&mut g)).collect();
    let f = move |x: &[f64]| {
        let mut v: f64 = slope.iter().zip(x).map(|(a, b)| a * b).sum();
        for (k, amp, phase) in &modes {
            let arg: f64 = k.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() * std::f64::consts::PI + phase;
            v += 0.3 * amp * arg.sin();
        }
        v
    };
    Ok(GridField::from_fn(Domain::cube(d), vec![nodes; d], f)?)
}

/// Effective-energy bounds of a corrector: harmonic mean of `a` times `|z|²`
/// at most the discrete energy, which is at most the arithmetic mean times `|z|²`.
pub fn cell_bounds_hold(coeff: &PeriodicCoefficient, corrector: &Corrector) -> Result<(bool, String), CliError> {
    let grid = corrector.grid;
    let d = grid.dim();
    let mut y = [0.0; 3];
    let (mut mean, mut inv) = (0.0, 0.0);
    for i in 0..grid.len() {
        grid.point(i, &mut y[..d]);
        let a = coeff.evaluate(&y[..d]);
        mean += a;
        inv += 1.0 / a;
    }
    mean /= grid.len() as f64;
    let harmonic = grid.len() as f64 / inv;
    let z2: f64 = corrector.z.iter().map(|v| v * v).sum();
    let e = corrector.energy(coeff)?;
    let tol = 1e-10 * mean * z2;
    let ok = e <= mean * z2 + tol && e >= harmonic * z2 - tol;
    Ok((ok, format!("{:.6} <= {e:.6} <= {:.6}", harmonic * z2, mean * z2)))
}

fn check_coefficient_bounds() -> Result<(bool, String), CliError> {
    let coeffs = [
        PeriodicCoefficient::two_phase_layers(1, 1.0, 4.0, 0.01)?,
        PeriodicCoefficient::checkerboard(2, 1.0, 4.0, 0.01)?,
        PeriodicCoefficient::fourier(2, 1.0, vec![FourierTerm::new(vec![1, 1], 0.5, vec![Trig::Sin, Trig::Sin])])?,
    ];
    let mut g = rng::stream(11, 0);
    let mut worst = 0.0f64;
    for c in &coeffs {
        let d = c.dim();
        for _ in 0..10_000 {
            let y: Vec<f64> = (0..d).map(|_| 4.0 * rng::open01(&mut g) - 2.0).collect();
            let a = c.evaluate(&y);
            worst = worst.max(c.alpha() - a).max(a - c.beta());
        }
    }
    Ok((worst <= 0.0, format!("max bound violation {worst:e}")))
}

fn check_cell_bounds() -> Result<(bool, String), CliError> {
    let c1 = PeriodicCoefficient::two_phase_layers(1, 1.0, 4.0, 0.01)?;
    let cor1 = solve_corrector(&c1, &[1.0], TorusGrid::new(1, 256)?, 1e-10)?;
    let (ok1, d1) = cell_bounds_hold(&c1, &cor1)?;
    let c2 = PeriodicCoefficient::checkerboard(2, 1.0, 4.0, 0.05)?;
    let sol = homogenized_matrix(&c2, TorusGrid::new(2, 64)?, 1e-10)?;
    let (ok2, d2) = cell_bounds_hold(&c2, &sol.correctors[0])?;
    let a = &sol.a_hom;
    let sym = (a[0][1] - a[1][0]).abs() <= 1e-10 * a[0][0];
    Ok((ok1 && ok2 && sym, format!("1D {d1}; 2D {d2}; symmetric {sym}")))
}

fn check_closed_form_energy() -> Result<(bool, String), CliError> {
    let u = AffineField::new(Domain::cube(1), vec![1.0], 0.0)?;
    let c = PeriodicCoefficient::constant(1, 1.0)?;
    let mut worst = 0.0f64;
    for s in [0.5, 0.9] {
        let rep = energy(
            &u,
            &c,
            &EnergyParams {
                epsilon: 0.5,
                s,
                truncation: Truncation::Radius(1.0),
                quadrature: Quadrature::default(),
            },
        )?;
        let exact = 1.0 / (3.0 - 2.0 * s);
        worst = worst.max((rep.value - exact).abs() / exact);
    }
    Ok((worst <= 1e-6, format!("max relative error {worst:.2e}")))
}

/// Kuhn partition: volumes sum to `ρ^d` and no sample lies inside two simplices.
pub fn check_kuhn_partition(dims: &[usize], frames: usize, samples: usize) -> Result<(bool, String), CliError> {
    let mut worst = 0.0f64;
    let mut overlaps = 0;
    let mut uncovered = 0;
    for &d in dims {
        for f in 0..frames {
            let mut g = rng::stream(0x6b75_686e + d as u64, f as u64);
            let frame = lattice::sample_frame(&mut g, d)?;
            let rho = 0.1 + rng::open01(&mut g);
            let anchor: Vec<f64> = (0..d).map(|_| rng::standard_normal(&mut g)).collect();
            let rep = lattice::partition_check(&mut g, rho, &frame, &anchor, samples)?;
            worst = worst.max((rep.volume_sum - rep.expected_volume).abs() / rep.expected_volume);
            overlaps += rep.overlaps;
            uncovered += rep.uncovered;
        }
    }
    Ok((
        worst <= 1e-12 && overlaps == 0 && uncovered == 0,
        format!("d in {dims:?}: volume error {worst:.1e}, {overlaps} overlaps, {uncovered} uncovered"),
    ))
}

/// Per-simplex discrete Jensen inequality on random grid fields in `d`.
pub fn check_discrete_jensen(d: usize, fields: usize) -> Result<(bool, String), CliError> {
    let mut worst = f64::INFINITY;
    let mut checked = 0;
    for i in 0..fields {
        let u = random_grid_field(d, 17, 0x6a65_6e73 + i as u64)?;
        let mut g = rng::stream(0x6672_616d, i as u64);
        let frame = lattice::sample_frame(&mut g, d)?;
        let rho = 0.05 + 0.1 * rng::open01(&mut g);
        let interp = lattice::cube_average_interpolant(&u, 1.0, rho, &frame)?;
        for k in interp.coarse_cubes().take(8) {
            for tau in lattice::permutations(d) {
                let (lhs, rhs) = lattice::discrete_jensen(&u, 1.0, rho, &frame, k, &tau)?;
                worst = worst.min(rhs - lhs);
                checked += 1;
            }
        }
    }
    Ok((worst >= -1e-8, format!("{checked} simplices, min slack {worst:.2e}")))
}

/// Sampled derivative bounds of the cut-off on a regular triangle.
pub fn check_cutoff() -> Result<(bool, String), CliError> {
    let s = Simplex::regular(2)?;
    let eps = s.inradius() / 10.0;
    let c = build_cutoff(&s, eps)?;
    let cert = c.certificate();
    Ok((
        cert.max_gradient <= cert.gradient_cap * (1.0 + 1e-6) && cert.max_hessian <= cert.hessian_cap * (1.0 + 1e-6),
        format!(
            "|grad| {:.4}/{:.4}, |hess| {:.2}/{:.2}, {} ridge samples skipped",
            cert.max_gradient, cert.gradient_cap, cert.max_hessian, cert.hessian_cap, cert.skipped
        ),
    ))
}

fn grid_params(r: f64) -> EnergyParams {
    EnergyParams {
        epsilon: 0.3,
        s: 0.5,
        truncation: Truncation::Radius(r),
        quadrature: Quadrature::Polar(PolarRule {
            outer: OuterRule {
                panels: 8,
                order: 4,
                grading: 8,
            },
            radial_order: 4,
            directions: 16,
        }),
    }
}

fn check_truncation(fields: usize) -> Result<(bool, String), CliError> {
    let coeff = PeriodicCoefficient::fourier(2, 1.0, vec![FourierTerm::cosine(vec![1, 0], 0.3)])?;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..fields {
        let u = random_grid_field(2, 9, 0x7472_756e + i as u64)?;
        let level = 0.5 * u.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let p = grid_params(1.0);
        let full = energy(&u, &coeff, &p)?;
        let cut = energy(&truncate(&u, level)?, &coeff, &p)?;
        worst = worst.max(cut.value - full.value - cut.quad_error - full.quad_error);
    }
    Ok((worst <= 0.0, format!("max F(u^M) - F(u) - quad errors = {worst:.2e}")))
}

/// Far-field tail bound against the measured energy difference between two radii.
pub fn check_tail_bound(fields: usize) -> Result<(bool, String), CliError> {
    let coeff = PeriodicCoefficient::fourier(2, 1.0, vec![FourierTerm::cosine(vec![1, 1], 0.4)])?;
    let mut worst = f64::NEG_INFINITY;
    let diam = Domain::cube(2).diameter();
    for i in 0..fields {
        let u = random_grid_field(2, 9, 0x7461_696c + i as u64)?;
        let far = energy(&u, &coeff, &grid_params(0.5 * diam))?;
        let near = energy(&u, &coeff, &grid_params(0.1 * diam))?;
        let allowed = near.tail_bound.unwrap_or(0.0) + 2.0 * near.quad_error.max(far.quad_error);
        worst = worst.max((far.value - near.value).abs() - allowed);
    }
    Ok((worst <= 0.0, format!("max excess over bound {worst:.2e}")))
}

/// Smoothed 2D checkerboard at `n` points per axis and its `4/a` dual.
pub fn checkerboard(n: usize) -> Result<(f64, f64), CliError> {
    let c = PeriodicCoefficient::checkerboard(2, 1.0, 4.0, 0.01)?;
    let dual = c.reciprocal_scaled(4.0)?;
    let grid = TorusGrid::new(2, n)?;
    let a = homogenized_matrix(&c, grid, 1e-10)?;
    let b = homogenized_matrix(&dual, grid, 1e-10)?;
    Ok((a.a_hom[0][0], a.a_hom[0][0] * b.a_hom[0][0]))
}

fn check_checkerboard() -> Result<(bool, String), CliError> {
    let (a, prod) = checkerboard(512)?;
    Ok((
        (a - 2.0).abs() <= 0.1 && (prod - 4.0).abs() <= 0.2,
        format!("A_hom {a:.6}, duality product {prod:.6}"),
    ))
}

/// The 2D affine-target scaling study with `a = 1 + ½ sin(2πy₁) sin(2πy₂)`.
pub fn product_sine_study() -> Result<ExperimentConfig, CliError> {
    Ok(ExperimentConfig {
        domain: Domain::cube(2),
        coefficient: PeriodicCoefficient::fourier(2, 1.0, vec![FourierTerm::new(vec![1, 1], 0.5, vec![Trig::Sin, Trig::Sin])])?,
        target: Target::Affine {
            z: vec![1.0, 0.0],
            offset: 0.0,
        },
        epsilon_ladder: vec![0.1, 0.05],
        coupling: Coupling::Exponent(3.0),
        radius: RadiusRule::Balanced,
        quadrature: PolarRule::default(),
        panels_per_period: 2,
        cell_points: 128,
        cell_tol: 1e-10,
        interpolation: Interpolation::CubicBSpline,
    })
}

fn check_study_2d() -> Result<(bool, String), CliError> {
    let cfg = product_sine_study()?;
    let rows = study::run_scaling_study(&cfg, &mut CorrectorCache::new(), &NoClock, &mut |_| {})
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let last = rows.last().map(|r| r.ratio).unwrap_or(f64::NAN);
    Ok(((last - 1.0).abs() <= 0.15, format!("final ratio {last:.5}")))
}

/// Partition and Jensen suites for `kuhn-check`.
pub fn kuhn_suite(d: Option<usize>) -> Result<Vec<Check>, CliError> {
    let dims: Vec<usize> = match d {
        Some(d) if (1..=4).contains(&d) => vec![d],
        Some(d) => return Err(CliError::Config(format!("--d must be between 1 and 4, got {d}"))),
        None => vec![1, 2, 3, 4],
    };
    let jensen_dims: Vec<usize> = dims.iter().copied().filter(|&d| d <= 3).collect();
    let mut out = vec![run("kuhn partition", || check_kuhn_partition(&dims, 100, 10_000))];
    for d in jensen_dims {
        out.push(run(&format!("discrete jensen d={d}"), || check_discrete_jensen(d, 10)));
    }
    Ok(out)
}

/// Every property check; `full` adds the 2D checkerboard and scaling study.
pub fn verify_suite(full: bool) -> Vec<Check> {
    let mut out = vec![
        run("coefficient bounds", check_coefficient_bounds),
        run("cell bounds and symmetry", check_cell_bounds),
        run("closed-form energies", check_closed_form_energy),
        run("kuhn partition", || check_kuhn_partition(&[1, 2, 3, 4], 10, 1_000)),
        run("discrete jensen", || check_discrete_jensen(2, 5)),
        run("cut-off bounds", check_cutoff),
        run("truncation monotonicity", || check_truncation(3)),
        run("tail-bound consistency", || check_tail_bound(2)),
    ];
    if full {
        out.push(run("2D checkerboard", check_checkerboard));
        out.push(run("2D scaling study", check_study_2d));
    }
    out
}
