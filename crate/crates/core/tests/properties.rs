use homog_core::cell_problem::{homogenized_matrix, TorusGrid};
use homog_core::coefficient::{FourierTerm, PeriodicCoefficient, Trig};
use homog_core::domain::Domain;
use homog_core::energy::{energy, EnergyParams, PolarRule, Quadrature, Truncation};
use homog_core::quadrature::OuterRule;
use homog_core::field::{AffineField, GridField};
use homog_core::lattice::{self, OrthonormalFrame};
use homog_core::recovery::{ramp, truncate};
use homog_core::rng;
use proptest::prelude::*;

fn frame(d: usize, seed: u64) -> OrthonormalFrame {
    lattice::sample_frame(&mut rng::stream(seed, 3), d).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kuhn_volumes_fill_the_cube(d in 1usize..=4, seed in any::<u64>(), rho in 0.01f64..3.0) {
        let f = frame(d, seed);
        let anchor: Vec<f64> = (0..d).map(|i| (seed % 7) as f64 * 0.1 - i as f64).collect();
        let simplices = lattice::kuhn_decompose(rho, &f, &anchor).unwrap();
        let factorial: usize = (1..=d).product();
        prop_assert_eq!(simplices.len(), factorial);
        let total: f64 = simplices.iter().map(|s| s.volume()).sum();
        prop_assert!((total / rho.powi(d as i32) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frames_are_orthonormal(d in 1usize..=4, seed in any::<u64>()) {
        let f = frame(d, seed);
        for (i, a) in f.vectors().iter().enumerate() {
            for (j, b) in f.vectors().iter().enumerate() {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn affine_fields_interpolate_to_their_slope(
        d in 1usize..=3,
        seed in any::<u64>(),
        z in proptest::collection::vec(-3.0f64..3.0, 3),
        rho in 0.08f64..0.2,
    ) {
        let u = AffineField::new(Domain::cube(d), z[..d].to_vec(), 0.7).unwrap();
        let interp = lattice::cube_average_interpolant(&u, 1.0, rho, &frame(d, seed)).unwrap();
        let pieces = interp.pieces();
        prop_assert!(!pieces.is_empty());
        for p in pieces {
            for (g, want) in p.gradient.iter().zip(&z[..d]) {
                prop_assert!((g - want).abs() < 1e-9, "{g} vs {want}");
            }
        }
    }

    #[test]
    fn coefficients_respect_bounds_and_period(
        y in proptest::collection::vec(-50.0f64..50.0, 2),
        k in proptest::collection::vec(-5i32..5, 2),
        alpha in 0.5f64..2.0,
        contrast in 1.0f64..10.0,
    ) {
        let coeffs = [
            PeriodicCoefficient::checkerboard(2, alpha, alpha * contrast, 0.02).unwrap(),
            PeriodicCoefficient::fourier(2, 2.0, vec![FourierTerm::new(vec![1, 2], 0.7, vec![Trig::Sin, Trig::Cos])]).unwrap(),
        ];
        let shifted: Vec<f64> = y.iter().zip(&k).map(|(a, b)| a + *b as f64).collect();
        for c in &coeffs {
            let a = c.evaluate(&y);
            prop_assert!(a >= c.alpha() - 1e-14 && a <= c.beta() + 1e-14);
            prop_assert!((a - c.evaluate(&shifted)).abs() < 1e-9);
        }
    }

    #[test]
    fn ramp_stays_within_its_caps(t in -0.5f64..1.5) {
        let (g, dg, ddg) = ramp(t);
        prop_assert!((0.0..=1.0).contains(&g));
        prop_assert!(dg.abs() <= 2.0 && ddg.abs() <= 4.0);
        // symmetry g(t) + g(1 - t) = 1
        prop_assert!((g + ramp(1.0 - t).0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rho_samples_lie_in_the_unit_interval(s in 0.01f64..0.999, u in 1e-12f64..1.0) {
        let rho = lattice::sample_rho(s, u);
        prop_assert!(rho > 0.0 && rho <= 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    // Truncation is 1-Lipschitz, so with the same nodes every integrand
    // sample can only shrink.
    #[test]
    fn truncation_never_raises_the_energy(seed in any::<u64>(), level in 0.05f64..1.0) {
        let mut g = rng::stream(seed, 0);
        let values: Vec<f64> = (0..33).map(|_| rng::standard_normal(&mut g)).collect();
        let u = GridField::new(Domain::cube(1), vec![33], values).unwrap();
        let coeff = PeriodicCoefficient::two_phase_layers(1, 1.0, 4.0, 0.05).unwrap();
        let params = EnergyParams {
            epsilon: 0.1,
            s: 0.5,
            truncation: Truncation::Radius(0.5),
            quadrature: Quadrature::Polar(PolarRule {
                outer: OuterRule { panels: 32, order: 4, grading: 0 },
                radial_order: 4,
                directions: 2,
            }),
        };
        let full = energy(&u, &coeff, &params).unwrap().value;
        let cut = energy(&truncate(&u, level).unwrap(), &coeff, &params).unwrap().value;
        prop_assert!(cut <= full * (1.0 + 1e-12), "{cut} > {full}");
    }
}

/// Harmonic mean of a 1D two-phase coefficient by composite Simpson on 1/a.
fn harmonic_mean(c: &PeriodicCoefficient, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let mut sum = 0.0;
    for i in 0..n {
        let x0 = i as f64 * h;
        let f = |x: f64| 1.0 / c.evaluate(&[x]);
        sum += h / 6.0 * (f(x0) + 4.0 * f(x0 + h / 2.0) + f(x0 + h));
    }
    1.0 / sum
}

#[test]
fn one_dimensional_cell_problem_gives_harmonic_mean() {
    for (alpha, beta) in [(1.0, 4.0), (0.5, 9.0), (2.0, 3.0)] {
        let c = PeriodicCoefficient::two_phase_layers(1, alpha, beta, 0.02).unwrap();
        let sol = homogenized_matrix(&c, TorusGrid::new(1, 2048).unwrap(), 1e-12).unwrap();
        let want = harmonic_mean(&c, 20_000);
        assert!((sol.a_hom[0][0] / want - 1.0).abs() < 5e-3, "{} vs {want}", sol.a_hom[0][0]);
    }
}

#[test]
fn constant_coefficient_energy_matches_closed_form() {
    // ∫∫_{(0,1)²} |x - y|^{1-2s} dx dy = 1 / ((1 - s)(3 - 2s)), times (1 - s).
    let u = AffineField::new(Domain::cube(1), vec![1.0], 0.0).unwrap();
    let c = PeriodicCoefficient::constant(1, 1.0).unwrap();
    for s in [0.3, 0.75] {
        let rep = energy(
            &u,
            &c,
            &EnergyParams { epsilon: 0.3, s, truncation: Truncation::Radius(1.0), quadrature: Quadrature::default() },
        )
        .unwrap();
        let want = 1.0 / (3.0 - 2.0 * s);
        assert!((rep.value / want - 1.0).abs() < 1e-6, "s={s}: {} vs {want}", rep.value);
    }
}
