use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spindirac::dirac_sphere::{
    bar_sweep, perturbation_matrix, real_harmonic, solve_conformal_sphere, solve_with_basis, BarSweepSpec,
    SphereBasis, SphereConformalFactor,
};
use spindirac::Error;

fn first_positive(values: &[f64]) -> usize {
    values.iter().position(|&v| v > 1e-9).unwrap()
}

#[test]
fn lowest_truncation_is_exact() {
    let s = solve_conformal_sphere(&SphereConformalFactor::zero(), 1).unwrap();
    assert_eq!(s.values.len(), 4);
    for (v, e) in s.values.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
        assert!((v - e).abs() < 1e-12);
    }
    let e = s.report.positive().next().unwrap();
    assert_eq!((e.complex_multiplicity, e.quaternionic_multiplicity), (2, 1));
    assert!((s.area - 4.0 * PI).abs() < 1e-12);
    assert!((s.lambda_bar - 2.0 * PI.sqrt()).abs() < 1e-12);

    let s = solve_conformal_sphere(&SphereConformalFactor::zero(), 3).unwrap();
    let second = s.report.positive().nth(1).unwrap();
    assert!((second.value - 2.0).abs() < 1e-12);
    assert_eq!(second.complex_multiplicity, 4);
}

#[test]
fn harmonics_are_orthonormal() {
    let basis = SphereBasis::new(9, 4).unwrap();
    assert!(basis.orthonormality_residual() < 1e-12);
    for &(l, m) in &[(1, 0), (2, -1), (3, 2)] {
        let norm = basis.integrate(|t, p| real_harmonic(l, m, t, p).powi(2));
        assert!((norm - 1.0).abs() < 1e-12);
        let cross = basis.integrate(|t, p| real_harmonic(l, m, t, p) * real_harmonic(1, 1, t, p));
        assert!(cross.abs() < 1e-12);
    }
}

#[test]
fn constant_factor_is_invariant() {
    let w = SphereConformalFactor::harmonic(2, 1, 0.3);
    let base = solve_conformal_sphere(&w, 9).unwrap();
    let shifted = solve_conformal_sphere(&w.add(&SphereConformalFactor::constant(0.7)), 9).unwrap();
    assert!((base.lambda_bar - shifted.lambda_bar).abs() < 1e-10);
    assert!((shifted.area - base.area * 1.4f64.exp()).abs() < 1e-9 * shifted.area);
}

#[test]
fn rotation_invariance() {
    let (c, s) = (0.7f64.cos(), 0.7f64.sin());
    let r = [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]];
    let w = SphereConformalFactor::harmonic(2, 0, 0.3).add(&SphereConformalFactor::harmonic(1, 1, 0.2));
    let a = solve_conformal_sphere(&w, 11).unwrap();
    let b = solve_conformal_sphere(&w.rotated(r), 11).unwrap();
    assert!((a.lambda_bar - b.lambda_bar).abs() < 1e-8, "{} vs {}", a.lambda_bar, b.lambda_bar);
    assert!((a.area - b.area).abs() < 1e-10);
}

#[test]
fn single_harmonic_respects_bound() {
    let s = solve_conformal_sphere(&SphereConformalFactor::harmonic(1, 0, 0.2), 11).unwrap();
    assert!(s.lambda_bar > 2.0 * PI.sqrt());
    assert!(s.lambda_bar < 2.0 * PI.sqrt() + 0.1);
}

#[test]
fn zero_amplitude_sweep_is_round() {
    let spec = BarSweepSpec { count: 3, band: 2, amplitude: 0.0, seed: 1, jmax2: 5, include_round: true, tolerance: 1e-9 };
    let r = bar_sweep(&spec).unwrap();
    assert_eq!(r.samples.len(), 4);
    for s in &r.samples {
        assert!((s.lambda_bar - 2.0 * PI.sqrt()).abs() < 1e-10);
        assert!(s.equality_case);
    }
    assert_eq!(r.violations, 0);
}

#[test]
fn perturbation_matrix_at_round_metric() {
    let basis = SphereBasis::new(5, 1).unwrap();
    let zero = SphereConformalFactor::zero();
    let s = solve_with_basis(&zero, &basis).unwrap();
    let i = first_positive(&s.values);
    let p = perturbation_matrix(&zero, &SphereConformalFactor::harmonic(1, 0, 1.0), &basis, &s, i..i + 2);
    assert!((p[(0, 0)] + p[(1, 1)]).norm() < 1e-12);
    let p = perturbation_matrix(&zero, &SphereConformalFactor::constant(0.5), &basis, &s, i..i + 2);
    for a in 0..2 {
        for b in 0..2 {
            let want = if a == b { -0.5 } else { 0.0 };
            assert!((p[(a, b)].re - want).abs() < 1e-12 && p[(a, b)].im.abs() < 1e-12);
        }
    }
}

#[test]
fn perturbation_matches_finite_difference() {
    let basis = SphereBasis::new(11, 2).unwrap();
    let w = SphereConformalFactor::harmonic(2, 1, 0.2).add(&SphereConformalFactor::harmonic(1, 0, 0.1));
    let dir = SphereConformalFactor::harmonic(2, -2, 1.0).add(&SphereConformalFactor::harmonic(1, 1, 0.5));
    let s = solve_with_basis(&w, &basis).unwrap();
    let i = first_positive(&s.values);
    let p = perturbation_matrix(&w, &dir, &basis, &s, i..i + 2);
    let slope = 0.5 * (p[(0, 0)] + p[(1, 1)]).re;
    let t = 1e-4;
    let up = solve_with_basis(&w.add(&scaled(&dir, t)), &basis).unwrap().values[i];
    let down = solve_with_basis(&w.add(&scaled(&dir, -t)), &basis).unwrap().values[i];
    let fd = (up - down) / (2.0 * t);
    assert!((fd - slope).abs() < 1e-6 * slope.abs().max(1.0), "fd {fd} formula {slope}");
}

fn scaled(w: &SphereConformalFactor, t: f64) -> SphereConformalFactor {
    SphereConformalFactor { coefficients: w.coefficients.iter().map(|&(l, m, c)| (l, m, c * t)).collect(), rotation: None }
}

#[test]
fn random_factor_has_requested_sup_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w = SphereConformalFactor::random(2, 0.4, &mut rng);
    assert!((w.sup_norm(64, 128) - 0.4).abs() < 1e-12);
    assert!(w.variance() > 0.0);
}

#[test]
fn band_must_fit_truncation() {
    let w = SphereConformalFactor::harmonic(3, 0, 0.1);
    assert!(matches!(solve_conformal_sphere(&w, 5), Err(Error::InvalidInput(_))));
}
