//! End-to-end acceptance checks. Each test prints one `criterion N ...: PASS|FAIL`
//! line before asserting, so `cargo test --test acceptance -- --nocapture`
//! gives a readable summary.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spindirac::conformal_opt::{self, TorusVerificationSpec};
use spindirac::cpn_harmonic::{
    self as cpn, to_sphere, veronese, veronese_check, Chart, ClosedFormMap, EigenspinorMap, Gauged, HomogeneousMap,
    Surface, VeroneseTolerances,
};
use spindirac::dirac_sphere::{bar_sweep, BarSweepSpec};
use spindirac::dirac_torus::{self, FourierField};
use spindirac::exact_spectrum::{self, group_levels, LEVEL_TOLERANCE};
use spindirac::jet::Jet;
use spindirac::lattice_spin::{validate_moduli, TorusGeometry};
use spindirac::linalg;

fn verdict(n: usize, name: &str, pass: bool, elapsed: Duration, detail: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("criterion {n} {name}: {tag} ({:.2} s) {detail}", elapsed.as_secs_f64());
    assert!(pass, "criterion {n} {name} failed: {detail}");
}

/// Brute-force `Γ*_χ` levels: `(2π|ξ|, number of ξ)` for the first `count` positive norms.
fn oracle_levels(a: f64, b: f64, chi: (u8, u8), count: usize) -> Vec<(f64, usize)> {
    let mut radius: f64 = 4.0;
    loop {
        // ξ = (n₁ + c₁) γ₁* + (n₂ + c₂) γ₂*, γ₁* = (1, −a/b), γ₂* = (0, 1/b)
        let n1max = radius.ceil() as i64 + 1;
        let n2max = (radius * b + a.abs() * (radius + 1.0)).ceil() as i64 + 2;
        let (c1, c2) = (0.5 * chi.0 as f64, 0.5 * chi.1 as f64);
        let mut norms = Vec::new();
        for n1 in -n1max..=n1max {
            for n2 in -n2max..=n2max {
                let (s1, s2) = (n1 as f64 + c1, n2 as f64 + c2);
                let (u, v) = (s1, (s2 - a * s1) / b);
                let r = (u * u + v * v).sqrt();
                if r > 1e-12 && r <= radius {
                    norms.push(2.0 * PI * r);
                }
            }
        }
        norms.sort_by(f64::total_cmp);
        let levels = group_levels(&norms, LEVEL_TOLERANCE);
        if levels.len() > count {
            return levels[..count].to_vec();
        }
        radius *= 2.0;
    }
}

fn trivial_domain(rng: &mut ChaCha8Rng) -> (f64, f64) {
    loop {
        let a: f64 = rng.random_range(-0.5..=0.5);
        let b: f64 = rng.random_range(0.8..4.0);
        if a * a + b * b >= 1.0 {
            return (a, b);
        }
    }
}

fn spin_domain(rng: &mut ChaCha8Rng) -> (f64, f64) {
    loop {
        let a: f64 = rng.random_range(-0.5..=0.5);
        let b: f64 = rng.random_range(0.2..3.0);
        if b * b + (a.abs() - 0.5).powi(2) >= 0.25 {
            return (a, b);
        }
    }
}

#[test]
fn criterion_1_exact_torus_spectra() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_value = 0.0f64;
    let mut mult_mismatch = 0usize;
    let mut worst_bar = 0.0f64;
    for i in 0..20 {
        let (a, b) = if i % 2 == 0 { trivial_domain(&mut rng) } else { spin_domain(&mut rng) };
        for chi in [(0u8, 0u8), (0, 1), (1, 0), (1, 1)] {
            let g = TorusGeometry::from_parts(a, b, chi.0, chi.1).unwrap();
            let report = exact_spectrum::torus_spectrum(&g, 50).unwrap();
            let oracle = oracle_levels(a, b, chi, 50);
            let got: Vec<_> = report.positive().take(50).collect();
            assert_eq!(got.len(), 50);
            for (e, (v, n)) in got.iter().zip(&oracle) {
                worst_value = worst_value.max((e.value - v).abs() / v);
                if e.complex_multiplicity != *n || 2 * e.quaternionic_multiplicity != *n {
                    mult_mismatch += 1;
                }
            }
            if validate_moduli(&g).valid {
                let lambda_bar = exact_spectrum::normalized(&report, 1).unwrap().value;
                let expected = if chi == (0, 0) { 2.0 * PI / b.sqrt() } else { PI / b.sqrt() };
                worst_bar = worst_bar.max((lambda_bar - expected).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = worst_value <= 1e-12 && mult_mismatch == 0 && worst_bar <= 1e-12 && elapsed < Duration::from_secs(1);
    verdict(
        1,
        "exact torus spectra",
        pass,
        elapsed,
        format!("max level error {worst_value:.1e}, multiplicity mismatches {mult_mismatch}, max normalized error {worst_bar:.1e}"),
    );
}

#[test]
fn criterion_2_discretizer_fidelity() {
    let start = Instant::now();
    let g = TorusGeometry::from_parts(0.0, 1.0, 0, 0).unwrap();
    let cutoff = 12.6;
    let flat = dirac_torus::solve_conformal(&g, &FourierField::zero(&g), cutoff).unwrap();
    let dim = flat.dirac.dim();
    let limit = PI * cutoff;
    let exact = exact_spectrum::torus_spectrum(&g, 400).unwrap();
    let mut worst = 0.0f64;
    let mut mult_mismatch = 0;
    let mut compared = 0;
    for e in exact.entries.iter().filter(|e| e.value.abs() <= limit) {
        let found: Vec<f64> = flat.values.iter().copied().filter(|v| (v - e.value).abs() <= 1e-6 * e.value.abs().max(1.0)).collect();
        if found.len() != e.complex_multiplicity {
            mult_mismatch += 1;
        }
        for v in found {
            worst = worst.max((v - e.value).abs());
        }
        compared += 1;
    }

    let h = TorusGeometry::from_parts(0.31, 1.4, 0, 1).unwrap();
    let w0 = FourierField::cos_mode(&h, (1, 1), 0.2);
    let base = dirac_torus::solve_conformal(&h, &w0, 5.0).unwrap().lambda_bar().unwrap();
    let shifted = dirac_torus::solve_conformal(&h, &w0.shifted(0.7), 5.0).unwrap().lambda_bar().unwrap();
    let invariance = (base - shifted).abs();

    let elapsed = start.elapsed();
    let pass = worst <= 1e-10
        && mult_mismatch == 0
        && invariance <= 1e-9
        && (900..=1200).contains(&dim)
        && elapsed < Duration::from_secs(10);
    verdict(
        2,
        "discretizer fidelity",
        pass,
        elapsed,
        format!("basis {dim}, {compared} levels, max error {worst:.1e}, multiplicity mismatches {mult_mismatch}, constant-shift change {invariance:.1e}"),
    );
}

fn random_geometry(rng: &mut ChaCha8Rng) -> TorusGeometry {
    if rng.random_bool(0.5) {
        let (a, b) = trivial_domain(rng);
        TorusGeometry::from_parts(a, b, 0, 0).unwrap()
    } else {
        let (a, b) = spin_domain(rng);
        TorusGeometry::from_parts(a, b.max(0.6), 0, 1).unwrap()
    }
}

#[test]
fn criterion_3_derivative_formula() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let t = 1e-4;
    let mut worst = 0.0f64;
    for trial in 0..10 {
        let g = random_geometry(&mut rng);
        let omega = if trial % 2 == 0 {
            FourierField::zero(&g)
        } else {
            conformal_opt::random_field(&g, 1, 0.15, &mut rng).unwrap()
        };
        let direction = conformal_opt::random_field(&g, 1, 1.0, &mut rng).unwrap();
        let cutoff = 3.0 / g.lattice().b().sqrt().min(1.0);
        let s = dirac_torus::solve_conformal(&g, &omega, cutoff).unwrap();
        let r = s.first_positive_cluster().unwrap();
        let lambda = s.values[r.start];
        let derivs = dirac_torus::eigenspace_derivatives(&omega, &direction, &s.spinors[r.clone()]).unwrap();
        let plus = dirac_torus::solve_conformal(&g, &omega.axpy(t, &direction), cutoff).unwrap();
        let minus = dirac_torus::solve_conformal(&g, &omega.axpy(-t, &direction), cutoff).unwrap();
        let k = r.len();
        for (i, d) in derivs.iter().enumerate() {
            // branch i is the i-th lowest at +t and the i-th highest at −t
            let fd = (plus.values[r.start + i] - minus.values[r.start + k - 1 - i]) / (2.0 * t);
            let rel = (fd - d).abs() / d.abs().max(1e-3 * lambda);
            worst = worst.max(rel);
        }
    }
    let elapsed = start.elapsed();
    verdict(3, "derivative formula", worst <= 1e-4, elapsed, format!("max relative error {worst:.1e}"));
}

#[test]
fn criterion_4_torus_minimiser() {
    let start = Instant::now();
    let spec = TorusVerificationSpec { perturbations: 20, ..TorusVerificationSpec::default() };
    let mut lines = Vec::new();
    let mut pass = true;
    for (b, chi2) in [(7.0, 0u8), (2.0, 1)] {
        let g = TorusGeometry::from_parts(0.0, b, 0, chi2).unwrap();
        let v = conformal_opt::verify_torus(&g, &spec).unwrap();
        let expected = if chi2 == 0 { 2.0 * PI / b.sqrt() } else { PI / b.sqrt() };
        let ok = v.pass
            && !v.exploratory
            && (v.flat_value - expected).abs() < 1e-12
            && v.max_final_error < 1e-4
            && v.max_final_variance < 1e-5
            && v.min_iterate >= expected - 1e-6
            && v.runs.len() == 20;
        pass &= ok;
        lines.push(format!(
            "b={b} χ=(0,{chi2}): error {:.1e}, variance {:.1e}, min iterate − flat {:.1e}",
            v.max_final_error,
            v.max_final_variance,
            v.min_iterate - expected
        ));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(300);
    verdict(4, "torus minimiser", pass, elapsed, lines.join("; "));
}

#[test]
fn criterion_5_bar_sweep() {
    let start = Instant::now();
    let spec = BarSweepSpec {
        count: 100,
        band: 3,
        amplitude: 0.3,
        seed: 7,
        jmax2: 15,
        include_round: true,
        tolerance: 1e-6,
    };
    let report = bar_sweep(&spec).unwrap();
    let round = &report.samples[0];
    let round_error = (round.lambda_bar - 2.0 * PI.sqrt()).abs();
    let elapsed = start.elapsed();
    let pass = report.violations == 0
        && report.samples.len() == 101
        && round.equality_case
        && round_error <= 1e-8
        && elapsed < Duration::from_secs(120);
    verdict(
        5,
        "Bär sweep",
        pass,
        elapsed,
        format!(
            "violations {}, min λ̄₁ − 2√π over random factors {:.2e}, round error {round_error:.1e}",
            report.violations,
            report.samples[1..].iter().map(|s| s.lambda_bar).fold(f64::INFINITY, f64::min) - 2.0 * PI.sqrt()
        ),
    );
}

#[test]
fn criterion_6_veronese_battery() {
    let start = Instant::now();
    let surface = Surface::sphere(48, 64);
    let tol = VeroneseTolerances::default();
    let mut pass = true;
    let mut lines = Vec::new();
    for m in 1..=3usize {
        let c = veronese_check(m, &surface, &tol).unwrap();
        let m2 = (m * m) as f64;
        let ok = c.pass
            && c.harmonic_residual <= 1e-8
            && c.alignment <= 1e-9
            && c.metric_ratio_error <= 1e-8
            && (c.e01 - 4.0 * PI * m2).abs() <= 1e-6 * 4.0 * PI * m2
            && c.density_defect <= 1e-8
            && c.criticality_residual <= 1e-6
            && c.weak_conformality <= 1e-8;
        pass &= ok;
        lines.push(format!(
            "m={m}: E01/4π = {:.9}, harmonic {:.0e}, alignment {:.0e}, density {:.0e}, ΣQ {:.0e}, conformality {:.0e}",
            c.e01 / (4.0 * PI),
            c.harmonic_residual,
            c.alignment,
            c.density_defect,
            c.criticality_residual,
            c.weak_conformality
        ));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(30);
    verdict(6, "Veronese battery", pass, elapsed, lines.join("; "));
}

#[test]
fn criterion_7_energy_degree() {
    let start = Instant::now();
    let sphere = Surface::sphere(48, 64);
    let g = TorusGeometry::from_parts(0.2, 1.3, 0, 0).unwrap();
    let torus = Surface::torus(&g, None, 64, 64);
    let (_, v2) = veronese(2).unwrap();
    let (_, v3) = veronese(3).unwrap();
    let gamma = g.dual_vector(2, -2);
    let cases: Vec<(&str, Box<dyn HomogeneousMap>, &Surface, i64)> = vec![
        ("z", Box::new(ClosedFormMap::sphere_power(1, false)), &sphere, 1),
        ("z^2", Box::new(ClosedFormMap::sphere_power(2, false)), &sphere, 2),
        ("z^3", Box::new(ClosedFormMap::sphere_power(3, false)), &sphere, 3),
        ("zbar", Box::new(ClosedFormMap::sphere_power(1, true)), &sphere, -1),
        ("zbar^2", Box::new(ClosedFormMap::sphere_power(2, true)), &sphere, -2),
        ("veronese 2", Box::new(v2), &sphere, -1),
        ("veronese 3", Box::new(v3), &sphere, -1),
        ("theta 1", Box::new(ClosedFormMap::torus_theta(&g, 1, false)), &torus, 1),
        ("thetabar 2", Box::new(ClosedFormMap::torus_theta(&g, 2, true)), &torus, -2),
        ("circle", Box::new(ClosedFormMap::circle_map((gamma.u, gamma.v))), &torus, 0),
    ];
    let mut worst = 0.0f64;
    let mut wrong = Vec::new();
    for (name, map, surface, expected) in &cases {
        let e = cpn::energies(map.as_ref(), surface).unwrap();
        let x = (e.e10 - e.e01) / (4.0 * PI);
        worst = worst.max((x - *expected as f64).abs());
        if (x - *expected as f64).abs() > 1e-6 {
            wrong.push(format!("{name}: {x:.9}"));
        }
    }

    let mut worst_third = 0.0f64;
    let mut eigen_degree_ok = true;
    for (a, b, chi2) in [(0.0, 1.0, 0u8), (0.3, 1.7, 0), (0.2, 2.0, 1)] {
        let h = TorusGeometry::from_parts(a, b, 0, chi2).unwrap();
        let w = FourierField::zero(&h);
        let s = dirac_torus::solve_conformal(&h, &w, 2.5).unwrap();
        let surface = Surface::torus(&h, None, 48, 48);
        for k in s.first_positive_cluster().unwrap() {
            let map = EigenspinorMap::from_eigenspinors(vec![s.spinors[k].clone()], &h, &w).unwrap();
            let e = cpn::energies(&map, &surface).unwrap();
            eigen_degree_ok &= e.degree == 0 && e.degree_residual <= 1e-6;
            for p in &surface.points {
                let f: Vec<Complex64> = map.jets(p.chart, p.z).iter().map(|j| j.v).collect();
                worst_third = worst_third.max(to_sphere(&f)[2].abs());
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = wrong.is_empty() && eigen_degree_ok && worst_third <= 1e-9;
    verdict(
        7,
        "energy and degree bookkeeping",
        pass,
        elapsed,
        format!("max degree defect {worst:.1e} {wrong:?}, eigenspinor maps degree 0: {eigen_degree_ok}, max third coordinate {worst_third:.1e}"),
    );
}

/// `‖A x − λ M x‖ / ‖x‖`.
fn pencil_defect(a: &linalg::CMat, m: &linalg::CMat, x: &[Complex64], lambda: f64) -> f64 {
    let n = x.len();
    let mut num = 0.0;
    for i in 0..n {
        let mut r = Complex64::new(0.0, 0.0);
        for j in 0..n {
            r += (a[(i, j)] - m[(i, j)] * lambda) * x[j];
        }
        num += r.norm_sqr();
    }
    (num / x.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
}

fn random_gauge(rng: &mut ChaCha8Rng) -> Box<dyn Fn(Chart, Complex64) -> Jet + Send + Sync> {
    let mut c = || Complex64::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
    let (c0, c1, c2, c3) = (c() + 1.0, c(), c(), c());
    Box::new(move |_, z| {
        let (u, ub) = (Jet::var(z), Jet::var_conj(z));
        (u * c1 + ub * c2 + u * ub * c3).exp() * c0
    })
}

#[test]
fn criterion_8_invariant_suite() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut symmetry = 0.0f64;
    let mut pairing = 0.0f64;
    let mut kernel = 0.0f64;
    for trial in 0..20 {
        let g = if trial % 2 == 0 {
            let (a, b) = trivial_domain(&mut rng);
            TorusGeometry::from_parts(a, b, 0, 0).unwrap()
        } else {
            random_geometry(&mut rng)
        };
        let w = conformal_opt::random_field(&g, 2, 0.3, &mut rng).unwrap();
        let s = dirac_torus::solve_conformal(&g, &w, 3.0).unwrap();
        let n = s.values.len();
        let scale = s.values[n - 1].abs();
        for i in 0..n {
            symmetry = symmetry.max((s.values[i] + s.values[n - 1 - i]).abs() / scale);
        }
        for (k, psi) in s.spinors.iter().enumerate().step_by(7) {
            let partner = psi.quaternionic_partner().vector();
            pairing = pairing.max(pencil_defect(&s.dirac.a, &s.dirac.m, &partner, s.values[k]) / scale);
        }
        if g.character().is_trivial() {
            let mut mags: Vec<f64> = s.values.iter().map(|v| v.abs()).collect();
            mags.sort_by(f64::total_cmp);
            kernel = kernel.max(mags[1]);
        }
    }

    let mut gauge = 0.0f64;
    let sphere = Surface::sphere(24, 32);
    let g = TorusGeometry::from_parts(0.1, 1.2, 0, 0).unwrap();
    let torus = Surface::torus(&g, None, 32, 32);
    let (_, v2) = veronese(2).unwrap();
    let w0 = FourierField::zero(&g);
    let s = dirac_torus::solve_conformal(&g, &w0, 2.0).unwrap();
    let r = s.first_positive_cluster().unwrap();
    let eigen = EigenspinorMap::from_eigenspinors(vec![s.spinors[r.start].clone()], &g, &w0).unwrap();
    let maps: Vec<(Box<dyn HomogeneousMap>, &Surface)> = vec![
        (Box::new(ClosedFormMap::sphere_power(2, false)), &sphere),
        (Box::new(ClosedFormMap::sphere_power(1, true)), &sphere),
        (Box::new(v2), &sphere),
        (Box::new(ClosedFormMap::torus_theta(&g, 1, false)), &torus),
        (Box::new(eigen), &torus),
    ];
    let rel = |x: f64, y: f64| (x - y).abs() / (1.0 + x.abs().max(y.abs()));
    for (map, surface) in &maps {
        let gauged = Gauged { inner: map.as_ref(), gauge: random_gauge(&mut rng) };
        let (e, eg) = (cpn::energies(map.as_ref(), surface).unwrap(), cpn::energies(&gauged, surface).unwrap());
        gauge = gauge.max(rel(e.e10, eg.e10)).max(rel(e.e01, eg.e01));
        gauge = gauge.max(rel(cpn::harmonic_residual(map.as_ref(), surface), cpn::harmonic_residual(&gauged, surface)));
        gauge = gauge.max(rel(cpn::weak_conformality(map.as_ref(), surface), cpn::weak_conformality(&gauged, surface)));
        for p in surface.points.iter().step_by(11) {
            let (d, dg) = (
                cpn::energy_densities(map.as_ref(), p.chart, p.z, p.conformal).unwrap(),
                cpn::energy_densities(&gauged, p.chart, p.z, p.conformal).unwrap(),
            );
            gauge = gauge.max(rel(d.0, dg.0)).max(rel(d.1, dg.1));
        }
        if map.dim() % 2 == 0 {
            let (q, qg) = (cpn::quaternionic_check(map.as_ref(), surface).unwrap(), cpn::quaternionic_check(&gauged, surface).unwrap());
            if let (Some(x), Some(y)) = (q.alignment, qg.alignment) {
                gauge = gauge.max(rel(x, y));
            }
            gauge = gauge.max(rel(q.min_dbar_norm, qg.min_dbar_norm));
        }
    }

    let elapsed = start.elapsed();
    let pass = symmetry <= 1e-8 && pairing <= 1e-8 && kernel <= 1e-10 && gauge <= 1e-9 && elapsed < Duration::from_secs(120);
    verdict(
        8,
        "invariant suite",
        pass,
        elapsed,
        format!("symmetry {symmetry:.1e}, pairing {pairing:.1e}, kernel {kernel:.1e}, gauge {gauge:.1e}"),
    );
}
