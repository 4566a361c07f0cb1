//! Descent on `λ̄₁(e^{2ω} g₀)` within the conformal class of a flat torus.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dirac_torus::{conformal_area, solve_conformal, ConformalSpectrum, FourierField};
use crate::error::{Error, Result};
use crate::fourier::{grid_size, CoefTable};
use crate::lattice_spin::TorusGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
    pub max_backtracks: usize,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self { initial_step: 0.1, shrink: 0.5, sufficient_decrease: 1e-4, max_backtracks: 30 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptConfig {
    pub cutoff: f64,
    pub max_steps: usize,
    /// Stop once the gradient norm drops below this.
    pub tol: f64,
    /// Modes `|m₁|, |m₂| ≤ band` are optimized; `None` uses the band of `ω₀` (at least 1).
    pub band: Option<i64>,
    pub policy: StepPolicy,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self { cutoff: 3.0, max_steps: 500, tol: 1e-7, band: None, policy: StepPolicy::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub lambda_bar: f64,
    pub area: f64,
    pub gradient_norm: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptStatus {
    Converged,
    StepLimit,
    /// Backtracking failed to find sufficient decrease; the best iterate is kept.
    LineSearchStall,
}

#[derive(Debug, Clone)]
pub struct OptState {
    pub geometry: TorusGeometry,
    pub omega: FourierField,
    pub trace: Vec<TraceEntry>,
    pub status: OptStatus,
    pub accepted_steps: usize,
}

impl OptState {
    pub fn final_entry(&self) -> &TraceEntry {
        self.trace.last().expect("trace holds the initial iterate")
    }
}

/// Gradient of `λ̄₁` in coefficient space, with the spectrum it came from.
#[derive(Debug, Clone)]
pub struct Gradient {
    /// `gₘ` such that `dλ̄₁[ω̇] = Σ ω̇ₘ conj(gₘ)`.
    pub field: FourierField,
    pub lambda_bar: f64,
    pub area: f64,
    pub spectrum: ConformalSpectrum,
}

impl Gradient {
    pub fn norm(&self) -> f64 {
        self.field.norm_sq().sqrt()
    }

    /// Directional derivative `dλ̄₁[ω̇]`.
    pub fn directional(&self, direction: &FourierField) -> f64 {
        direction
            .coefficients()
            .iter()
            .map(|(m, c)| (c * self.field.coefficient(*m).conj()).re)
            .sum()
    }
}

fn sampling_grid(spectrum: &ConformalSpectrum, omega: &FourierField, band: i64) -> (usize, usize) {
    let (e1, e2) = spectrum.dirac.basis.extent();
    let (b1, b2) = omega.band();
    (
        grid_size((2 * e1 + 8 * b1 + 2 * band + 64) as usize),
        grid_size((2 * e2 + 8 * b2 + 2 * band + 64) as usize),
    )
}

/// Averaged `e^{ω}(|p|² + |q|²)` over the first positive eigenspace, on an `n1 × n2` grid.
fn eigenspace_density(spectrum: &ConformalSpectrum, omega: &FourierField, n1: usize, n2: usize) -> Result<Vec<f64>> {
    let range = spectrum.first_positive_cluster()?;
    let w = omega.sample(n1, n2);
    let mut rho = vec![0.0; n1 * n2];
    let k = range.len() as f64;
    for psi in &spectrum.spinors[range] {
        let (p, q) = psi.sample(n1, n2);
        for idx in 0..n1 * n2 {
            rho[idx] += w[idx].exp() * (p[idx].norm_sqr() + q[idx].norm_sqr()) / k;
        }
    }
    Ok(rho)
}

/// `λ̄₁ (e^{2ω}/A − ρ) dv₀` projected onto modes `|m| ≤ band`; mean zero.
pub fn gradient(geometry: &TorusGeometry, omega: &FourierField, cutoff: f64, band: i64) -> Result<Gradient> {
    let spectrum = solve_conformal(geometry, omega, cutoff)?;
    let lambda_bar = spectrum.lambda_bar()?;
    let area = spectrum.area;
    let (n1, n2) = sampling_grid(&spectrum, omega, band);
    let rho = eigenspace_density(&spectrum, omega, n1, n2)?;
    let w = omega.sample(n1, n2);
    let area0 = geometry.area();
    let g: Vec<f64> = w
        .iter()
        .zip(&rho)
        .map(|(w, r)| lambda_bar * ((2.0 * w).exp() / area - r))
        .collect();
    let table = CoefTable::from_samples(&g, n1, n2);
    let mut coefs = Vec::new();
    for m1 in -band..=band {
        for m2 in -band..=band {
            if (m1, m2) != (0, 0) {
                coefs.push(((m1, m2), table.get(m1, m2) * area0));
            }
        }
    }
    // symmetrize away round-off so the field is exactly Hermitian
    let sym: Vec<((i64, i64), Complex64)> = coefs
        .iter()
        .map(|&((m1, m2), c)| {
            let partner = table.get(-m1, -m2) * area0;
            ((m1, m2), 0.5 * (c + partner.conj()))
        })
        .collect();
    let field = FourierField::from_coefficients(geometry, sym)?;
    Ok(Gradient { field, lambda_bar, area, spectrum })
}

/// Shift the zero mode so that `∫ e^{2ω} dv₀ = area₀`.
pub fn renormalize_area(omega: &FourierField) -> Result<FourierField> {
    let area0 = omega.geometry().area();
    let mut w = omega.clone();
    for _ in 0..3 {
        let area = conformal_area(&w)?;
        let c = -0.5 * (area / area0).ln();
        if c.abs() < 1e-15 {
            break;
        }
        w = w.shifted(c);
    }
    Ok(w)
}

pub fn minimize(geometry: &TorusGeometry, omega0: &FourierField, config: &OptConfig) -> Result<OptState> {
    let (b1, b2) = omega0.band();
    let band = config.band.unwrap_or(b1.max(b2).max(1));
    let policy = config.policy;
    let mut omega = renormalize_area(&omega0.truncated(band))?;
    let mut grad = gradient(geometry, &omega, config.cutoff, band)?;
    let mut trace = vec![TraceEntry {
        iteration: 0,
        lambda_bar: grad.lambda_bar,
        area: grad.area,
        gradient_norm: grad.norm(),
        variance: omega.variance(),
    }];
    let mut step = policy.initial_step;
    let mut accepted = 0;
    let mut prev: Option<(FourierField, FourierField)> = None;
    let status = loop {
        if grad.norm() < config.tol {
            break OptStatus::Converged;
        }
        if accepted >= config.max_steps {
            break OptStatus::StepLimit;
        }
        // Barzilai–Borwein guess, falling back to the last accepted step
        if let Some((ds, dg)) = &prev {
            let sy: f64 = ds.coefficients().iter().map(|(m, c)| (c * dg.coefficient(*m).conj()).re).sum();
            if sy > 0.0 {
                step = ds.norm_sq() / sy;
            }
        }
        let g2 = grad.norm().powi(2);
        let mut alpha = step;
        let mut next = None;
        for _ in 0..=policy.max_backtracks {
            let trial = renormalize_area(&omega.axpy(-alpha, &grad.field))?;
            match gradient(geometry, &trial, config.cutoff, band) {
                Ok(g) if g.lambda_bar <= grad.lambda_bar - policy.sufficient_decrease * alpha * g2 => {
                    next = Some((trial, g));
                    break;
                }
                Ok(_) | Err(Error::AliasingRisk { .. }) | Err(Error::SolverFailure(_)) => alpha *= policy.shrink,
                Err(e) => return Err(e),
            }
        }
        let Some((trial, g)) = next else {
            break OptStatus::LineSearchStall;
        };
        let ds = trial.axpy(-1.0, &omega).truncated(band);
        let dg = g.field.axpy(-1.0, &grad.field);
        prev = Some((FourierField::from_coefficients(geometry, ds.coefficients().iter().filter(|(m, _)| **m != (0, 0)).map(|(m, c)| (*m, *c)))?, dg));
        step = alpha;
        omega = trial;
        grad = g;
        accepted += 1;
        trace.push(TraceEntry {
            iteration: accepted,
            lambda_bar: grad.lambda_bar,
            area: grad.area,
            gradient_norm: grad.norm(),
            variance: omega.variance(),
        });
    };
    Ok(OptState { geometry: *geometry, omega, trace, status, accepted_steps: accepted })
}

/// Random mean-zero field on modes `|m₁|, |m₂| ≤ band` with sup norm `amplitude`.
pub fn random_field(geometry: &TorusGeometry, band: i64, amplitude: f64, rng: &mut impl Rng) -> Result<FourierField> {
    let mut coefs = Vec::new();
    for m1 in -band..=band {
        for m2 in -band..=band {
            if (m1, m2) > (0, 0) {
                let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                coefs.push(((m1, m2), c));
                coefs.push(((-m1, -m2), c.conj()));
            }
        }
    }
    let raw = FourierField::from_coefficients(geometry, coefs)?;
    let sup = raw.sup_norm();
    Ok(if sup > 0.0 { raw.scaled(amplitude / sup) } else { raw })
}

/// Cutoff resolving the first level and its coupling through modes `|m| ≤ band`.
pub fn default_cutoff(geometry: &TorusGeometry, band: i64) -> Result<f64> {
    let flat = crate::exact_spectrum::torus_spectrum(geometry, 1)?;
    let xi1 = flat.first_positive().ok_or(Error::ZeroEigenvalue)? / (2.0 * std::f64::consts::PI);
    let zero = FourierField::zero(geometry);
    let mut reach = 0.0f64;
    for m1 in -band..=band {
        for m2 in -band..=band {
            reach = reach.max(zero.frequency((m1, m2)).norm());
        }
    }
    Ok(2.0 * xi1 + 2.0 * reach)
}

/// Flat value `d_S π/√b` and the threshold `b_S` above which the flat metric
/// is the minimiser.
pub fn flat_threshold(geometry: &TorusGeometry) -> Result<(f64, f64)> {
    let report = crate::exact_spectrum::torus_spectrum(geometry, 1)?;
    let flat = report.first_positive().ok_or(Error::ZeroEigenvalue)? * report.area.sqrt();
    let b_s = if geometry.character().is_trivial() { 2.0 * std::f64::consts::PI } else { 0.5 * std::f64::consts::PI };
    Ok((flat, b_s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusVerificationSpec {
    pub perturbations: usize,
    pub seed: u64,
    pub band: i64,
    pub amplitude: f64,
    /// `None` picks [`default_cutoff`].
    pub cutoff: Option<f64>,
    pub max_steps: usize,
    pub tol: f64,
}

impl Default for TorusVerificationSpec {
    fn default() -> Self {
        Self { perturbations: 20, seed: 1, band: 1, amplitude: 0.05, cutoff: None, max_steps: 200, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusRun {
    pub run: usize,
    pub status: OptStatus,
    pub steps: usize,
    pub initial_lambda_bar: f64,
    pub final_lambda_bar: f64,
    pub min_lambda_bar: f64,
    pub final_variance: f64,
    pub trace: Vec<TraceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusVerification {
    pub flat_value: f64,
    pub b_threshold: f64,
    /// `b ≤ b_S`: runs are logged but not asserted.
    pub exploratory: bool,
    pub cutoff: f64,
    pub runs: Vec<TorusRun>,
    pub max_final_error: f64,
    pub max_final_variance: f64,
    pub min_iterate: f64,
    pub pass: bool,
}

/// Convergence tolerance to the flat value.
pub const FLAT_TOLERANCE: f64 = 1e-4;
/// Largest final `ω`-variance accepted.
pub const VARIANCE_TOLERANCE: f64 = 1e-5;
/// Slack below the flat value tolerated for any iterate.
pub const LOWER_BOUND_SLACK: f64 = 1e-6;

/// Descend from seeded random perturbations of the flat metric.
pub fn verify_torus(geometry: &TorusGeometry, spec: &TorusVerificationSpec) -> Result<TorusVerification> {
    use rand::SeedableRng;
    use rayon::prelude::*;
    let check = crate::lattice_spin::validate_moduli(geometry);
    if !check.valid {
        return Err(Error::InvalidInput(check.diagnostic));
    }
    let (flat_value, b_threshold) = flat_threshold(geometry)?;
    let cutoff = match spec.cutoff {
        Some(c) => c,
        None => default_cutoff(geometry, spec.band)?,
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(spec.seed);
    let starts = (0..spec.perturbations)
        .map(|_| random_field(geometry, spec.band, spec.amplitude, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let config = OptConfig { cutoff, max_steps: spec.max_steps, tol: spec.tol, band: Some(spec.band), policy: StepPolicy::default() };
    let runs = starts
        .par_iter()
        .enumerate()
        .map(|(run, w0)| {
            let state = minimize(geometry, w0, &config)?;
            let last = state.final_entry();
            Ok(TorusRun {
                run,
                status: state.status,
                steps: state.accepted_steps,
                initial_lambda_bar: state.trace[0].lambda_bar,
                final_lambda_bar: last.lambda_bar,
                min_lambda_bar: state.trace.iter().map(|e| e.lambda_bar).fold(f64::INFINITY, f64::min),
                final_variance: last.variance,
                trace: state.trace.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_final_error = runs.iter().map(|r| (r.final_lambda_bar - flat_value).abs()).fold(0.0, f64::max);
    let max_final_variance = runs.iter().map(|r| r.final_variance).fold(0.0, f64::max);
    let min_iterate = runs.iter().map(|r| r.min_lambda_bar).fold(f64::INFINITY, f64::min);
    let exploratory = geometry.lattice().b() <= b_threshold;
    let pass = max_final_error <= FLAT_TOLERANCE
        && max_final_variance < VARIANCE_TOLERANCE
        && min_iterate >= flat_value - LOWER_BOUND_SLACK;
    Ok(TorusVerification {
        flat_value,
        b_threshold,
        exploratory,
        cutoff,
        runs,
        max_final_error,
        max_final_variance,
        min_iterate,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalityReport {
    /// `½(max − min)` of `A · Σ cⱼ|ψⱼ|²_g` for the best convex weights.
    pub residual: f64,
    pub combination: Vec<f64>,
    pub eigenvalue: f64,
}

/// How far the first eigenspace is from admitting `Σ cⱼ|ψⱼ|²_g ≡ const`.
pub fn criticality_residual(geometry: &TorusGeometry, omega: &FourierField, cutoff: f64) -> Result<CriticalityReport> {
    let spectrum = solve_conformal(geometry, omega, cutoff)?;
    let range = spectrum.first_positive_cluster()?;
    let (n1, n2) = sampling_grid(&spectrum, omega, 0);
    let w = omega.sample(n1, n2);
    let area = spectrum.area;
    // pointwise |ψ|²_g = e^{−ω}(|p|² + |q|²), scaled so the g-average is 1
    let densities: Vec<Vec<f64>> = spectrum.spinors[range.clone()]
        .iter()
        .map(|psi| {
            let (p, q) = psi.sample(n1, n2);
            (0..n1 * n2).map(|i| area * (-w[i]).exp() * (p[i].norm_sqr() + q[i].norm_sqr())).collect()
        })
        .collect();
    let (combination, residual) = minimize_range(&densities);
    Ok(CriticalityReport { residual, combination, eigenvalue: spectrum.values[range.start] })
}

fn spread(densities: &[Vec<f64>], c: &[f64]) -> (f64, usize, usize) {
    let n = densities[0].len();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ilo, mut ihi) = (0, 0);
    for i in 0..n {
        let f: f64 = c.iter().zip(densities).map(|(c, d)| c * d[i]).sum();
        if f < lo {
            lo = f;
            ilo = i;
        }
        if f > hi {
            hi = f;
            ihi = i;
        }
    }
    (0.5 * (hi - lo), ilo, ihi)
}

/// Exponentiated-subgradient descent of the range over the simplex.
fn minimize_range(densities: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let k = densities.len();
    let mut c = vec![1.0 / k as f64; k];
    let (mut best, _, _) = spread(densities, &c);
    let mut best_c = c.clone();
    if k == 1 {
        return (c, best);
    }
    for it in 0..2000 {
        let (r, ilo, ihi) = spread(densities, &c);
        if r < best {
            best = r;
            best_c = c.clone();
        }
        if r < 1e-14 {
            break;
        }
        let eta = 2.0 / (1.0 + it as f64).sqrt();
        let g: Vec<f64> = densities.iter().map(|d| 0.5 * (d[ihi] - d[ilo])).collect();
        let scale = g.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-300);
        for (cj, gj) in c.iter_mut().zip(&g) {
            *cj *= (-eta * gj / scale).exp();
        }
        let s: f64 = c.iter().sum();
        c.iter_mut().for_each(|x| *x /= s);
    }
    (best_c, best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_metric_is_stationary() {
        for chi2 in [0, 1] {
            let g = TorusGeometry::from_parts(0.0, 1.3, 0, chi2).unwrap();
            let grad = gradient(&g, &FourierField::zero(&g), 2.0, 2).unwrap();
            assert!(grad.norm() < 1e-10, "{}", grad.norm());
        }
    }

    #[test]
    fn zero_start_takes_no_steps() {
        let g = TorusGeometry::from_parts(0.0, 7.0, 0, 0).unwrap();
        let s = minimize(&g, &FourierField::zero(&g), &OptConfig { cutoff: 1.0, ..Default::default() }).unwrap();
        assert_eq!(s.accepted_steps, 0);
        assert_eq!(s.status, OptStatus::Converged);
    }

    #[test]
    fn renormalized_area_matches_flat() {
        let g = TorusGeometry::from_parts(0.1, 1.5, 0, 0).unwrap();
        let w = FourierField::cos_mode(&g, (1, 0), 0.3).shifted(0.7);
        let r = renormalize_area(&w).unwrap();
        assert!((conformal_area(&r).unwrap() - g.area()).abs() < 1e-8);
    }

    #[test]
    fn flat_eigenspace_is_critical() {
        let g = TorusGeometry::from_parts(0.0, 1.0, 0, 0).unwrap();
        let r = criticality_residual(&g, &FourierField::zero(&g), 2.0).unwrap();
        assert!(r.residual < 1e-9);
        let w = FourierField::cos_mode(&g, (1, 0), 0.1);
        let r = criticality_residual(&g, &w, 3.0).unwrap();
        assert!(r.residual > 1e-3, "{}", r.residual);
    }
}
