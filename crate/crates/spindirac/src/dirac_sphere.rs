//! Dirac operator of `e^{2ω} g_{S²}` in a basis of spin-weight `∓½` harmonics.
//!
//! With `u_{jm} ∝ d^j_{m,½}(θ) e^{imφ}` and `v_{jm} ∝ d^j_{m,−½}(θ) e^{imφ}` the
//! round operator maps `u_{jm}` to `(j + ½) v_{jm}` up to a global sign, so `A`
//! is block-diagonal with eigenvalues `±(j + ½)`. The conformal problem is
//! `A φ = λ M φ`, `M` the matrix of multiplication by `e^{ω}`.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_spectrum::SpectrumReport;
use crate::linalg::{self, CMat};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Gauss–Legendre nodes and weights on `[−1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut r = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, r);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * r * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { r } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (r * p - pm) / (r * r - 1.0);
            let dr = p / dp;
            r -= dr;
            if dr.abs() < 1e-16 {
                break;
            }
        }
        let wt = 2.0 / ((1.0 - r * r) * dp * dp);
        x[i] = -r;
        x[n - 1 - i] = r;
        w[i] = wt;
        w[n - 1 - i] = wt;
    }
    (x, w)
}

fn ln_factorial(n: i64) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

fn binomial(n: i64, k: i64) -> f64 {
    (ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)).exp()
}

/// Jacobi polynomial `P_n^{(a,b)}(x)` by the three-term recurrence.
pub fn jacobi(n: i64, a: f64, b: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut p0 = 1.0;
    let mut p1 = 0.5 * (a - b + (a + b + 2.0) * x);
    for k in 2..=n {
        let k = k as f64;
        let c = 2.0 * k + a + b;
        let a1 = 2.0 * k * (k + a + b) * (c - 2.0);
        let a2 = (c - 1.0) * (c * (c - 2.0) * x + a * a - b * b);
        let a3 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * c;
        let p2 = (a2 * p1 - a3 * p0) / a1;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Wigner `d^j_{m'm}(β)` with doubled arguments `j2 = 2j`, `mp2 = 2m'`, `m2 = 2m`,
/// via the Jacobi-polynomial form.
pub fn wigner_d(j2: i64, mp2: i64, m2: i64, beta: f64) -> f64 {
    assert!((j2 - m2) % 2 == 0 && (j2 - mp2) % 2 == 0 && m2.abs() <= j2 && mp2.abs() <= j2);
    let jp_m = (j2 + m2) / 2;
    let jm_m = (j2 - m2) / 2;
    let jp_mp = (j2 + mp2) / 2;
    let jm_mp = (j2 - mp2) / 2;
    let k = jp_m.min(jm_m).min(jp_mp).min(jm_mp);
    let diff = (mp2 - m2) / 2;
    let (a, lambda) = if k == jp_m {
        (diff, diff)
    } else if k == jm_m {
        (-diff, 0)
    } else if k == jp_mp {
        (-diff, 0)
    } else {
        (diff, diff)
    };
    let b = j2 - 2 * k - a;
    let sign = if lambda.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let norm = (binomial(2 * k + a + b - k, k + a) / binomial(k + b, b)).sqrt();
    let (sh, ch) = ((0.5 * beta).sin(), (0.5 * beta).cos());
    sign * norm * sh.powi(a as i32) * ch.powi(b as i32) * jacobi(k, a as f64, b as f64, beta.cos())
}

/// Real conformal factor `ω = Σ c_{lm} Y^ℝ_{lm}` on the unit sphere, optionally
/// pulled back by a rotation: `ω_R(x) = ω(Rᵀx)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereConformalFactor {
    /// `(l, m, c)` with real harmonics: `m > 0` cosine type, `m < 0` sine type.
    pub coefficients: Vec<(i64, i64, f64)>,
    pub rotation: Option<[[f64; 3]; 3]>,
}

/// Real spherical harmonic `Y^ℝ_{lm}(θ, φ)`.
pub fn real_harmonic(l: i64, m: i64, theta: f64, phi: f64) -> f64 {
    let n = ((2 * l + 1) as f64 / (4.0 * PI)).sqrt();
    let d = wigner_d(2 * l, 2 * m.abs(), 0, theta);
    match m.signum() {
        0 => n * d,
        1 => 2f64.sqrt() * n * d * (m as f64 * phi).cos(),
        _ => 2f64.sqrt() * n * d * (m.abs() as f64 * phi).sin(),
    }
}

impl SphereConformalFactor {
    pub fn zero() -> Self {
        Self { coefficients: Vec::new(), rotation: None }
    }

    pub fn constant(c: f64) -> Self {
        Self { coefficients: vec![(0, 0, c * (4.0 * PI).sqrt())], rotation: None }
    }

    pub fn harmonic(l: i64, m: i64, c: f64) -> Self {
        Self { coefficients: vec![(l, m, c)], rotation: None }
    }

    pub fn band(&self) -> i64 {
        self.coefficients.iter().map(|c| c.0).max().unwrap_or(0)
    }

    pub fn rotated(&self, r: [[f64; 3]; 3]) -> Self {
        Self { coefficients: self.coefficients.clone(), rotation: Some(r) }
    }

    pub fn add(&self, other: &SphereConformalFactor) -> Self {
        assert!(self.rotation.is_none() && other.rotation.is_none());
        let mut c = self.coefficients.clone();
        c.extend_from_slice(&other.coefficients);
        Self { coefficients: c, rotation: None }
    }

    pub fn eval(&self, theta: f64, phi: f64) -> f64 {
        let (theta, phi) = match self.rotation {
            None => (theta, phi),
            Some(r) => {
                let x = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
                let y: Vec<f64> = (0..3).map(|i| (0..3).map(|k| r[k][i] * x[k]).sum()).collect();
                (y[2].clamp(-1.0, 1.0).acos(), y[1].atan2(y[0]))
            }
        };
        self.coefficients.iter().map(|&(l, m, c)| c * real_harmonic(l, m, theta, phi)).sum()
    }

    /// Variance of `ω` w.r.t. the normalized round measure.
    pub fn variance(&self) -> f64 {
        // harmonics are orthonormal in L²(S²); divide by area 4π
        let mut acc = std::collections::BTreeMap::<(i64, i64), f64>::new();
        for &(l, m, c) in &self.coefficients {
            *acc.entry((l, m)).or_insert(0.0) += c;
        }
        acc.iter().filter(|((l, _), _)| *l > 0).map(|(_, c)| c * c).sum::<f64>() / (4.0 * PI)
    }

    /// Random factor with harmonics `1 ≤ l ≤ band`, rescaled to sup norm `amplitude`.
    pub fn random(band: i64, amplitude: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut coefficients = Vec::new();
        for l in 1..=band {
            for m in -l..=l {
                coefficients.push((l, m, rng.random_range(-1.0..1.0)));
            }
        }
        let raw = Self { coefficients, rotation: None };
        let sup = raw.sup_norm(64, 128);
        let scale = if sup > 0.0 { amplitude / sup } else { 0.0 };
        Self { coefficients: raw.coefficients.iter().map(|&(l, m, c)| (l, m, c * scale)).collect(), rotation: None }
    }

    pub fn sup_norm(&self, n_theta: usize, n_phi: usize) -> f64 {
        let mut sup = 0.0f64;
        for i in 0..=n_theta {
            let theta = PI * i as f64 / n_theta as f64;
            for k in 0..n_phi {
                sup = sup.max(self.eval(theta, 2.0 * PI * k as f64 / n_phi as f64).abs());
            }
        }
        sup
    }
}

/// Spinor basis over `(j, m)`, `j = ½ … jmax`, with its quadrature rule.
#[derive(Debug, Clone)]
pub struct SphereBasis {
    /// `2·jmax`.
    pub jmax2: i64,
    /// `(2j, 2m)` pairs.
    pub index: Vec<(i64, i64)>,
    pub cos_nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub n_phi: usize,
    /// Normalized θ-profiles of `u` and `v` at each node: `[basis][node]`.
    u_profile: Vec<Vec<f64>>,
    v_profile: Vec<Vec<f64>>,
}

impl SphereBasis {
    /// Basis up to `jmax = jmax2/2`, with quadrature sized for conformal
    /// factors of band `band`.
    pub fn new(jmax2: i64, band: i64) -> Result<Self> {
        if jmax2 < 1 || jmax2 % 2 == 0 {
            return Err(Error::InvalidInput(format!("jmax must be a positive half-integer, got {}/2", jmax2)));
        }
        let mut index = Vec::new();
        let mut j2 = 1;
        while j2 <= jmax2 {
            let mut m2 = -j2;
            while m2 <= j2 {
                index.push((j2, m2));
                m2 += 2;
            }
            j2 += 2;
        }
        let n_theta = (jmax2 as usize + 1) + 12 * band as usize + 24;
        let n_phi = 2 * (jmax2 as usize + 1) + 24 * band as usize + 16;
        let (cos_nodes, weights) = gauss_legendre(n_theta);
        let profile = |s2: i64| -> Vec<Vec<f64>> {
            index
                .iter()
                .map(|&(j2, m2)| {
                    let n = ((j2 + 1) as f64 / (4.0 * PI)).sqrt();
                    cos_nodes.iter().map(|&x| n * wigner_d(j2, m2, s2, x.acos())).collect()
                })
                .collect()
        };
        let u_profile = profile(1);
        let v_profile = profile(-1);
        let basis = Self { jmax2, index, cos_nodes, weights, n_phi, u_profile, v_profile };
        let residual = basis.orthonormality_residual();
        if residual > 1e-8 {
            return Err(Error::QuadratureInsufficient { residual });
        }
        Ok(basis)
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Largest deviation of the quadrature Gram matrices from the identity.
    pub fn orthonormality_residual(&self) -> f64 {
        let m = self.multiplier_blocks(|_, _| 1.0);
        let n = self.len();
        let mut r = 0.0f64;
        for blk in &m {
            for a in 0..n {
                for b in 0..n {
                    let id = if a == b { 1.0 } else { 0.0 };
                    r = r.max((blk[(a, b)] - Complex64::new(id, 0.0)).norm());
                }
            }
        }
        r
    }

    fn theta_phi(&self, k: usize, l: usize) -> (f64, f64) {
        (self.cos_nodes[k].acos(), 2.0 * PI * l as f64 / self.n_phi as f64)
    }

    /// `∫ h conj(Y_a) Y_b dA` for the `u` and `v` families.
    pub fn multiplier_blocks(&self, h: impl Fn(f64, f64) -> f64) -> [CMat; 2] {
        let n = self.len();
        let dmax = self.jmax2;
        let mut blocks = [Mat::<Complex64>::zeros(n, n), Mat::<Complex64>::zeros(n, n)];
        let dphi = 2.0 * PI / self.n_phi as f64;
        for k in 0..self.cos_nodes.len() {
            let samples: Vec<f64> = (0..self.n_phi).map(|l| {
                let (t, p) = self.theta_phi(k, l);
                h(t, p)
            }).collect();
            // H(Δ) = ∫ h e^{iΔφ} dφ at this colatitude
            let hk: Vec<Complex64> = (-dmax..=dmax)
                .map(|d| {
                    samples
                        .iter()
                        .enumerate()
                        .map(|(l, s)| Complex64::cis(d as f64 * l as f64 * dphi) * (s * dphi))
                        .sum()
                })
                .collect();
            let w = self.weights[k];
            for (blk, prof) in blocks.iter_mut().zip([&self.u_profile, &self.v_profile]) {
                for a in 0..n {
                    let pa = prof[a][k] * w;
                    if pa == 0.0 {
                        continue;
                    }
                    for b in 0..n {
                        let d = (self.index[b].1 - self.index[a].1) / 2;
                        blk[(a, b)] += hk[(d + dmax) as usize] * (pa * prof[b][k]);
                    }
                }
            }
        }
        blocks
    }

    /// Round-sphere stiffness: `(j + ½)` couples `u_{jm}` and `v_{jm}`.
    pub fn stiffness(&self) -> CMat {
        let n = self.len();
        let mut a = Mat::<Complex64>::zeros(2 * n, 2 * n);
        for (i, &(j2, _)) in self.index.iter().enumerate() {
            let c = Complex64::new(0.5 * (j2 + 1) as f64, 0.0);
            a[(i, n + i)] = c;
            a[(n + i, i)] = c;
        }
        a
    }

    /// `∫ h dA` by the same rule.
    pub fn integrate(&self, h: impl Fn(f64, f64) -> f64) -> f64 {
        let dphi = 2.0 * PI / self.n_phi as f64;
        let mut acc = 0.0;
        for k in 0..self.cos_nodes.len() {
            for l in 0..self.n_phi {
                let (t, p) = self.theta_phi(k, l);
                acc += self.weights[k] * dphi * h(t, p);
            }
        }
        acc
    }
}

fn block_diag(blocks: &[CMat; 2]) -> CMat {
    let n = blocks[0].nrows();
    Mat::from_fn(2 * n, 2 * n, |i, j| {
        if i < n && j < n {
            blocks[0][(i, j)]
        } else if i >= n && j >= n {
            blocks[1][(i - n, j - n)]
        } else {
            ZERO
        }
    })
}

pub fn assemble_round(jmax2: i64) -> Result<(CMat, SphereBasis)> {
    let basis = SphereBasis::new(jmax2, 0)?;
    Ok((basis.stiffness(), basis))
}

#[derive(Debug, Clone)]
pub struct SphereSpectrum {
    pub report: SpectrumReport,
    pub values: Vec<f64>,
    pub vectors: CMat,
    pub area: f64,
    pub lambda_bar: f64,
}

pub fn solve_conformal_sphere(omega: &SphereConformalFactor, jmax2: i64) -> Result<SphereSpectrum> {
    let band = omega.band();
    if 2 * band > jmax2 - 1 {
        return Err(Error::InvalidInput(format!(
            "conformal band {band} exceeds jmax − 1/2 = {}",
            (jmax2 - 1) / 2
        )));
    }
    let basis = SphereBasis::new(jmax2, band)?;
    solve_with_basis(omega, &basis)
}

pub fn solve_with_basis(omega: &SphereConformalFactor, basis: &SphereBasis) -> Result<SphereSpectrum> {
    let a = basis.stiffness();
    let m = block_diag(&basis.multiplier_blocks(|t, p| omega.eval(t, p).exp()));
    let eig = linalg::solve_generalized(a.as_ref(), m.as_ref())?;
    let area = basis.integrate(|t, p| (2.0 * omega.eval(t, p)).exp());
    let report = crate::dirac_torus::report_from_values(&eig.values, area);
    let lambda1 = report.first_positive().ok_or(Error::ZeroEigenvalue)?;
    Ok(SphereSpectrum { report, values: eig.values, vectors: eig.vectors, area, lambda_bar: lambda1 * area.sqrt() })
}

/// `Pᵢⱼ = −λ ⟨ω̇ e^{ω} ψᵢ, ψⱼ⟩` on the eigenvectors `cols` of a sphere solve.
pub fn perturbation_matrix(
    omega: &SphereConformalFactor,
    direction: &SphereConformalFactor,
    basis: &SphereBasis,
    spectrum: &SphereSpectrum,
    cols: std::ops::Range<usize>,
) -> CMat {
    let m = block_diag(&basis.multiplier_blocks(|t, p| direction.eval(t, p) * omega.eval(t, p).exp()));
    let vecs: Vec<Vec<Complex64>> = cols.clone().map(|c| linalg::column(&spectrum.vectors, c)).collect();
    let lams: Vec<f64> = cols.map(|c| spectrum.values[c]).collect();
    Mat::from_fn(vecs.len(), vecs.len(), |i, j| linalg::m_inner(m.as_ref(), &vecs[i], &vecs[j]) * (-lams[i]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarSample {
    pub index: usize,
    pub lambda_bar: f64,
    pub variance: f64,
    pub equality_case: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarSweepReport {
    pub samples: Vec<BarSample>,
    pub violations: usize,
    pub tolerance: f64,
    pub min_lambda_bar: f64,
    pub argmin: usize,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarSweepSpec {
    pub count: usize,
    pub band: i64,
    pub amplitude: f64,
    pub seed: u64,
    pub jmax2: i64,
    /// Prepend the round metric `ω = 0` as sample 0.
    pub include_round: bool,
    pub tolerance: f64,
}

/// Variance threshold below which a sample counts as the round metric.
pub const EQUALITY_VARIANCE: f64 = 1e-6;

pub fn bar_sweep(spec: &BarSweepSpec) -> Result<BarSweepReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut factors = Vec::new();
    if spec.include_round {
        factors.push(SphereConformalFactor::zero());
    }
    for _ in 0..spec.count {
        factors.push(SphereConformalFactor::random(spec.band, spec.amplitude, &mut rng));
    }
    let basis = SphereBasis::new(spec.jmax2, spec.band)?;
    let bound = 2.0 * PI.sqrt();
    let results: Vec<Result<BarSample>> = {
        use rayon::prelude::*;
        factors
            .par_iter()
            .enumerate()
            .map(|(index, w)| {
                let s = solve_with_basis(w, &basis)?;
                let variance = w.variance();
                Ok(BarSample { index, lambda_bar: s.lambda_bar, variance, equality_case: variance < EQUALITY_VARIANCE })
            })
            .collect()
    };
    let samples = results.into_iter().collect::<Result<Vec<_>>>()?;
    let violations = samples.iter().filter(|s| s.lambda_bar < bound - spec.tolerance).count();
    let (argmin, min_lambda_bar) = samples
        .iter()
        .map(|s| (s.index, s.lambda_bar))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    Ok(BarSweepReport { samples, violations, tolerance: spec.tolerance, min_lambda_bar, argmin, bound })
}
