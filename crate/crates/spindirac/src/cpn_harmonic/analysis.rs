use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::maps::{quaternionic_structure, round_factor, Chart, HomogeneousMap, SamplePoint, Surface, SurfaceKind};
use crate::error::{Error, Result};
use crate::jet::Jet;

/// Points where `|F|²` falls below this are excluded from quadrature.
pub const LIFT_TOLERANCE: f64 = 1e-16;

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

fn nsq(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Gauge-invariant first and second order data of a lift at one point, in
/// chart coordinates (no metric factor).
#[derive(Debug, Clone)]
pub struct LiftPoint {
    pub f: Vec<Complex64>,
    pub norm_sq: f64,
    /// `π⊥ ∂_z F` and `π⊥ ∂_z̄ F`.
    pub dz: Vec<Complex64>,
    pub dzb: Vec<Complex64>,
    /// `π⊥[F_zz̄ − a F_z − b F_z̄]`, `a = ⟨F_z̄,F⟩/|F|²`, `b = ⟨F_z,F⟩/|F|²`.
    pub tension: Vec<Complex64>,
}

impl LiftPoint {
    pub fn new(jets: &[Jet]) -> Result<Self> {
        let f: Vec<Complex64> = jets.iter().map(|j| j.v).collect();
        let fz: Vec<Complex64> = jets.iter().map(|j| j.z).collect();
        let fzb: Vec<Complex64> = jets.iter().map(|j| j.zb).collect();
        let fzzb: Vec<Complex64> = jets.iter().map(|j| j.zzb).collect();
        let n = nsq(&f);
        if n < LIFT_TOLERANCE {
            return Err(Error::LiftVanishes { norm: n.sqrt() });
        }
        let perp = |v: &[Complex64]| -> Vec<Complex64> {
            let c = dot(v, &f) / n;
            v.iter().zip(&f).map(|(x, y)| x - c * y).collect()
        };
        let a = dot(&fzb, &f) / n;
        let b = dot(&fz, &f) / n;
        let raw: Vec<Complex64> = (0..f.len()).map(|k| fzzb[k] - a * fz[k] - b * fzb[k]).collect();
        Ok(Self { dz: perp(&fz), dzb: perp(&fzb), tension: perp(&raw), norm_sq: n, f })
    }

    /// `4|π⊥F_z|²/|F|²`, the `(1,0)` energy per unit coordinate area.
    pub fn e10(&self) -> f64 {
        4.0 * nsq(&self.dz) / self.norm_sq
    }

    pub fn e01(&self) -> f64 {
        4.0 * nsq(&self.dzb) / self.norm_sq
    }

    pub fn tension_sq(&self) -> f64 {
        16.0 * nsq(&self.tension) / self.norm_sq
    }

    /// `4|⟨π⊥F_z, π⊥F_z̄⟩|/|F|²`.
    pub fn hopf(&self) -> f64 {
        4.0 * dot(&self.dz, &self.dzb).norm() / self.norm_sq
    }

    /// `1 − |⟨u, I(F)⟩|/(|u||I(F)|)` with `u = π⊥F_z̄`; `None` where `u` vanishes.
    pub fn alignment(&self) -> Option<f64> {
        let i = quaternionic_structure(&self.f);
        let un = nsq(&self.dzb).sqrt();
        if un < 1e-12 * self.norm_sq.sqrt() {
            return None;
        }
        Some(1.0 - dot(&self.dzb, &i).norm() / (un * self.norm_sq.sqrt()))
    }
}

/// Evaluate all sample points in parallel, dropping those where the lift vanishes.
fn evaluate(map: &(impl HomogeneousMap + ?Sized), surface: &Surface) -> (Vec<(SamplePoint, LiftPoint)>, usize) {
    let res: Vec<Option<(SamplePoint, LiftPoint)>> = surface
        .points
        .par_iter()
        .map(|p| LiftPoint::new(&map.jets(p.chart, p.z)).ok().map(|l| (*p, l)))
        .collect();
    let excluded = res.iter().filter(|r| r.is_none()).count();
    (res.into_iter().flatten().collect(), excluded)
}

/// `(|∂Ψ|²_g, |∂̄Ψ|²_g)` at one point with conformal factor `e^{2σ}`.
pub fn energy_densities(map: &(impl HomogeneousMap + ?Sized), chart: Chart, z: Complex64, conformal: f64) -> Result<(f64, f64)> {
    let l = LiftPoint::new(&map.jets(chart, z))?;
    Ok((l.e10() / conformal, l.e01() / conformal))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub e10: f64,
    pub e01: f64,
    pub degree: i64,
    pub degree_residual: f64,
    pub excluded_points: usize,
}

pub fn energies(map: &(impl HomogeneousMap + ?Sized), surface: &Surface) -> Result<EnergyReport> {
    let (pts, excluded) = evaluate(map, surface);
    let mut e10 = 0.0;
    let mut e01 = 0.0;
    for (p, l) in &pts {
        e10 += p.weight * l.e10() / p.conformal;
        e01 += p.weight * l.e01() / p.conformal;
    }
    let x = (e10 - e01) / (4.0 * std::f64::consts::PI);
    let degree = x.round() as i64;
    let degree_residual = (x - degree as f64).abs();
    if degree_residual > 1e-3 {
        return Err(Error::QuadratureUnresolved { residual: degree_residual });
    }
    Ok(EnergyReport { e10, e01, degree, degree_residual, excluded_points: excluded })
}

/// `L²(g)` norm of the tension of `Ψ`.
pub fn harmonic_residual(map: &(impl HomogeneousMap + ?Sized), surface: &Surface) -> f64 {
    let (pts, _) = evaluate(map, surface);
    pts.iter().map(|(p, l)| p.weight * l.tension_sq() / (p.conformal * p.conformal)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuaternionicReport {
    /// Worst misalignment of `∂̄Ψ` with `I(F)`; `None` if `∂̄Ψ ≡ 0`.
    pub alignment: Option<f64>,
    /// `min |∂̄Ψ|_g` over the samples.
    pub min_dbar_norm: f64,
    pub degenerate: bool,
}

pub fn quaternionic_check(map: &(impl HomogeneousMap + ?Sized), surface: &Surface) -> Result<QuaternionicReport> {
    if map.dim() % 2 == 1 {
        return Err(Error::EvenAmbientDimension { n: map.dim() - 1 });
    }
    let (pts, _) = evaluate(map, surface);
    let mut alignment: Option<f64> = None;
    let mut min_dbar = f64::INFINITY;
    let mut any_degenerate = false;
    for (p, l) in &pts {
        min_dbar = min_dbar.min((l.e01() / p.conformal).sqrt());
        match l.alignment() {
            Some(a) => alignment = Some(alignment.map_or(a, |b| b.max(a))),
            None => any_degenerate = true,
        }
    }
    Ok(QuaternionicReport { alignment, min_dbar_norm: min_dbar, degenerate: any_degenerate || alignment.is_none() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InducedMetric {
    /// `|∂̄Ψ|²_g` at each sample, so that `g_Ψ = |∂̄Ψ|²_g g`.
    pub factor: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// Samples where the factor is below `1e−10` of its maximum.
    pub near_zeros: usize,
}

pub fn induced_metric(map: &(impl HomogeneousMap + ?Sized), surface: &Surface) -> Result<InducedMetric> {
    let (pts, _) = evaluate(map, surface);
    let factor: Vec<f64> = pts.iter().map(|(p, l)| l.e01() / p.conformal).collect();
    let max = factor.iter().fold(0.0f64, |a, x| a.max(*x));
    let min = factor.iter().fold(f64::INFINITY, |a, x| a.min(*x));
    if max < 1e-20 {
        return Err(Error::HolomorphicMap);
    }
    let near_zeros = factor.iter().filter(|x| **x < 1e-10 * max).count();
    Ok(InducedMetric { factor, min, max, near_zeros })
}

/// `sup |⟨π⊥F_z, π⊥F_z̄⟩|_g`, zero exactly for weakly conformal maps.
pub fn weak_conformality(map: &(impl HomogeneousMap + ?Sized), surface: &Surface) -> f64 {
    let (pts, _) = evaluate(map, surface);
    pts.iter().map(|(p, l)| l.hopf() / p.conformal).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub degree: i64,
    /// `−χ(S²) − deg·χ(CP¹)`.
    pub predicted_index: i64,
    pub near_zeros: usize,
    pub min_dbar_norm: f64,
}

pub fn index_consistency(map: &(impl HomogeneousMap + ?Sized), surface: &Surface) -> Result<IndexReport> {
    if surface.kind != SurfaceKind::Sphere {
        return Err(Error::InvalidInput("index consistency is defined for sphere maps".into()));
    }
    let metric = induced_metric(map, surface)?;
    let e = energies(map, surface)?;
    Ok(IndexReport {
        degree: e.degree,
        predicted_index: -2 - 2 * e.degree,
        near_zeros: metric.near_zeros,
        min_dbar_norm: metric.min.sqrt(),
    })
}

/// Largest disagreement of `(|∂Ψ|²_g, |∂̄Ψ|²_g)` between the two sphere charts
/// over `samples` points of the band `π/3 ≤ θ ≤ 2π/3`.
pub fn chart_overlap_defect(map: &(impl HomogeneousMap + ?Sized), samples: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for k in 0..samples {
        let theta = std::f64::consts::PI * (1.0 / 3.0 + (k as f64 + 0.5) / (3.0 * samples as f64));
        let phi = 2.0 * std::f64::consts::PI * (k as f64 * 0.618_033_988_749_895).fract();
        let z = Complex64::from_polar((0.5 * theta).tan(), phi);
        let w = z.inv();
        let (a10, a01) = energy_densities(map, Chart::North, z, round_factor(z))?;
        let (b10, b01) = energy_densities(map, Chart::South, w, round_factor(w))?;
        worst = worst.max((a10 - b10).abs()).max((a01 - b01).abs());
    }
    Ok(worst)
}
