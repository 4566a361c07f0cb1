use serde::{Deserialize, Serialize};

use super::analysis::{energies, harmonic_residual, induced_metric, quaternionic_check, weak_conformality, chart_overlap_defect};
use super::frenet::veronese;
use super::maps::Surface;
use super::spinors::{energy_momentum, SphereEigenLift};
use crate::error::Result;

/// Thresholds for the Veronese checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VeroneseTolerances {
    pub harmonic: f64,
    pub alignment: f64,
    pub metric_ratio: f64,
    pub energy_relative: f64,
    pub density: f64,
    pub criticality: f64,
    pub conformality: f64,
}

impl Default for VeroneseTolerances {
    fn default() -> Self {
        Self {
            harmonic: 1e-8,
            alignment: 1e-9,
            metric_ratio: 1e-8,
            energy_relative: 1e-6,
            density: 1e-8,
            criticality: 1e-6,
            conformality: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VeroneseCheck {
    pub m: usize,
    pub harmonic_residual: f64,
    pub alignment: f64,
    pub min_dbar_norm: f64,
    /// Largest deviation of `g_Ψ/g_{S²}` from `m²`.
    pub metric_ratio_error: f64,
    pub e10: f64,
    pub e01: f64,
    pub degree: i64,
    pub energy_relative_error: f64,
    pub eigenvalue: f64,
    pub density_defect: f64,
    pub trace_residual: f64,
    pub criticality_residual: f64,
    pub weak_conformality: f64,
    pub chart_overlap: f64,
    pub pass: bool,
}

pub fn veronese_check(m: usize, surface: &Surface, tol: &VeroneseTolerances) -> Result<VeroneseCheck> {
    let (_, psi) = veronese(m)?;
    let m2 = (m * m) as f64;
    let e = energies(&psi, surface)?;
    let harmonic = harmonic_residual(&psi, surface);
    let q = quaternionic_check(&psi, surface)?;
    let metric = induced_metric(&psi, surface)?;
    let metric_err = (metric.max - m2).abs().max((metric.min - m2).abs());
    let weak = weak_conformality(&psi, surface);
    let overlap = chart_overlap_defect(&psi, 64)?;
    let lift = SphereEigenLift::new(psi)?;
    let density = lift.density_defect(surface);
    let qt = energy_momentum(&lift, surface, lift.eigenvalue)?;
    let energy_err = (e.e01 - 4.0 * std::f64::consts::PI * m2).abs() / (4.0 * std::f64::consts::PI * m2);
    let alignment = q.alignment.unwrap_or(f64::INFINITY);
    let pass = harmonic <= tol.harmonic
        && alignment <= tol.alignment
        && metric_err <= tol.metric_ratio
        && energy_err <= tol.energy_relative
        && density <= tol.density
        && qt.criticality_residual <= tol.criticality
        && weak <= tol.conformality;
    Ok(VeroneseCheck {
        m,
        harmonic_residual: harmonic,
        alignment,
        min_dbar_norm: q.min_dbar_norm,
        metric_ratio_error: metric_err,
        e10: e.e10,
        e01: e.e01,
        degree: e.degree,
        energy_relative_error: energy_err,
        eigenvalue: lift.eigenvalue,
        density_defect: density,
        trace_residual: qt.trace_residual,
        criticality_residual: qt.criticality_residual,
        weak_conformality: weak,
        chart_overlap: overlap,
        pass,
    })
}
