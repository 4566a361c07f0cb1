//! Closed-form Dirac spectra: flat tori (`±2π|ξ|`, `ξ ∈ Γ*_χ`) and the unit
//! round sphere, with both eigenvalue indexings.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice_spin::{enumerate_shifted_dual, TorusGeometry};

/// Relative tolerance used to group coincident lattice norms.
pub const LEVEL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub value: f64,
    pub complex_multiplicity: usize,
    pub quaternionic_multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Sorted by eigenvalue; the kernel, if any, appears as a zero entry.
    pub entries: Vec<SpectrumEntry>,
    pub area: f64,
    pub kernel_quaternionic_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct NormalizedEigenvalue {
    pub value: f64,
}

impl SpectrumReport {
    /// Build a symmetric report from positive levels `(λ, quaternionic multiplicity)`.
    pub fn from_positive_levels(levels: &[(f64, usize)], kernel_quaternionic_dim: usize, area: f64) -> Self {
        let mut entries = Vec::with_capacity(2 * levels.len() + 1);
        for &(value, q) in levels.iter().rev() {
            entries.push(SpectrumEntry { value: -value, complex_multiplicity: 2 * q, quaternionic_multiplicity: q });
        }
        if kernel_quaternionic_dim > 0 {
            entries.push(SpectrumEntry {
                value: 0.0,
                complex_multiplicity: 2 * kernel_quaternionic_dim,
                quaternionic_multiplicity: kernel_quaternionic_dim,
            });
        }
        for &(value, q) in levels {
            entries.push(SpectrumEntry { value, complex_multiplicity: 2 * q, quaternionic_multiplicity: q });
        }
        Self { entries, area, kernel_quaternionic_dim }
    }

    pub fn positive(&self) -> impl Iterator<Item = &SpectrumEntry> {
        self.entries.iter().filter(|e| e.value > 0.0)
    }

    /// Positive eigenvalues repeated by quaternionic multiplicity (`λ₁ ≤ λ₂ ≤ …`).
    pub fn positive_enumeration(&self) -> Vec<f64> {
        self.positive()
            .flat_map(|e| std::iter::repeat(e.value).take(e.quaternionic_multiplicity))
            .collect()
    }

    /// `λ_{k̄}` enumeration: kernel first, then each `|λ|` once per
    /// quaternionic dimension of the `λ²`-eigenspace of `D²`.
    pub fn squared_enumeration(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.kernel_quaternionic_dim];
        let mut levels: Vec<(f64, usize)> = Vec::new();
        for e in self.entries.iter().filter(|e| e.value != 0.0) {
            let a = e.value.abs();
            match levels.iter_mut().find(|(v, _)| (*v - a).abs() <= LEVEL_TOLERANCE * a) {
                Some(level) => level.1 += e.quaternionic_multiplicity,
                None => levels.push((a, e.quaternionic_multiplicity)),
            }
        }
        levels.sort_by(|x, y| x.0.total_cmp(&y.0));
        for (v, q) in levels {
            out.extend(std::iter::repeat(v).take(q));
        }
        out
    }

    pub fn first_positive(&self) -> Option<f64> {
        self.positive().next().map(|e| e.value)
    }

    /// Positive index `k` at which the value `λ` first appears, if computed.
    pub fn first_index_of(&self, value: f64) -> Option<usize> {
        let mut k = 1;
        for e in self.positive() {
            if (e.value - value).abs() <= LEVEL_TOLERANCE * value.abs().max(1.0) {
                return Some(k);
            }
            k += e.quaternionic_multiplicity;
        }
        None
    }
}

/// Group sorted non-negative values into levels with relative tolerance `tol`.
pub fn group_levels(sorted: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for &x in sorted {
        match out.last_mut() {
            Some((v, n)) if (x - *v).abs() <= tol * v.abs().max(x.abs()) || (x == 0.0 && *v == 0.0) => *n += 1,
            _ => out.push((x, 1)),
        }
    }
    out
}

pub fn kernel_dimension(geometry: &TorusGeometry) -> usize {
    usize::from(geometry.character().is_trivial())
}

pub fn torus_spectrum(geometry: &TorusGeometry, count: usize) -> Result<SpectrumReport> {
    if count == 0 {
        return Err(Error::InvalidInput("spectrum count must be at least 1".into()));
    }
    let (d1, d2) = geometry.dual();
    let step = d1.norm().max(d2.norm());
    let mut radius = step * (2.0 + (count as f64).sqrt());
    loop {
        let points = enumerate_shifted_dual(geometry, radius)?;
        let norms: Vec<f64> = points.iter().map(|p| p.xi.norm()).collect();
        let levels = group_levels(&norms, LEVEL_TOLERANCE);
        // Only levels strictly inside the ball are known to be complete.
        let complete: Vec<(f64, usize)> = levels
            .into_iter()
            .filter(|&(v, _)| v > 0.0 && v < radius * (1.0 - 10.0 * LEVEL_TOLERANCE))
            .collect();
        if complete.len() >= count {
            let levels: Vec<(f64, usize)> =
                complete[..count].iter().map(|&(v, n)| (2.0 * PI * v, n / 2)).collect();
            return Ok(SpectrumReport::from_positive_levels(&levels, kernel_dimension(geometry), geometry.area()));
        }
        radius *= 2.0;
    }
}

pub fn sphere_spectrum(count: usize) -> Result<SpectrumReport> {
    if count == 0 {
        return Err(Error::InvalidInput("spectrum count must be at least 1".into()));
    }
    let levels: Vec<(f64, usize)> = (1..=count).map(|j| (j as f64, j)).collect();
    Ok(SpectrumReport::from_positive_levels(&levels, 0, 4.0 * PI))
}

pub fn normalized(report: &SpectrumReport, k: usize) -> Result<NormalizedEigenvalue> {
    let list = report.positive_enumeration();
    if k == 0 || k > list.len() {
        return Err(Error::IndexBeyondComputed { index: k, available: list.len() });
    }
    Ok(NormalizedEigenvalue { value: list[k - 1] * report.area.sqrt() })
}

pub fn squared_index(report: &SpectrumReport, k_bar: usize) -> Result<f64> {
    let list = report.squared_enumeration();
    if k_bar == 0 || k_bar > list.len() {
        return Err(Error::IndexBeyondComputed { index: k_bar, available: list.len() });
    }
    Ok(list[k_bar - 1])
}
