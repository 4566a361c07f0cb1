//! Lattices `Γ = s·(Z(1,0) + Z(a,b))`, spin characters and the affine dual
//! lattice `Γ*_χ` that indexes flat-torus Dirac spectra.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of points an enumeration may produce.
pub const DEFAULT_ENUMERATION_CAP: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeBasis {
    a: f64,
    b: f64,
    scale: f64,
}

impl LatticeBasis {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        Self::scaled(a, b, 1.0)
    }

    /// Lattice `scale·(Z(1,0) + Z(a,b))`. The unscaled form is the usual one;
    /// the scale only matters for scaling checks and moduli reduction.
    pub fn scaled(a: f64, b: f64, scale: f64) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::DegenerateLattice { b });
        }
        if !a.is_finite() {
            return Err(Error::InvalidInput(format!("lattice parameter a = {a}")));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidInput(format!("lattice scale {scale}")));
        }
        Ok(Self { a, b, scale })
    }

    pub fn square() -> Self {
        Self { a: 0.0, b: 1.0, scale: 1.0 }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Unit-cell area.
    pub fn area(&self) -> f64 {
        self.scale * self.scale * self.b
    }

    /// The generators `γ₁, γ₂` as Euclidean vectors.
    pub fn generators(&self) -> [[f64; 2]; 2] {
        let s = self.scale;
        [[s, 0.0], [s * self.a, s * self.b]]
    }

    /// Physical coordinates of the lattice-coordinate point `s γ₁ + t γ₂`.
    pub fn to_plane(&self, s: f64, t: f64) -> (f64, f64) {
        let [g1, g2] = self.generators();
        (s * g1[0] + t * g2[0], s * g1[1] + t * g2[1])
    }

    pub fn with_scale(&self, scale: f64) -> Result<Self> {
        Self::scaled(self.a, self.b, scale)
    }

    /// Reduce `τ = a + ib` into `|a| ≤ ½, |τ| ≥ 1` by `SL(2,Z)` moves. The
    /// returned basis spans a lattice congruent to the original one.
    pub fn reduce(&self) -> Self {
        let (mut a, mut b, mut scale) = (self.a, self.b, self.scale);
        for _ in 0..200 {
            a -= a.round();
            let r2 = a * a + b * b;
            if r2 >= 1.0 - 1e-15 {
                break;
            }
            // Z + Zτ = τ·(Z + Z(−1/τ))
            scale *= r2.sqrt();
            a = -a / r2;
            b /= r2;
        }
        if a > 0.5 {
            a -= 1.0;
        } else if a < -0.5 {
            a += 1.0;
        }
        Self { a, b, scale }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinCharacter {
    chi1: u8,
    chi2: u8,
}

impl SpinCharacter {
    pub fn new(chi1: u8, chi2: u8) -> Result<Self> {
        if chi1 > 1 || chi2 > 1 {
            return Err(Error::InvalidInput(format!(
                "spin character values must be bits, got ({chi1}, {chi2})"
            )));
        }
        Ok(Self { chi1, chi2 })
    }

    pub fn trivial() -> Self {
        Self { chi1: 0, chi2: 0 }
    }

    pub fn all() -> [Self; 4] {
        [(0, 0), (0, 1), (1, 0), (1, 1)].map(|(chi1, chi2)| Self { chi1, chi2 })
    }

    pub fn chi1(&self) -> u8 {
        self.chi1
    }

    pub fn chi2(&self) -> u8 {
        self.chi2
    }

    pub fn is_trivial(&self) -> bool {
        self.chi1 == 0 && self.chi2 == 0
    }

    /// χ(n₁γ₁ + n₂γ₂) ∈ {0, 1}.
    pub fn value(&self, n1: i64, n2: i64) -> u8 {
        (n1 * self.chi1 as i64 + n2 * self.chi2 as i64).rem_euclid(2) as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualVector {
    pub u: f64,
    pub v: f64,
}

impl DualVector {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn norm_sq(&self) -> f64 {
        self.u * self.u + self.v * self.v
    }

    pub fn norm(&self) -> f64 {
        self.u.hypot(self.v)
    }

    pub fn pair(&self, x: f64, y: f64) -> f64 {
        self.u * x + self.v * y
    }
}

/// A point of `Γ*_χ` written as `ξ = ½(k₁γ₁* + k₂γ₂*)`, with `kⱼ ≡ χⱼ mod 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualPoint {
    pub k1: i64,
    pub k2: i64,
    pub xi: DualVector,
}

impl DualPoint {
    /// Integer frequency of `ξ − ξ'` in lattice coordinates.
    pub fn difference(&self, other: &DualPoint) -> (i64, i64) {
        ((self.k1 - other.k1) / 2, (self.k2 - other.k2) / 2)
    }
}

pub fn dual_basis(lattice: &LatticeBasis) -> Result<(DualVector, DualVector)> {
    let (a, b, s) = (lattice.a, lattice.b, lattice.scale);
    if !(b > 0.0) {
        return Err(Error::DegenerateLattice { b });
    }
    Ok((DualVector::new(1.0 / s, -a / (b * s)), DualVector::new(0.0, 1.0 / (b * s))))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusGeometry {
    lattice: LatticeBasis,
    character: SpinCharacter,
    dual: (DualVector, DualVector),
}

impl TorusGeometry {
    pub fn new(lattice: LatticeBasis, character: SpinCharacter) -> Result<Self> {
        let dual = dual_basis(&lattice)?;
        let [g1, g2] = lattice.generators();
        let defect = [
            (dual.0.pair(g1[0], g1[1]) - 1.0).abs(),
            dual.0.pair(g2[0], g2[1]).abs(),
            dual.1.pair(g1[0], g1[1]).abs(),
            (dual.1.pair(g2[0], g2[1]) - 1.0).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        if defect > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "dual basis pairing defect {defect:e} for a = {}, b = {}",
                lattice.a, lattice.b
            )));
        }
        Ok(Self { lattice, character, dual })
    }

    pub fn from_parts(a: f64, b: f64, chi1: u8, chi2: u8) -> Result<Self> {
        Self::new(LatticeBasis::new(a, b)?, SpinCharacter::new(chi1, chi2)?)
    }

    pub fn lattice(&self) -> &LatticeBasis {
        &self.lattice
    }

    pub fn character(&self) -> SpinCharacter {
        self.character
    }

    pub fn dual(&self) -> (DualVector, DualVector) {
        self.dual
    }

    pub fn area(&self) -> f64 {
        self.lattice.area()
    }

    /// `ξ = ½(k₁γ₁* + k₂γ₂*)`.
    pub fn dual_vector(&self, k1: i64, k2: i64) -> DualVector {
        let (d1, d2) = self.dual;
        let (c1, c2) = (0.5 * k1 as f64, 0.5 * k2 as f64);
        DualVector::new(c1 * d1.u + c2 * d2.u, c1 * d1.v + c2 * d2.v)
    }

    pub fn point(&self, k1: i64, k2: i64) -> DualPoint {
        DualPoint { k1, k2, xi: self.dual_vector(k1, k2) }
    }

    /// True if `(k₁, k₂)` indexes a point of `Γ*_χ`.
    pub fn admits(&self, k1: i64, k2: i64) -> bool {
        k1.rem_euclid(2) == self.character.chi1 as i64 && k2.rem_euclid(2) == self.character.chi2 as i64
    }

    pub fn with_lattice(&self, lattice: LatticeBasis) -> Result<Self> {
        Self::new(lattice, self.character)
    }
}

/// `η = ½ Σ χ(γⱼ) γⱼ*`.
pub fn affine_shift(geometry: &TorusGeometry) -> DualVector {
    let chi = geometry.character;
    geometry.dual_vector(chi.chi1 as i64, chi.chi2 as i64)
}

pub fn enumerate_shifted_dual(geometry: &TorusGeometry, radius: f64) -> Result<Vec<DualPoint>> {
    enumerate_shifted_dual_capped(geometry, radius, DEFAULT_ENUMERATION_CAP)
}

/// Half-width of the coefficient box containing every `ξ` with `|ξ| ≤ radius`.
fn coefficient_bound(geometry: &TorusGeometry, radius: f64) -> i64 {
    // |cᵢ| ≤ |c| ≤ r·‖G‖^{1/2}, G the Gram matrix of the primal generators
    // (the inverse of the dual Gram matrix).
    let [g1, g2] = geometry.lattice.generators();
    let g11 = g1[0] * g1[0] + g1[1] * g1[1];
    let g22 = g2[0] * g2[0] + g2[1] * g2[1];
    let g12 = g1[0] * g2[0] + g1[1] * g2[1];
    let half_tr = 0.5 * (g11 + g22);
    let lmax = half_tr + (0.25 * (g11 - g22).powi(2) + g12 * g12).sqrt();
    (radius * lmax.sqrt()).floor() as i64 + 1
}

pub fn enumerate_shifted_dual_capped(
    geometry: &TorusGeometry,
    radius: f64,
    cap: usize,
) -> Result<Vec<DualPoint>> {
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::InvalidInput(format!("enumeration radius {radius}")));
    }
    let n = coefficient_bound(geometry, radius);
    let side = (2 * n + 1) as f64;
    let estimate = std::f64::consts::PI * radius * radius * geometry.area() + 4.0 * side;
    if side * side > 64.0 * cap as f64 || estimate > cap as f64 {
        return Err(Error::RadiusTooLarge { radius, estimate: estimate as usize, cap });
    }
    let chi = geometry.character;
    let r2 = radius * radius * (1.0 + 1e-12);
    let mut out = Vec::new();
    for n1 in -n..=n {
        let k1 = 2 * n1 + chi.chi1 as i64;
        for n2 in -n..=n {
            let k2 = 2 * n2 + chi.chi2 as i64;
            let p = geometry.point(k1, k2);
            if p.xi.norm_sq() <= r2 {
                out.push(p);
            }
        }
    }
    if out.len() > cap {
        return Err(Error::RadiusTooLarge { radius, estimate: out.len(), cap });
    }
    sort_points(&mut out);
    Ok(out)
}

/// Sort by `|ξ|`, then lexicographically by `(u, v)`.
pub fn sort_points(points: &mut [DualPoint]) {
    points.sort_by(|p, q| {
        p.xi.norm_sq()
            .total_cmp(&q.xi.norm_sq())
            .then(p.xi.u.total_cmp(&q.xi.u))
            .then(p.xi.v.total_cmp(&q.xi.v))
    });
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuliCheck {
    pub valid: bool,
    pub diagnostic: String,
}

/// Fundamental-domain membership. Trivial character: `|a| ≤ ½, a² + b² ≥ 1`.
/// Non-trivial characters must be in the normal form `χ(γ₁) = 0, χ(γ₂) = 1`
/// and satisfy `|a| ≤ ½, b² + (|a| − ½)² ≥ ¼`.
pub fn validate_moduli(geometry: &TorusGeometry) -> ModuliCheck {
    let (a, b) = (geometry.lattice.a, geometry.lattice.b);
    let tol = 1e-12;
    let fail = |msg: String| ModuliCheck { valid: false, diagnostic: msg };
    if a.abs() > 0.5 + tol {
        return fail(format!("|a| ≤ 1/2 violated: |a| = {}", a.abs()));
    }
    let chi = geometry.character;
    if chi.is_trivial() {
        let r2 = a * a + b * b;
        if r2 < 1.0 - tol {
            return fail(format!("a² + b² ≥ 1 violated: a² + b² = {r2}"));
        }
        return ModuliCheck { valid: true, diagnostic: "trivial character, fundamental domain".into() };
    }
    if chi.chi1 != 0 || chi.chi2 != 1 {
        return fail(format!(
            "character ({}, {}) is not in the normal form χ(1,0) = 0, χ(a,b) = 1",
            chi.chi1, chi.chi2
        ));
    }
    let q = b * b + (a.abs() - 0.5).powi(2);
    if q < 0.25 - tol {
        return fail(format!("b² + (|a| − 1/2)² ≥ 1/4 violated: value {q}"));
    }
    ModuliCheck { valid: true, diagnostic: "non-trivial character, fundamental domain".into() }
}
