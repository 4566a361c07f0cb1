//! Second-order Wirtinger jets: value, `∂_z`, `∂_{z̄}` and `∂_z∂_{z̄}` carried
//! exactly through arithmetic.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub v: Complex64,
    pub z: Complex64,
    pub zb: Complex64,
    pub zzb: Complex64,
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

impl Jet {
    pub const fn new(v: Complex64, z: Complex64, zb: Complex64, zzb: Complex64) -> Self {
        Self { v, z, zb, zzb }
    }

    pub const fn constant(v: Complex64) -> Self {
        Self { v, z: ZERO, zb: ZERO, zzb: ZERO }
    }

    pub const fn zero() -> Self {
        Self::constant(ZERO)
    }

    pub const fn one() -> Self {
        Self::constant(ONE)
    }

    /// The coordinate function `z`.
    pub fn var(z: Complex64) -> Self {
        Self { v: z, z: ONE, zb: ZERO, zzb: ZERO }
    }

    /// The coordinate function `z̄`.
    pub fn var_conj(z: Complex64) -> Self {
        Self { v: z.conj(), z: ZERO, zb: ONE, zzb: ZERO }
    }

    /// Holomorphic function with value `f` and derivative `df`.
    pub fn holomorphic(f: Complex64, df: Complex64) -> Self {
        Self { v: f, z: df, zb: ZERO, zzb: ZERO }
    }

    pub fn conj(self) -> Self {
        Self { v: self.v.conj(), z: self.zb.conj(), zb: self.z.conj(), zzb: self.zzb.conj() }
    }

    pub fn scale(self, c: Complex64) -> Self {
        Self { v: self.v * c, z: self.z * c, zb: self.zb * c, zzb: self.zzb * c }
    }

    pub fn recip(self) -> Self {
        let r = self.v.inv();
        let r2 = r * r;
        Self {
            v: r,
            z: -self.z * r2,
            zb: -self.zb * r2,
            zzb: -self.zzb * r2 + self.z * self.zb * r2 * r * 2.0,
        }
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        Self { v: e, z: self.z * e, zb: self.zb * e, zzb: (self.zzb + self.z * self.zb) * e }
    }

    pub fn powi(self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = acc * self;
        }
        acc
    }

    /// `|f|²` as a jet.
    pub fn norm_sqr(self) -> Self {
        self * self.conj()
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet { v: self.v + o.v, z: self.z + o.z, zb: self.zb + o.zb, zzb: self.zzb + o.zzb }
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, o: Jet) {
        *self = *self + o;
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet { v: self.v - o.v, z: self.z - o.z, zb: self.zb - o.zb, zzb: self.zzb - o.zzb }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-ONE)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            z: self.z * o.v + self.v * o.z,
            zb: self.zb * o.v + self.v * o.zb,
            zzb: self.zzb * o.v + self.z * o.zb + self.zb * o.z + self.v * o.zzb,
        }
    }
}

impl Mul<Complex64> for Jet {
    type Output = Jet;
    fn mul(self, c: Complex64) -> Jet {
        self.scale(c)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        self.scale(Complex64::new(c, 0.0))
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

/// Hermitian product `Σ aᵢ conj(bᵢ)` of jet vectors.
pub fn hermitian(a: &[Jet], b: &[Jet]) -> Jet {
    a.iter().zip(b).fold(Jet::zero(), |acc, (x, y)| acc + *x * y.conj())
}

/// `Σ |aᵢ|²` as a jet.
pub fn norm_sqr(a: &[Jet]) -> Jet {
    hermitian(a, a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    // f(z) = z² z̄ + 3 z̄: f_z = 2 z z̄, f_z̄ = z² + 3, f_zz̄ = 2z
    #[test]
    fn product_rule() {
        let p = c(0.3, -0.7);
        let z = Jet::var(p);
        let zb = Jet::var_conj(p);
        let f = z * z * zb + zb * 3.0;
        assert!((f.z - p * p.conj() * 2.0).norm() < 1e-15);
        assert!((f.zb - (p * p + 3.0)).norm() < 1e-15);
        assert!((f.zzb - p * 2.0).norm() < 1e-15);
    }

    // ∂_z∂_z̄ (1 + |z|²)⁻¹ = (|z|² − 1)/(1 + |z|²)³
    #[test]
    fn reciprocal_second_derivative() {
        let p = c(0.4, 0.9);
        let r2 = p.norm_sqr();
        let f = (Jet::one() + Jet::var(p) * Jet::var_conj(p)).recip();
        let expect_zzb = (r2 - 1.0) / (1.0 + r2).powi(3);
        assert!((f.zzb - c(expect_zzb, 0.0)).norm() < 1e-14);
        assert!((f.z + p.conj() / (1.0 + r2).powi(2)).norm() < 1e-15);
    }

    #[test]
    fn conjugation_swaps_derivatives() {
        let p = c(-0.2, 0.5);
        let f = Jet::var(p) * Jet::var(p) + Jet::var_conj(p) * c(0.0, 2.0);
        let g = f.conj();
        assert!((g.z - f.zb.conj()).norm() < 1e-15);
        assert!((g.zb - f.z.conj()).norm() < 1e-15);
    }

    #[test]
    fn exponential_matches_series() {
        let p = c(0.1, 0.2);
        let w = c(0.0, 2.0);
        // e^{w z + conj(w) z̄} real-phase plane wave
        let e = (Jet::var(p) * w + Jet::var_conj(p) * w.conj()).exp();
        assert!((e.zzb - w * w.conj() * e.v).norm() < 1e-14);
    }
}
