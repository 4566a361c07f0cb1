use num_complex::Complex64;

use super::maps::{quaternionic_structure, Chart, HomogeneousMap};
use crate::error::{Error, Result};
use crate::jet::{hermitian, norm_sqr, Jet};

/// Holomorphic curve `[P₀(z) : … : Pₙ(z)]` with polynomial components.
#[derive(Debug, Clone, PartialEq)]
pub struct HolomorphicCurve {
    /// `coefficients[k][i]` multiplies `zⁱ` in component `k`.
    pub coefficients: Vec<Vec<Complex64>>,
}

impl HolomorphicCurve {
    pub fn new(coefficients: Vec<Vec<Complex64>>) -> Self {
        Self { coefficients }
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn degree(&self) -> usize {
        self.coefficients.iter().map(|c| c.len().saturating_sub(1)).max().unwrap_or(0)
    }

    /// `∂_z^order` of every component at `z`.
    pub fn derivative(&self, z: Complex64, order: usize) -> Vec<Complex64> {
        self.coefficients
            .iter()
            .map(|c| {
                (order..c.len())
                    .map(|i| {
                        let falling: f64 = (i - order + 1..=i).map(|x| x as f64).product();
                        c[i] * falling * z.powi((i - order) as i32)
                    })
                    .sum()
            })
            .collect()
    }

    /// The same curve in the chart `w = 1/z`: `w^d P(1/w)`.
    pub fn inverted(&self) -> Self {
        let d = self.degree();
        let coefficients = self
            .coefficients
            .iter()
            .map(|c| (0..=d).map(|i| if d - i < c.len() { c[d - i] } else { Complex64::new(0.0, 0.0) }).collect())
            .collect();
        Self { coefficients }
    }

    /// `A P` for a constant matrix `A` (rows of coefficients).
    pub fn transformed(&self, a: &[Vec<Complex64>]) -> Self {
        let len = self.degree() + 1;
        let coefficients = a
            .iter()
            .map(|row| {
                (0..len)
                    .map(|i| {
                        row.iter()
                            .zip(&self.coefficients)
                            .map(|(r, c)| r * c.get(i).copied().unwrap_or(Complex64::new(0.0, 0.0)))
                            .sum()
                    })
                    .collect()
            })
            .collect();
        Self { coefficients }
    }

    /// Jets of the first `count` Frenet lifts `Φ₀, …` at `z`, by Gram–Schmidt on
    /// the derivative flag carried out in jet arithmetic.
    pub fn frenet_jets(&self, z: Complex64, count: usize) -> Vec<Vec<Jet>> {
        let mut frames: Vec<Vec<Jet>> = Vec::with_capacity(count);
        for j in 0..count {
            let d0 = self.derivative(z, j);
            let d1 = self.derivative(z, j + 1);
            let mut v: Vec<Jet> = d0.iter().zip(&d1).map(|(f, df)| Jet::holomorphic(*f, *df)).collect();
            for prev in &frames {
                let c = hermitian(&v, prev) / norm_sqr(prev);
                for (x, p) in v.iter_mut().zip(prev) {
                    *x = *x - c * *p;
                }
            }
            frames.push(v);
        }
        frames
    }
}

/// Frenet lift `Φⱼ` of a holomorphic sphere curve, evaluated in both charts.
#[derive(Debug, Clone, PartialEq)]
pub struct FrenetMap {
    pub north: HolomorphicCurve,
    pub south: HolomorphicCurve,
    pub index: usize,
}

impl HomogeneousMap for FrenetMap {
    fn dim(&self) -> usize {
        self.north.dim()
    }

    fn jets(&self, chart: Chart, z: Complex64) -> Vec<Jet> {
        let curve = if chart == Chart::South { &self.south } else { &self.north };
        curve.frenet_jets(z, self.index + 1).pop().expect("index + 1 frames")
    }
}

/// Generic point used to test linear fullness.
const PROBE: Complex64 = Complex64::new(0.371, 0.213);

pub fn frenet_frame(phi: &HolomorphicCurve, j: usize) -> Result<FrenetMap> {
    let n = phi.dim();
    if n < 2 || j >= n {
        return Err(Error::InvalidInput(format!("frame index {j} out of range for CP^{}", n.saturating_sub(1))));
    }
    let frames = phi.frenet_jets(PROBE, n);
    let scale = frames[0].iter().map(|x| x.v.norm_sqr()).sum::<f64>().sqrt();
    for (order, f) in frames.iter().enumerate() {
        let nrm = f.iter().map(|x| x.v.norm_sqr()).sum::<f64>().sqrt();
        if nrm < 1e-10 * scale.max(1.0) {
            return Err(Error::NotLinearlyFull { order });
        }
    }
    Ok(FrenetMap { north: phi.clone(), south: phi.inverted(), index: j })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Rational normal curve `Φ = (√C(2m−1, j) zʲ)ⱼ` in `CP^{2m−1}`.
pub fn rational_normal_curve(m: usize) -> HolomorphicCurve {
    let d = 2 * m - 1;
    let coefficients = (0..=d)
        .map(|j| {
            let mut c = vec![Complex64::new(0.0, 0.0); j + 1];
            c[j] = Complex64::new(binomial(d, j).sqrt(), 0.0);
            c
        })
        .collect();
    HolomorphicCurve::new(coefficients)
}

/// Unitary `A` with `(Az)_{2j} = (−1)ʲ zⱼ`, `(Az)_{2j+1} = z_{2m−1−j}` for `j < m`.
pub fn veronese_isometry(m: usize) -> Vec<Vec<Complex64>> {
    let d = 2 * m;
    let mut a = vec![vec![Complex64::new(0.0, 0.0); d]; d];
    for j in 0..m {
        a[2 * j][j] = Complex64::new(if j % 2 == 0 { 1.0 } else { -1.0 }, 0.0);
        a[2 * j + 1][d - 1 - j] = Complex64::new(1.0, 0.0);
    }
    a
}

/// Veronese data: the holomorphic `AΦ` and its quaternionic middle frame `Ψ = (AΦ)_m`.
pub fn veronese(m: usize) -> Result<(HolomorphicCurve, FrenetMap)> {
    if m == 0 {
        return Err(Error::InvalidInput("veronese needs m ≥ 1".into()));
    }
    let phi = rational_normal_curve(m).transformed(&veronese_isometry(m));
    let psi = frenet_frame(&phi, m)?;
    Ok((phi, psi))
}

/// Lines of `u` and `v` agree: `1 − |⟨u,v⟩|/(|u||v|)`.
pub fn line_defect(u: &[Complex64], v: &[Complex64]) -> f64 {
    let d: Complex64 = u.iter().zip(v).map(|(a, b)| a * b.conj()).sum();
    let nu = u.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    1.0 - d.norm() / (nu * nv)
}

/// `1 − |⟨I(Φⱼ), Φ_{n−j}⟩|/…`: how far a frame pair is from quaternionic duality.
pub fn duality_defect(map: &FrenetMap, z: Complex64) -> f64 {
    let n = map.dim();
    let frames = map.north.frenet_jets(z, n);
    let a: Vec<Complex64> = frames[map.index].iter().map(|x| x.v).collect();
    let b: Vec<Complex64> = frames[n - 1 - map.index].iter().map(|x| x.v).collect();
    line_defect(&quaternionic_structure(&a), &b)
}
