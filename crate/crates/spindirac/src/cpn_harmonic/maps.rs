use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dirac_sphere::gauss_legendre;
use crate::dirac_torus::FourierField;
use crate::jet::Jet;
use crate::lattice_spin::TorusGeometry;

/// Local coordinate in which a lift is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Chart {
    /// Physical coordinate `z = x + iy` on a torus.
    Plane,
    /// `z = tan(θ/2) e^{iφ}`, centred at the north pole.
    North,
    /// `w = 1/z`, centred at the south pole.
    South,
}

/// A map into `CPⁿ` given by lifts `F: chart → ℂⁿ⁺¹`.
pub trait HomogeneousMap: Sync {
    /// `n + 1`.
    fn dim(&self) -> usize;
    fn jets(&self, chart: Chart, z: Complex64) -> Vec<Jet>;
}

type LiftFn = dyn Fn(Chart, Complex64) -> Vec<Jet> + Send + Sync;

/// Map given by a closed-form jet expression.
pub struct ClosedFormMap {
    dim: usize,
    lift: Box<LiftFn>,
}

impl ClosedFormMap {
    pub fn new(dim: usize, lift: impl Fn(Chart, Complex64) -> Vec<Jet> + Send + Sync + 'static) -> Self {
        Self { dim, lift: Box::new(lift) }
    }

    /// `[z^k : 1]`, or `[z̄^k : 1]` when `conjugate`.
    pub fn sphere_power(k: u32, conjugate: bool) -> Self {
        Self::new(2, move |chart, z| {
            let v = |z| if conjugate { Jet::var_conj(z) } else { Jet::var(z) };
            match chart {
                Chart::South => vec![Jet::one(), v(z).powi(k)],
                _ => vec![v(z).powi(k), Jet::one()],
            }
        })
    }

    /// `[e^{2πiγ(x,y)} : 1]` for a dual-lattice vector `γ = (γ_u, γ_v)`.
    pub fn circle_map(gamma: (f64, f64)) -> Self {
        let a = Complex64::new(0.0, PI) * Complex64::new(gamma.0, -gamma.1);
        let b = Complex64::new(0.0, PI) * Complex64::new(gamma.0, gamma.1);
        Self::new(2, move |_, z| vec![(Jet::var(z) * a + Jet::var_conj(z) * b).exp(), Jet::one()])
    }

    /// `[θ_k(s, t) : e^{iπt} θ_k(s + 1/2k, t)]` with the Gaussian series
    /// `θ_k = Σₙ e^{−πk(t + n/k)²} e^{2πins}`, a lift with multiplier `e^{−2πiks}`
    /// under `t ↦ t + 1`. The degree is `±k`; `conjugate` flips its sign.
    pub fn torus_theta(geometry: &TorusGeometry, k: u32, conjugate: bool) -> Self {
        assert!(k > 0);
        let l = *geometry.lattice();
        let [g1, g2] = l.generators();
        let kf = k as f64;
        Self::new(2, move |_, z| {
            let i = Complex64::i();
            let y = (Jet::var(z) - Jet::var_conj(z)) * Complex64::new(0.0, -0.5);
            let x = (Jet::var(z) + Jet::var_conj(z)) * 0.5;
            let t = y * (1.0 / g2[1]);
            let s = (x - t * g2[0]) * (1.0 / g1[0]);
            let t0 = t.v.re.floor();
            let theta = |shift: f64| {
                let mut acc = Jet::zero();
                let centre = (-t0 * kf) as i64;
                for n in centre - 12 * k as i64..=centre + 12 * k as i64 {
                    let d = t + Jet::constant(Complex64::new(n as f64 / kf, 0.0));
                    let arg = d * d * (-PI * kf) + (s + Jet::constant(Complex64::new(shift, 0.0))) * (2.0 * PI * n as f64 * i);
                    acc += arg.exp();
                }
                acc
            };
            let a = theta(0.0);
            let b = (t * (PI * i)).exp() * theta(0.5 / kf);
            if conjugate {
                vec![a.conj(), b.conj()]
            } else {
                vec![a, b]
            }
        })
    }
}

impl HomogeneousMap for ClosedFormMap {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jets(&self, chart: Chart, z: Complex64) -> Vec<Jet> {
        (self.lift)(chart, z)
    }
}

/// `F ↦ hF` for a nonvanishing scalar jet `h`.
pub struct Gauged<'a, M: HomogeneousMap + ?Sized> {
    pub inner: &'a M,
    pub gauge: Box<dyn Fn(Chart, Complex64) -> Jet + Send + Sync>,
}

impl<M: HomogeneousMap + ?Sized> HomogeneousMap for Gauged<'_, M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn jets(&self, chart: Chart, z: Complex64) -> Vec<Jet> {
        let h = (self.gauge)(chart, z);
        self.inner.jets(chart, z).into_iter().map(|f| f * h).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePoint {
    pub chart: Chart,
    pub z: Complex64,
    /// Riemannian area weight `dv_g`.
    pub weight: f64,
    /// `e^{2σ}` with `g = e^{2σ}|dz|²` in the chart.
    pub conformal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceKind {
    Sphere,
    Torus,
}

/// Quadrature nodes covering a closed surface.
#[derive(Debug, Clone)]
pub struct Surface {
    pub kind: SurfaceKind,
    pub points: Vec<SamplePoint>,
}

impl Surface {
    /// Round unit sphere: Gauss–Legendre in `cos θ` times a uniform `φ` grid.
    /// Each node is evaluated in the chart centred on its hemisphere.
    pub fn sphere(n_theta: usize, n_phi: usize) -> Self {
        let (x, w) = gauss_legendre(n_theta);
        let mut points = Vec::with_capacity(n_theta * n_phi);
        for (c, wt) in x.iter().zip(&w) {
            let theta = c.acos();
            for l in 0..n_phi {
                let phi = 2.0 * PI * (l as f64 + 0.5) / n_phi as f64;
                let weight = wt * 2.0 * PI / n_phi as f64;
                let (chart, z) = if theta <= 0.5 * PI {
                    (Chart::North, Complex64::from_polar((0.5 * theta).tan(), phi))
                } else {
                    (Chart::South, Complex64::from_polar(1.0 / (0.5 * theta).tan(), -phi))
                };
                points.push(SamplePoint { chart, z, weight, conformal: round_factor(z) });
            }
        }
        Self { kind: SurfaceKind::Sphere, points }
    }

    /// Uniform lattice grid on a torus with metric `e^{2ω}|dz|²`.
    pub fn torus(geometry: &TorusGeometry, omega: Option<&FourierField>, n1: usize, n2: usize) -> Self {
        let w = omega.map(|w| w.sample(n1, n2));
        let cell = geometry.area() / (n1 * n2) as f64;
        let mut points = Vec::with_capacity(n1 * n2);
        for i in 0..n1 {
            for j in 0..n2 {
                let (x, y) = geometry.lattice().to_plane(i as f64 / n1 as f64, j as f64 / n2 as f64);
                let e2 = w.as_ref().map_or(1.0, |w| (2.0 * w[i * n2 + j]).exp());
                points.push(SamplePoint { chart: Chart::Plane, z: Complex64::new(x, y), weight: cell * e2, conformal: e2 });
            }
        }
        Self { kind: SurfaceKind::Torus, points }
    }

    pub fn area(&self) -> f64 {
        self.points.iter().map(|p| p.weight).sum()
    }
}

/// `4/(1 + |z|²)²`, the round metric in either stereographic chart.
pub fn round_factor(z: Complex64) -> f64 {
    4.0 / (1.0 + z.norm_sqr()).powi(2)
}

/// `I(z₁, z₂, …) = (−z̄₂, z̄₁, …)`.
pub fn quaternionic_structure(v: &[Complex64]) -> Vec<Complex64> {
    v.chunks_exact(2).flat_map(|p| [-p[1].conj(), p[0].conj()]).collect()
}

/// `[F] ∈ CP¹` as a point of the unit sphere.
pub fn to_sphere(f: &[Complex64]) -> [f64; 3] {
    let n = f[0].norm_sqr() + f[1].norm_sqr();
    let c = f[0] * f[1].conj();
    [2.0 * c.re / n, 2.0 * c.im / n, (f[0].norm_sqr() - f[1].norm_sqr()) / n]
}
