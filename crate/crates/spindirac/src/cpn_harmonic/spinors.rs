use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::frenet::FrenetMap;
use super::maps::{quaternionic_structure, Chart, HomogeneousMap, Surface};
use crate::dirac_torus::{FourierField, SpinorCoefficients};
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::lattice_spin::TorusGeometry;

/// Family of spinors `ψⱼ = (pⱼ, qⱼ)` in the `dz`-trivialization, together with
/// `u = |s₀|² = e^{−ω}` of the metric `e^{2ω}|dz|²`.
pub trait SpinorFamily: Sync {
    fn spinor_jets(&self, chart: Chart, z: Complex64) -> Vec<(Jet, Jet)>;
    fn u(&self, chart: Chart, z: Complex64) -> Jet;
}

/// Map `[ψ_{1+} : ψ̄_{1−} : … ]` built from torus eigenspinors of one eigenvalue.
pub struct EigenspinorMap {
    pub spinors: Vec<SpinorCoefficients>,
    pub omega: FourierField,
    pub eigenvalue: f64,
}

fn plane_to_lattice_grid(geometry: &TorusGeometry, n: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (x, y) = geometry.lattice().to_plane(i as f64 / n as f64, j as f64 / n as f64);
            out.push(Complex64::new(x, y));
        }
    }
    out
}

impl EigenspinorMap {
    pub fn from_eigenspinors(spinors: Vec<SpinorCoefficients>, geometry: &TorusGeometry, omega: &FourierField) -> Result<Self> {
        let first = spinors.first().ok_or_else(|| Error::InvalidInput("no spinors".into()))?;
        let lambda = first.eigenvalue;
        if lambda == 0.0 {
            return Err(Error::ZeroEigenvalue);
        }
        let spread = spinors.iter().map(|s| (s.eigenvalue - lambda).abs()).fold(0.0, f64::max);
        if spread > 1e-8 * lambda.abs() {
            return Err(Error::MixedEigenvalues { spread });
        }
        let map = Self { spinors, omega: omega.clone(), eigenvalue: lambda };
        let min_norm = plane_to_lattice_grid(geometry, 32)
            .par_iter()
            .map(|z| map.jets(Chart::Plane, *z).iter().map(|j| j.v.norm_sqr()).sum::<f64>().sqrt())
            .reduce(|| f64::INFINITY, f64::min);
        if min_norm < 1e-8 {
            return Err(Error::CommonZeroOnGrid { min_norm });
        }
        Ok(map)
    }

    /// Sup over a grid of `|∂_z̄F − (λ/2u) I(F)|`, relative to `sup |F|·λ/2u`.
    pub fn first_order_residual(&self, geometry: &TorusGeometry, n: usize) -> f64 {
        let pts = plane_to_lattice_grid(geometry, n);
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for z in pts {
            let f = self.jets(Chart::Plane, z);
            let u = self.u(Chart::Plane, z).v.re;
            let v: Vec<Complex64> = f.iter().map(|j| j.v).collect();
            let i = quaternionic_structure(&v);
            let c = self.eigenvalue / (2.0 * u);
            for (j, iv) in f.iter().zip(&i) {
                num = num.max((j.zb - c * iv).norm());
            }
            den = den.max(c * v.iter().map(|x| x.norm()).fold(0.0, f64::max));
        }
        num / den
    }
}

impl HomogeneousMap for EigenspinorMap {
    fn dim(&self) -> usize {
        2 * self.spinors.len()
    }

    fn jets(&self, _chart: Chart, z: Complex64) -> Vec<Jet> {
        self.spinors
            .iter()
            .flat_map(|s| {
                let (p, q) = s.jets(z.re, z.im);
                [p, q.conj()]
            })
            .collect()
    }
}

impl SpinorFamily for EigenspinorMap {
    fn spinor_jets(&self, _chart: Chart, z: Complex64) -> Vec<(Jet, Jet)> {
        self.spinors.iter().map(|s| s.jets(z.re, z.im)).collect()
    }

    fn u(&self, _chart: Chart, z: Complex64) -> Jet {
        let (s, t) = lattice_coords(self.omega.geometry(), z);
        (self.omega.jet(s, t) * -1.0).exp()
    }
}

fn lattice_coords(geometry: &TorusGeometry, z: Complex64) -> (f64, f64) {
    let [g1, g2] = geometry.lattice().generators();
    let t = z.im / g2[1];
    ((z.re - t * g2[0]) / g1[0], t)
}

/// Round-sphere eigenspinors read off a quaternionic Frenet map: the lift is
/// rescaled per chart so that `∂_z̄F = (λ/2u) I(F)` and `u|F|² = 1` at the chart origin.
pub struct SphereEigenLift {
    pub map: FrenetMap,
    /// `(scale, phase)` per chart.
    north: Complex64,
    south: Complex64,
    pub eigenvalue: f64,
}

impl SphereEigenLift {
    pub fn new(map: FrenetMap) -> Result<Self> {
        let gauge = |chart| -> Result<(Complex64, f64)> {
            let f = map.jets(chart, Complex64::new(0.0, 0.0));
            let v: Vec<Complex64> = f.iter().map(|j| j.v).collect();
            let i = quaternionic_structure(&v);
            let n: f64 = v.iter().map(|x| x.norm_sqr()).sum();
            let mu: Complex64 = f.iter().zip(&i).map(|(j, iv)| j.zb * iv.conj()).sum::<Complex64>() / n;
            if mu.norm() < 1e-12 {
                return Err(Error::HolomorphicMap);
            }
            let u = 0.5;
            let scale = 1.0 / (u * n).sqrt();
            Ok((Complex64::from_polar(scale, -0.5 * mu.arg()), 2.0 * u * mu.norm()))
        };
        let (north, lam_n) = gauge(Chart::North)?;
        let (south, lam_s) = gauge(Chart::South)?;
        if (lam_n - lam_s).abs() > 1e-9 * lam_n {
            return Err(Error::NotAnEigenspinor { residual: (lam_n - lam_s).abs() });
        }
        Ok(Self { map, north, south, eigenvalue: lam_n })
    }

    fn lift(&self, chart: Chart, z: Complex64) -> Vec<Jet> {
        let c = if chart == Chart::South { self.south } else { self.north };
        self.map.jets(chart, z).into_iter().map(|j| j * c).collect()
    }

    /// Sup over `surface` of `|Σ|ψⱼ|² − 1|`.
    pub fn density_defect(&self, surface: &Surface) -> f64 {
        surface
            .points
            .par_iter()
            .map(|p| {
                let f = self.lift(p.chart, p.z);
                let u = self.u(p.chart, p.z).v.re;
                (u * f.iter().map(|j| j.v.norm_sqr()).sum::<f64>() - 1.0).abs()
            })
            .reduce(|| 0.0, f64::max)
    }
}

impl HomogeneousMap for SphereEigenLift {
    fn dim(&self) -> usize {
        self.map.dim()
    }

    fn jets(&self, chart: Chart, z: Complex64) -> Vec<Jet> {
        self.lift(chart, z)
    }
}

impl SpinorFamily for SphereEigenLift {
    fn spinor_jets(&self, chart: Chart, z: Complex64) -> Vec<(Jet, Jet)> {
        self.lift(chart, z).chunks_exact(2).map(|c| (c[0], c[1].conj())).collect()
    }

    fn u(&self, _chart: Chart, z: Complex64) -> Jet {
        // u = (1 + |z|²)/2 in either chart
        (Jet::one() + Jet::var(z) * Jet::var_conj(z)) * 0.5
    }
}

/// Energy-momentum tensor `Σⱼ Q_{ψⱼ}` on the samples of a surface, in chart
/// coordinates `(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTensorField {
    /// `(Q_xx, Q_xy, Q_yy)` per sample.
    pub values: Vec<[f64; 3]>,
    /// `Σ|ψⱼ|²` per sample.
    pub density: Vec<f64>,
    /// Sup of `|tr_g Q − λ Σ|ψⱼ|²|`.
    pub trace_residual: f64,
    /// Sup of `|Q − (λ/2)g|_g`, meaningful when `Σ|ψⱼ|² ≡ 1`.
    pub criticality_residual: f64,
    /// Sup of the eigen-equation residual, relative.
    pub eigen_residual: f64,
}

type Spinor = [Complex64; 2];

fn add(a: Spinor, b: Spinor) -> Spinor {
    [a[0] + b[0], a[1] + b[1]]
}

fn smul(c: Complex64, a: Spinor) -> Spinor {
    [c * a[0], c * a[1]]
}

/// `Q(X,Y)` for `X = α∂_z + β∂_z̄` style combinations, evaluated from jets.
fn q_point(p: Jet, q: Jet, u: Jet) -> ([f64; 3], f64, f64) {
    let uv = u.v.re;
    let lz = u.z / u.v;
    let lzb = u.zb / u.v;
    let psi = [p.v, q.v];
    // ∇_z, ∇_z̄ and Clifford multiplication by ∂_z, ∂_z̄
    let nz: Spinor = [p.z + p.v * lz, q.z];
    let nzb: Spinor = [p.zb, q.zb + q.v * lzb];
    let cz = |s: Spinor| -> Spinor { [Complex64::new(0.0, 0.0), -s[0] / uv] };
    let czb = |s: Spinor| -> Spinor { [s[1] / uv, Complex64::new(0.0, 0.0)] };
    let i = Complex64::i();
    let one = Complex64::new(1.0, 0.0);
    // ∂_x = ∂_z + ∂_z̄, ∂_y = i(∂_z − ∂_z̄)
    let dirs = [(one, one), (i, -i)];
    let cliff = |d: (Complex64, Complex64), s: Spinor| add(smul(d.0, cz(s)), smul(d.1, czb(s)));
    let nabla = |d: (Complex64, Complex64)| add(smul(d.0, nz), smul(d.1, nzb));
    let inner = |a: Spinor, b: Spinor| uv * (a[0] * b[0].conj() + a[1] * b[1].conj());
    let h = |x: usize, y: usize| {
        0.5 * (inner(cliff(dirs[x], nabla(dirs[y])), psi).re + inner(cliff(dirs[y], nabla(dirs[x])), psi).re)
    };
    let density = uv * (p.v.norm_sqr() + q.v.norm_sqr());
    // eigen-equation ∂_z̄p = −(λ/2u)q, ∂_z q = (λ/2u)p is checked by the caller
    ([h(0, 0), h(0, 1), h(1, 1)], density, uv)
}

pub fn energy_momentum(family: &dyn SpinorFamily, surface: &Surface, lambda: f64) -> Result<QTensorField> {
    let per_point: Vec<([f64; 3], f64, f64, f64)> = surface
        .points
        .par_iter()
        .map(|pt| {
            let u = family.u(pt.chart, pt.z);
            let c = lambda / (2.0 * u.v.re);
            let mut qsum = [0.0; 3];
            let mut dens = 0.0;
            let (mut res, mut scale) = (0.0f64, 0.0f64);
            for (p, q) in family.spinor_jets(pt.chart, pt.z) {
                let (qv, d, _) = q_point(p, q, u);
                for k in 0..3 {
                    qsum[k] += qv[k];
                }
                dens += d;
                res = res.max((p.zb + c * q.v).norm()).max((q.z - c * p.v).norm());
                scale = scale.max(c * p.v.norm().max(q.v.norm()));
            }
            (qsum, dens, res, scale)
        })
        .collect();
    let scale = per_point.iter().map(|x| x.3).fold(0.0, f64::max).max(1e-300);
    let eigen_residual = per_point.iter().map(|x| x.2).fold(0.0, f64::max) / scale;
    if eigen_residual > 1e-6 {
        return Err(Error::NotAnEigenspinor { residual: eigen_residual });
    }
    let mut trace_residual = 0.0f64;
    let mut criticality_residual = 0.0f64;
    for (pt, (q, d, _, _)) in surface.points.iter().zip(&per_point) {
        let e2 = pt.conformal;
        trace_residual = trace_residual.max(((q[0] + q[2]) / e2 - lambda * d).abs());
        let dev = [(q[0] - 0.5 * lambda * e2) / e2, q[1] / e2, (q[2] - 0.5 * lambda * e2) / e2];
        criticality_residual = criticality_residual.max(dev.iter().fold(0.0f64, |a, x| a.max(x.abs())));
    }
    Ok(QTensorField {
        values: per_point.iter().map(|x| x.0).collect(),
        density: per_point.iter().map(|x| x.1).collect(),
        trace_residual,
        criticality_residual,
        eigen_residual,
    })
}
