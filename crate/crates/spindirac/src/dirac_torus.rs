//! Fourier discretization of the Dirac operator of `e^{2ω} g_{a,b}` on a spin
//! torus as the Hermitian pencil `A φ = λ M φ`.
//!
//! Spinors are trivialized by the section `s₀` with `s₀ ⊗ s₀ = dz`, so a spinor
//! is a pair `(p, q)` of `χ`-quasi-periodic functions. The flat operator is
//! `D₀(p, q) = 2(∂_z q, −∂_{z̄} p)`, and the conformal problem becomes
//! `D₀ φ = λ e^{ω} φ`. Plane waves `e^{2πiξ·x}/√area` form an orthonormal basis,
//! `A` holds the exact symbol blocks and `M` the Fourier coefficients of `e^{ω}`.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exact_spectrum::{group_levels, SpectrumReport};
use crate::fourier::{bin, fft2, grid_size, CoefTable};
use crate::jet::Jet;
use crate::lattice_spin::{enumerate_shifted_dual, DualPoint, DualVector, TorusGeometry};
use crate::linalg::{self, CMat};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Largest transform grid tried before giving up on aliasing control.
pub const MAX_TRANSFORM_GRID: usize = 4096;
/// Relative size of the highest transform frequencies tolerated.
pub const ALIASING_TAIL: f64 = 1e-14;

/// `∂_z e^{2πiξ·x} = π(v + iu) e^{2πiξ·x}`.
pub fn symbol_dz(xi: DualVector) -> Complex64 {
    Complex64::new(PI * xi.v, PI * xi.u)
}

/// `∂_{z̄} e^{2πiξ·x} = π(iu − v) e^{2πiξ·x}`.
pub fn symbol_dzb(xi: DualVector) -> Complex64 {
    Complex64::new(-PI * xi.v, PI * xi.u)
}

/// Real field `ω(s, t) = Σ c_m e^{2πi(m₁s + m₂t)}` in lattice coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierField {
    geometry: TorusGeometry,
    coefficients: BTreeMap<(i64, i64), Complex64>,
    grid: (usize, usize),
}

impl FourierField {
    pub fn zero(geometry: &TorusGeometry) -> Self {
        Self { geometry: *geometry, coefficients: BTreeMap::new(), grid: (16, 16) }
    }

    pub fn constant(geometry: &TorusGeometry, c: f64) -> Self {
        let mut f = Self::zero(geometry);
        f.coefficients.insert((0, 0), Complex64::new(c, 0.0));
        f
    }

    /// Build from coefficients; they must satisfy `c(−m) = conj(c(m))`.
    pub fn from_coefficients(
        geometry: &TorusGeometry,
        coefficients: impl IntoIterator<Item = ((i64, i64), Complex64)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (m, c) in coefficients {
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite coefficient at {m:?}")));
            }
            *map.entry(m).or_insert(ZERO) += c;
        }
        let scale = map.values().map(|c| c.norm()).fold(1.0, f64::max);
        for (&(m1, m2), &c) in &map {
            let partner = map.get(&(-m1, -m2)).copied().unwrap_or(ZERO);
            if (partner - c.conj()).norm() > 1e-12 * scale {
                return Err(Error::InvalidInput(format!(
                    "coefficients are not Hermitian-symmetric at ({m1}, {m2})"
                )));
            }
        }
        let mut f = Self { geometry: *geometry, coefficients: map, grid: (16, 16) };
        f.grid = f.default_grid();
        Ok(f)
    }

    /// `amplitude · cos(2π(m₁s + m₂t))`.
    pub fn cos_mode(geometry: &TorusGeometry, m: (i64, i64), amplitude: f64) -> Self {
        Self::mode(geometry, m, Complex64::new(0.5 * amplitude, 0.0))
    }

    /// `amplitude · sin(2π(m₁s + m₂t))`.
    pub fn sin_mode(geometry: &TorusGeometry, m: (i64, i64), amplitude: f64) -> Self {
        Self::mode(geometry, m, Complex64::new(0.0, -0.5 * amplitude))
    }

    fn mode(geometry: &TorusGeometry, m: (i64, i64), c: Complex64) -> Self {
        let mut f = Self::zero(geometry);
        if m == (0, 0) {
            f.coefficients.insert(m, Complex64::new(2.0 * c.re, 0.0));
        } else {
            f.coefficients.insert(m, c);
            f.coefficients.insert((-m.0, -m.1), c.conj());
        }
        f.grid = f.default_grid();
        f
    }

    fn default_grid(&self) -> (usize, usize) {
        let (b1, b2) = self.band();
        ((4 * b1 as usize + 4).max(16), (4 * b2 as usize + 4).max(16))
    }

    /// Override the sampling grid; it must resolve the band.
    pub fn with_grid(mut self, n1: usize, n2: usize) -> Result<Self> {
        let (b1, b2) = self.band();
        if n1 < 2 * b1 as usize + 1 || n2 < 2 * b2 as usize + 1 {
            return Err(Error::AliasingRisk { grid: n1.min(n2), tail: f64::NAN });
        }
        self.grid = (n1, n2);
        Ok(self)
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    pub fn grid(&self) -> (usize, usize) {
        self.grid
    }

    pub fn coefficients(&self) -> &BTreeMap<(i64, i64), Complex64> {
        &self.coefficients
    }

    pub fn coefficient(&self, m: (i64, i64)) -> Complex64 {
        self.coefficients.get(&m).copied().unwrap_or(ZERO)
    }

    /// Largest `|m₁|`, `|m₂|` among stored coefficients.
    pub fn band(&self) -> (i64, i64) {
        self.coefficients.keys().fold((0, 0), |(a, b), &(m1, m2)| (a.max(m1.abs()), b.max(m2.abs())))
    }

    pub fn mean(&self) -> f64 {
        self.coefficient((0, 0)).re
    }

    /// `∫(ω − mean)² ds dt`.
    pub fn variance(&self) -> f64 {
        self.coefficients.iter().filter(|(m, _)| **m != (0, 0)).map(|(_, c)| c.norm_sqr()).sum()
    }

    /// `∫ ω² ds dt`.
    pub fn norm_sq(&self) -> f64 {
        self.coefficients.values().map(|c| c.norm_sqr()).sum()
    }

    /// `self + alpha · other`.
    pub fn axpy(&self, alpha: f64, other: &FourierField) -> FourierField {
        let mut out = self.clone();
        for (m, c) in &other.coefficients {
            *out.coefficients.entry(*m).or_insert(ZERO) += c * alpha;
        }
        out.grid = out.default_grid();
        out
    }

    pub fn scaled(&self, alpha: f64) -> FourierField {
        FourierField::zero(&self.geometry).axpy(alpha, self)
    }

    pub fn shifted(&self, c: f64) -> FourierField {
        self.axpy(1.0, &FourierField::constant(&self.geometry, c))
    }

    /// Keep only modes with `|m₁|, |m₂| ≤ band`.
    pub fn truncated(&self, band: i64) -> FourierField {
        let mut out = self.clone();
        out.coefficients.retain(|m, _| m.0.abs() <= band && m.1.abs() <= band);
        out.grid = out.default_grid();
        out
    }

    /// Frequency vector of mode `m` as a dual vector.
    pub fn frequency(&self, m: (i64, i64)) -> DualVector {
        self.geometry.dual_vector(2 * m.0, 2 * m.1)
    }

    pub fn eval(&self, s: f64, t: f64) -> f64 {
        self.coefficients
            .iter()
            .map(|(&(m1, m2), c)| (c * Complex64::cis(2.0 * PI * (m1 as f64 * s + m2 as f64 * t))).re)
            .sum()
    }

    /// `ω` as a jet in the physical coordinate `z = x + iy` at lattice point `(s, t)`.
    pub fn jet(&self, s: f64, t: f64) -> Jet {
        let mut j = Jet::zero();
        for (&(m1, m2), c) in &self.coefficients {
            let e = c * Complex64::cis(2.0 * PI * (m1 as f64 * s + m2 as f64 * t));
            let xi = self.frequency((m1, m2));
            let (dz, dzb) = (symbol_dz(xi), symbol_dzb(xi));
            j += Jet::new(e, e * dz, e * dzb, e * dz * dzb);
        }
        // ω is real: drop round-off imaginary parts of the value
        j.v = Complex64::new(j.v.re, 0.0);
        j.zzb = Complex64::new(j.zzb.re, 0.0);
        j
    }

    /// Samples `ω(i/n1, j/n2)`, row-major.
    pub fn sample(&self, n1: usize, n2: usize) -> Vec<f64> {
        let mut data = vec![ZERO; n1 * n2];
        let (b1, b2) = self.band();
        if n1 as i64 > 2 * b1 && n2 as i64 > 2 * b2 {
            for (&(m1, m2), c) in &self.coefficients {
                data[bin(m1, n1) * n2 + bin(m2, n2)] += c;
            }
            fft2(&mut data, n1, n2, true);
            data.iter().map(|c| c.re).collect()
        } else {
            (0..n1 * n2).map(|idx| self.eval((idx / n2) as f64 / n1 as f64, (idx % n2) as f64 / n2 as f64)).collect()
        }
    }

    pub fn sup_norm(&self) -> f64 {
        let (n1, n2) = self.grid;
        self.sample(4 * n1, 4 * n2).into_iter().fold(0.0, |a, x| a.max(x.abs()))
    }
}

/// Coefficients of a pointwise function of real fields, with the transform grid
/// grown until the highest frequencies are negligible.
pub fn pointwise_coefficients(
    fields: &[&FourierField],
    needed: (i64, i64),
    f: impl Fn(&[f64]) -> f64,
) -> Result<CoefTable> {
    let (mut b1, mut b2) = (0i64, 0i64);
    for fld in fields {
        let (x, y) = fld.band();
        b1 = b1.max(x);
        b2 = b2.max(y);
    }
    let mut n1 = grid_size((2 * needed.0 + 8 * b1 + 32) as usize);
    let mut n2 = grid_size((2 * needed.1 + 8 * b2 + 32) as usize);
    loop {
        let samples: Vec<Vec<f64>> = fields.iter().map(|fld| fld.sample(n1, n2)).collect();
        let mut vals = vec![0.0; n1 * n2];
        let mut args = vec![0.0; fields.len()];
        for (idx, v) in vals.iter_mut().enumerate() {
            for (a, s) in args.iter_mut().zip(&samples) {
                *a = s[idx];
            }
            *v = f(&args);
        }
        let table = CoefTable::from_samples(&vals, n1, n2);
        let tail = table.tail();
        if tail <= ALIASING_TAIL {
            return Ok(table);
        }
        if n1.max(n2) >= MAX_TRANSFORM_GRID {
            return Err(Error::AliasingRisk { grid: n1.max(n2), tail });
        }
        n1 *= 2;
        n2 *= 2;
    }
}

/// Plane-wave spinor basis `Γ*_χ ∩ {|ξ| ≤ cutoff}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorBasis {
    geometry: TorusGeometry,
    cutoff: f64,
    points: Vec<DualPoint>,
    index: HashMap<(i64, i64), usize>,
}

impl SpinorBasis {
    pub fn new(geometry: &TorusGeometry, cutoff: f64) -> Result<Arc<Self>> {
        if !(cutoff > 0.0) {
            return Err(Error::InvalidInput(format!("cutoff {cutoff} must be positive")));
        }
        let points = enumerate_shifted_dual(geometry, cutoff)?;
        if points.is_empty() {
            return Err(Error::EmptyBasis { cutoff });
        }
        let index = points.iter().enumerate().map(|(i, p)| ((p.k1, p.k2), i)).collect();
        Ok(Arc::new(Self { geometry: *geometry, cutoff, points, index }))
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn points(&self) -> &[DualPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn position(&self, k1: i64, k2: i64) -> Option<usize> {
        self.index.get(&(k1, k2)).copied()
    }

    /// Largest `|k₁|`, `|k₂|` in the basis.
    pub fn extent(&self) -> (i64, i64) {
        self.points.iter().fold((0, 0), |(a, b), p| (a.max(p.k1.abs()), b.max(p.k2.abs())))
    }
}

/// The pencil `(A, M)`; unknowns ordered as all `p` coefficients, then all `q`.
#[derive(Debug, Clone)]
pub struct DiscreteDirac {
    pub a: CMat,
    pub m: CMat,
    pub basis: Arc<SpinorBasis>,
}

impl DiscreteDirac {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
}

fn flat_stiffness(basis: &SpinorBasis) -> CMat {
    let n = basis.len();
    let mut a = Mat::<Complex64>::zeros(2 * n, 2 * n);
    for (i, p) in basis.points.iter().enumerate() {
        let dz = symbol_dz(p.xi);
        let dzb = symbol_dzb(p.xi);
        a[(i, n + i)] = dz * 2.0;
        a[(n + i, i)] = -dzb * 2.0;
    }
    a
}

pub fn assemble_flat_dirac(geometry: &TorusGeometry, cutoff: f64) -> Result<DiscreteDirac> {
    let basis = SpinorBasis::new(geometry, cutoff)?;
    let a = flat_stiffness(&basis);
    let m = Mat::<Complex64>::identity(2 * basis.len(), 2 * basis.len());
    Ok(DiscreteDirac { a, m, basis })
}

fn block_from_table(basis: &SpinorBasis, table: &CoefTable) -> CMat {
    let pts = &basis.points;
    Mat::from_fn(pts.len(), pts.len(), |i, j| {
        let (m1, m2) = pts[i].difference(&pts[j]);
        table.get(m1, m2)
    })
}

fn check_geometry(omega: &FourierField, basis: &SpinorBasis) -> Result<()> {
    if omega.geometry.lattice() != basis.geometry.lattice() {
        return Err(Error::InvalidInput("conformal factor and basis live on different lattices".into()));
    }
    Ok(())
}

/// Matrix of multiplication by `e^{sω}` on one spinor component:
/// entry `(i, j)` is the coefficient of `e^{sω}` at `ξᵢ − ξⱼ`.
pub fn weight_matrix(omega: &FourierField, basis: &SpinorBasis, exponent: f64) -> Result<CMat> {
    check_geometry(omega, basis)?;
    let (e1, e2) = basis.extent();
    let table = pointwise_coefficients(&[omega], (e1, e2), |w| (exponent * w[0]).exp())?;
    Ok(block_from_table(basis, &table))
}

/// Multiplication by `ω̇ e^{ω}` on one component.
pub fn perturbation_block(omega: &FourierField, direction: &FourierField, basis: &SpinorBasis) -> Result<CMat> {
    check_geometry(omega, basis)?;
    check_geometry(direction, basis)?;
    let (e1, e2) = basis.extent();
    let table = pointwise_coefficients(&[omega, direction], (e1, e2), |w| w[1] * w[0].exp())?;
    Ok(block_from_table(basis, &table))
}

fn block_diag(t: &CMat) -> CMat {
    let n = t.nrows();
    Mat::from_fn(2 * n, 2 * n, |i, j| {
        if i < n && j < n {
            t[(i, j)]
        } else if i >= n && j >= n {
            t[(i - n, j - n)]
        } else {
            ZERO
        }
    })
}

pub fn assemble_conformal(geometry: &TorusGeometry, omega: &FourierField, cutoff: f64) -> Result<DiscreteDirac> {
    let basis = SpinorBasis::new(geometry, cutoff)?;
    let a = flat_stiffness(&basis);
    let t = weight_matrix(omega, &basis, 1.0)?;
    Ok(DiscreteDirac { a, m: block_diag(&t), basis })
}

/// Area `b · ∫∫ e^{2ω} ds dt` of the conformal metric.
pub fn conformal_area(omega: &FourierField) -> Result<f64> {
    let table = pointwise_coefficients(&[omega], (0, 0), |w| (2.0 * w[0]).exp())?;
    Ok(omega.geometry.area() * table.get(0, 0).re)
}

/// Eigenvector of the torus pencil, split into its two components.
#[derive(Debug, Clone)]
pub struct SpinorCoefficients {
    pub basis: Arc<SpinorBasis>,
    pub plus: Vec<Complex64>,
    pub minus: Vec<Complex64>,
    pub eigenvalue: f64,
}

impl SpinorCoefficients {
    pub fn from_vector(basis: Arc<SpinorBasis>, v: &[Complex64], eigenvalue: f64) -> Self {
        let n = basis.len();
        Self { plus: v[..n].to_vec(), minus: v[n..].to_vec(), basis, eigenvalue }
    }

    pub fn vector(&self) -> Vec<Complex64> {
        self.plus.iter().chain(&self.minus).copied().collect()
    }

    /// `(ψ₊, ψ₋) ↦ (conj ψ₋, −conj ψ₊)`, same eigenvalue.
    pub fn quaternionic_partner(&self) -> Self {
        let n = self.basis.len();
        let mut plus = vec![ZERO; n];
        let mut minus = vec![ZERO; n];
        for (i, p) in self.basis.points.iter().enumerate() {
            let j = self.basis.position(-p.k1, -p.k2).expect("basis is symmetric under ξ ↦ −ξ");
            plus[j] = self.minus[i].conj();
            minus[j] = -self.plus[i].conj();
        }
        Self { basis: self.basis.clone(), plus, minus, eigenvalue: self.eigenvalue }
    }

    /// `(ψ₊, ψ₋) ↦ (ψ₊, −ψ₋)`, eigenvalue `−λ`.
    pub fn chirality_partner(&self) -> Self {
        Self {
            basis: self.basis.clone(),
            plus: self.plus.clone(),
            minus: self.minus.iter().map(|c| -c).collect(),
            eigenvalue: -self.eigenvalue,
        }
    }

    fn lattice_coords(&self, x: f64, y: f64) -> (f64, f64) {
        let l = self.basis.geometry.lattice();
        let [g1, g2] = l.generators();
        let t = y / g2[1];
        let s = (x - t * g2[0]) / g1[0];
        (s, t)
    }

    /// Jets of `(p, q)` at the physical point `(x, y)`.
    pub fn jets(&self, x: f64, y: f64) -> (Jet, Jet) {
        let (s, t) = self.lattice_coords(x, y);
        let norm = 1.0 / self.basis.geometry.area().sqrt();
        let mut p = Jet::zero();
        let mut q = Jet::zero();
        for (i, pt) in self.basis.points.iter().enumerate() {
            let e = Complex64::cis(PI * (pt.k1 as f64 * s + pt.k2 as f64 * t)) * norm;
            let (dz, dzb) = (symbol_dz(pt.xi), symbol_dzb(pt.xi));
            let w = Jet::new(e, e * dz, e * dzb, e * dz * dzb);
            p += w * self.plus[i];
            q += w * self.minus[i];
        }
        (p, q)
    }

    /// Samples of `(p, q)` on the lattice grid `(i/n1, j/n2)`.
    pub fn sample(&self, n1: usize, n2: usize) -> (Vec<Complex64>, Vec<Complex64>) {
        (self.synthesize(&self.plus, n1, n2), self.synthesize(&self.minus, n1, n2))
    }

    fn synthesize(&self, coef: &[Complex64], n1: usize, n2: usize) -> Vec<Complex64> {
        let chi = self.basis.geometry.character();
        let (e1, e2) = self.basis.extent();
        assert!(n1 as i64 > e1 + 1 && n2 as i64 > e2 + 1, "grid too small for the spinor basis");
        let mut data = vec![ZERO; n1 * n2];
        for (c, p) in coef.iter().zip(&self.basis.points) {
            let m1 = (p.k1 - chi.chi1() as i64) / 2;
            let m2 = (p.k2 - chi.chi2() as i64) / 2;
            data[bin(m1, n1) * n2 + bin(m2, n2)] += c;
        }
        fft2(&mut data, n1, n2, true);
        let norm = 1.0 / self.basis.geometry.area().sqrt();
        for i in 0..n1 {
            for j in 0..n2 {
                let phase = PI * (chi.chi1() as f64 * i as f64 / n1 as f64 + chi.chi2() as f64 * j as f64 / n2 as f64);
                data[i * n2 + j] *= Complex64::cis(phase) * norm;
            }
        }
        data
    }
}

#[derive(Debug, Clone)]
pub struct ConformalSpectrum {
    pub report: SpectrumReport,
    /// All pencil eigenvalues, ascending.
    pub values: Vec<f64>,
    /// `M`-orthonormal eigenvectors matching `values`.
    pub spinors: Vec<SpinorCoefficients>,
    pub area: f64,
    pub dirac: DiscreteDirac,
    /// Eigenvalues below this magnitude are resolved by the basis.
    pub trusted_below: f64,
}

impl ConformalSpectrum {
    /// Index range of the cluster of eigenvalues within `tol` (relative) of `values[i]`.
    pub fn cluster(&self, i: usize, tol: f64) -> std::ops::Range<usize> {
        cluster_range(&self.values, i, tol)
    }

    /// Range of the first positive eigenvalue cluster.
    pub fn first_positive_cluster(&self) -> Result<std::ops::Range<usize>> {
        let scale = self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let i = self
            .values
            .iter()
            .position(|&v| v > KERNEL_TOLERANCE * scale.max(1.0))
            .ok_or(Error::ZeroEigenvalue)?;
        Ok(self.cluster(i, CLUSTER_TOLERANCE))
    }

    pub fn lambda_bar(&self) -> Result<f64> {
        let r = self.first_positive_cluster()?;
        Ok(self.values[r.start] * self.area.sqrt())
    }
}

/// Relative tolerance for grouping discretized eigenvalues.
pub const CLUSTER_TOLERANCE: f64 = 1e-7;
/// Eigenvalues below this fraction of the spectral radius count as kernel.
pub const KERNEL_TOLERANCE: f64 = 1e-9;

pub fn cluster_range(values: &[f64], i: usize, tol: f64) -> std::ops::Range<usize> {
    let v = values[i];
    let close = |w: f64| (w - v).abs() <= tol * v.abs().max(1e-300);
    let mut lo = i;
    while lo > 0 && close(values[lo - 1]) {
        lo -= 1;
    }
    let mut hi = i + 1;
    while hi < values.len() && close(values[hi]) {
        hi += 1;
    }
    lo..hi
}

/// Build a symmetric report from discretized eigenvalues.
pub fn report_from_values(values: &[f64], area: f64) -> SpectrumReport {
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let kernel = values.iter().filter(|v| v.abs() <= KERNEL_TOLERANCE * scale).count();
    let mut pos: Vec<f64> = values.iter().copied().filter(|&v| v > KERNEL_TOLERANCE * scale).collect();
    pos.sort_by(f64::total_cmp);
    let levels: Vec<(f64, usize)> =
        group_levels(&pos, CLUSTER_TOLERANCE).into_iter().map(|(v, n)| (v, n.div_ceil(2))).collect();
    SpectrumReport::from_positive_levels(&levels, kernel.div_ceil(2), area)
}

pub fn solve_conformal(geometry: &TorusGeometry, omega: &FourierField, cutoff: f64) -> Result<ConformalSpectrum> {
    let dirac = assemble_conformal(geometry, omega, cutoff)?;
    let eig = linalg::solve_generalized(dirac.a.as_ref(), dirac.m.as_ref())?;
    let area = conformal_area(omega)?;
    let spinors = (0..eig.values.len())
        .map(|k| SpinorCoefficients::from_vector(dirac.basis.clone(), &linalg::column(&eig.vectors, k), eig.values[k]))
        .collect();
    let sup = omega.sup_norm();
    let report = report_from_values(&eig.values, area);
    Ok(ConformalSpectrum {
        report,
        values: eig.values,
        spinors,
        area,
        dirac,
        trusted_below: PI * cutoff * (-sup).exp(),
    })
}

/// `M`-norm `∫ |ψ|²_g dv_g` of a spinor.
pub fn spinor_norm(omega: &FourierField, psi: &SpinorCoefficients) -> Result<f64> {
    let t = weight_matrix(omega, &psi.basis, 1.0)?;
    let m = block_diag(&t);
    Ok(linalg::m_inner(m.as_ref(), &psi.vector(), &psi.vector()).re)
}

/// `−λ ∫ ω̇ |ψ|²_g dv_g` by grid quadrature of `ω̇ e^{ω}(|p|² + |q|²)`.
pub fn eigenvalue_derivative(
    geometry: &TorusGeometry,
    omega: &FourierField,
    direction: &FourierField,
    eigenpair: &SpinorCoefficients,
) -> Result<f64> {
    if geometry.lattice() != eigenpair.basis.geometry.lattice() {
        return Err(Error::InvalidInput("eigenpair belongs to another geometry".into()));
    }
    let norm = spinor_norm(omega, eigenpair)?;
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized { norm });
    }
    let (e1, e2) = eigenpair.basis.extent();
    let (b1, b2) = omega.band();
    let (d1, d2) = direction.band();
    let n1 = grid_size((2 * e1 + 8 * b1 + 2 * d1 + 64) as usize);
    let n2 = grid_size((2 * e2 + 8 * b2 + 2 * d2 + 64) as usize);
    let (p, q) = eigenpair.sample(n1, n2);
    let w = omega.sample(n1, n2);
    let dw = direction.sample(n1, n2);
    let mut acc = 0.0;
    for idx in 0..n1 * n2 {
        acc += dw[idx] * w[idx].exp() * (p[idx].norm_sqr() + q[idx].norm_sqr());
    }
    let integral = acc * geometry.area() / (n1 * n2) as f64;
    Ok(-eigenpair.eigenvalue * integral)
}

/// `Pᵢⱼ = −λ ⟨ω̇ e^{ω} ψᵢ, ψⱼ⟩` on an eigenspace.
pub fn perturbation_matrix(
    omega: &FourierField,
    direction: &FourierField,
    eigenspace: &[SpinorCoefficients],
) -> Result<CMat> {
    let first = eigenspace.first().ok_or_else(|| Error::InvalidInput("empty eigenspace".into()))?;
    let t = perturbation_block(omega, direction, &first.basis)?;
    let m = block_diag(&t);
    let vecs: Vec<Vec<Complex64>> = eigenspace.iter().map(|s| s.vector()).collect();
    let k = vecs.len();
    Ok(Mat::from_fn(k, k, |i, j| linalg::m_inner(m.as_ref(), &vecs[i], &vecs[j]) * (-eigenspace[i].eigenvalue)))
}

/// One-sided derivatives of a degenerate eigenvalue: the ascending spectrum of
/// the perturbation matrix.
pub fn eigenspace_derivatives(
    omega: &FourierField,
    direction: &FourierField,
    eigenspace: &[SpinorCoefficients],
) -> Result<Vec<f64>> {
    let p = perturbation_matrix(omega, direction, eigenspace)?;
    Ok(linalg::solve_hermitian(p.as_ref())?.values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(chi2: u8) -> TorusGeometry {
        TorusGeometry::from_parts(0.0, 1.0, 0, chi2).unwrap()
    }

    #[test]
    fn flat_blocks_have_symbol_eigenvalues() {
        let d = assemble_flat_dirac(&square(0), 1.5).unwrap();
        assert_eq!(d.basis.len(), 9);
        let e = linalg::solve_hermitian(d.a.as_ref()).unwrap();
        let near = |x: f64| e.values.iter().filter(|v| (**v - x).abs() < 1e-12).count();
        assert_eq!(near(0.0), 2);
        assert_eq!(near(2.0 * PI), 4);
        assert_eq!(near(-2.0 * PI), 4);
        assert_eq!(near(2.0 * PI * 2f64.sqrt()), 4);
    }

    #[test]
    fn symbol_entries() {
        let xi = DualVector::new(0.3, -0.8);
        // 2πi ξ(1, ∓i) up to the sign convention of the lower entry
        let upper = Complex64::new(0.0, 2.0 * PI) * Complex64::new(xi.u, -xi.v);
        assert!((symbol_dz(xi) * 2.0 - upper).norm() < 1e-14);
        assert!((symbol_dz(xi).norm() - PI * xi.norm()).abs() < 1e-14);
    }

    #[test]
    fn empty_basis() {
        assert!(matches!(assemble_flat_dirac(&square(1), 0.4), Err(Error::EmptyBasis { .. })));
    }

    #[test]
    fn weight_matrix_trivial_cases() {
        let g = square(0);
        let basis = SpinorBasis::new(&g, 2.0).unwrap();
        let w = weight_matrix(&FourierField::zero(&g), &basis, 1.0).unwrap();
        let c = weight_matrix(&FourierField::constant(&g, 0.3), &basis, 2.0).unwrap();
        for i in 0..basis.len() {
            for j in 0..basis.len() {
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((w[(i, j)] - Complex64::new(id, 0.0)).norm() < 1e-14);
                assert!((c[(i, j)] - Complex64::new(id * 0.6f64.exp(), 0.0)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn field_modes_and_jets() {
        let g = TorusGeometry::from_parts(0.2, 1.3, 0, 0).unwrap();
        let f = FourierField::cos_mode(&g, (1, 2), 0.4).axpy(1.0, &FourierField::sin_mode(&g, (0, 1), 0.1));
        let (s, t) = (0.31, 0.77);
        let expect = 0.4 * (2.0 * PI * (s + 2.0 * t)).cos() + 0.1 * (2.0 * PI * t).sin();
        assert!((f.eval(s, t) - expect).abs() < 1e-14);
        assert!((f.variance() - (0.08 + 0.005)).abs() < 1e-14);
        // ∂_x ω by central difference against 2 Re ∂_z ω
        let h = 1e-6;
        let l = g.lattice();
        let (x, y) = l.to_plane(s, t);
        let to_st = |x: f64, y: f64| {
            let tt = y / l.b();
            (x - tt * l.a(), tt)
        };
        let (sp, tp) = to_st(x + h, y);
        let (sm, tm) = to_st(x - h, y);
        let fd = (f.eval(sp, tp) - f.eval(sm, tm)) / (2.0 * h);
        let j = f.jet(s, t);
        assert!((fd - (j.z + j.zb).re).abs() < 1e-7);
    }

    #[test]
    fn partner_and_chirality_are_eigenvectors() {
        let g = TorusGeometry::from_parts(0.1, 1.2, 0, 1).unwrap();
        let omega = FourierField::cos_mode(&g, (1, 0), 0.2).axpy(1.0, &FourierField::sin_mode(&g, (1, 1), 0.1));
        let sol = solve_conformal(&g, &omega, 2.5).unwrap();
        let k = sol.first_positive_cluster().unwrap().start;
        let psi = &sol.spinors[k];
        for other in [psi.quaternionic_partner(), psi.chirality_partner()] {
            let r = linalg::pencil_residual(sol.dirac.a.as_ref(), sol.dirac.m.as_ref(), &other.vector(), other.eigenvalue);
            assert!(r < 1e-10, "residual {r}");
        }
    }

    #[test]
    fn sampling_matches_jets() {
        let g = TorusGeometry::from_parts(0.3, 1.1, 1, 1).unwrap();
        let sol = solve_conformal(&g, &FourierField::cos_mode(&g, (0, 1), 0.3), 2.0).unwrap();
        let psi = &sol.spinors[sol.values.len() / 2 + 3];
        let (p, q) = psi.sample(16, 16);
        let (s, t) = (5.0 / 16.0, 11.0 / 16.0);
        let (x, y) = g.lattice().to_plane(s, t);
        let (pj, qj) = psi.jets(x, y);
        assert!((p[5 * 16 + 11] - pj.v).norm() < 1e-12);
        assert!((q[5 * 16 + 11] - qj.v).norm() < 1e-12);
    }

    #[test]
    fn derivative_of_constant_direction() {
        let g = square(0);
        let omega = FourierField::cos_mode(&g, (1, 0), 0.1);
        let sol = solve_conformal(&g, &omega, 2.0).unwrap();
        let k = sol.first_positive_cluster().unwrap().start;
        let psi = &sol.spinors[k];
        let d = eigenvalue_derivative(&g, &omega, &FourierField::constant(&g, 0.7), psi).unwrap();
        assert!((d + 0.7 * psi.eigenvalue).abs() < 1e-10);
        let mut bad = psi.clone();
        bad.plus.iter_mut().for_each(|c| *c *= 2.0);
        assert!(matches!(
            eigenvalue_derivative(&g, &omega, &FourierField::constant(&g, 0.7), &bad),
            Err(Error::NotNormalized { .. })
        ));
    }
}
