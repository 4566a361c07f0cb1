//! Dense Hermitian pencils `A x = λ M x` solved by Cholesky whitening.

use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{Mat, MatRef, Par, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = Mat<Complex64>;

#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// `M`-orthonormal eigenvectors, one per column.
    pub vectors: CMat,
}

/// Largest `|aᵢⱼ − conj(aⱼᵢ)|`, relative to the largest entry.
pub fn hermitian_defect(a: MatRef<'_, Complex64>) -> f64 {
    let n = a.nrows();
    let mut scale = 0.0f64;
    let mut defect = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            scale = scale.max(a[(i, j)].norm());
            defect = defect.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    defect / scale.max(1e-300)
}

fn symmetrize(c: &mut CMat) {
    let n = c.nrows();
    for i in 0..n {
        c[(i, i)] = Complex64::new(c[(i, i)].re, 0.0);
        for j in 0..i {
            let avg = 0.5 * (c[(i, j)] + c[(j, i)].conj());
            c[(i, j)] = avg;
            c[(j, i)] = avg.conj();
        }
    }
}

pub fn solve_hermitian(a: MatRef<'_, Complex64>) -> Result<GeneralizedEigen> {
    let mut c = a.to_owned();
    symmetrize(&mut c);
    let evd = c
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::SolverFailure(format!("Hermitian eigensolver did not converge: {e:?}")))?;
    let values = (0..c.nrows()).map(|i| evd.S()[i].re).collect();
    Ok(GeneralizedEigen { values, vectors: evd.U().to_owned() })
}

/// Solve the pencil with `M = L L*`: diagonalize `L⁻¹ A L⁻*`, map back by `L⁻*`.
pub fn solve_generalized(a: MatRef<'_, Complex64>, m: MatRef<'_, Complex64>) -> Result<GeneralizedEigen> {
    let n = a.nrows();
    if a.ncols() != n || m.nrows() != n || m.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "pencil shapes {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            m.nrows(),
            m.ncols()
        )));
    }
    let mut mm = m.to_owned();
    symmetrize(&mut mm);
    let llt = mm.llt(Side::Lower).map_err(|e| {
        let dmin = (0..n).map(|i| mm[(i, i)].re).fold(f64::INFINITY, f64::min);
        Error::SolverFailure(format!("weight matrix is not positive definite ({e:?}); smallest diagonal {dmin:e}"))
    })?;
    let l = llt.L();
    let (mut lmin, mut lmax) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        let d = l[(i, i)].norm();
        lmin = lmin.min(d);
        lmax = lmax.max(d);
    }
    let cond_estimate = (lmax / lmin).powi(2);
    if !cond_estimate.is_finite() || cond_estimate > 1e13 {
        return Err(Error::SolverFailure(format!("weight matrix condition estimate {cond_estimate:e}")));
    }
    let mut c = a.to_owned();
    solve_lower_triangular_in_place(l, c.as_mut(), Par::Seq);
    let mut c2 = c.adjoint().to_owned();
    solve_lower_triangular_in_place(l, c2.as_mut(), Par::Seq);
    let GeneralizedEigen { values, mut vectors } = solve_hermitian(c2.as_ref())?;
    solve_upper_triangular_in_place(l.adjoint(), vectors.as_mut(), Par::Seq);
    Ok(GeneralizedEigen { values, vectors })
}

/// `‖A x − λ M x‖ / (|λ| ‖M x‖ + ‖A x‖)`-style residual of one eigenpair.
pub fn pencil_residual(a: MatRef<'_, Complex64>, m: MatRef<'_, Complex64>, x: &[Complex64], lambda: f64) -> f64 {
    let n = x.len();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let mut ax = Complex64::new(0.0, 0.0);
        let mut mx = Complex64::new(0.0, 0.0);
        for j in 0..n {
            ax += a[(i, j)] * x[j];
            mx += m[(i, j)] * x[j];
        }
        num += (ax - mx * lambda).norm_sqr();
        den += ax.norm_sqr() + (mx * lambda).norm_sqr();
    }
    (num / den.max(1e-300)).sqrt()
}

/// `xᴴ M y`.
pub fn m_inner(m: MatRef<'_, Complex64>, x: &[Complex64], y: &[Complex64]) -> Complex64 {
    let n = x.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let mut row = Complex64::new(0.0, 0.0);
        for j in 0..n {
            row += m[(i, j)] * y[j];
        }
        acc += x[i].conj() * row;
    }
    acc
}

pub fn column(m: &CMat, j: usize) -> Vec<Complex64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}
