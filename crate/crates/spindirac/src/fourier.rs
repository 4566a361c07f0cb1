//! Two-dimensional transforms over lattice coordinates `(s, t) ∈ [0,1)²`.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// In-place 2D DFT of a row-major `n1 × n2` array. Unnormalized in both
/// directions; `inverse` selects the `e^{+2πi…}` sign.
pub fn fft2(data: &mut [Complex64], n1: usize, n2: usize, inverse: bool) {
    assert_eq!(data.len(), n1 * n2);
    let mut planner = FftPlanner::<f64>::new();
    let (row, col) = if inverse {
        (planner.plan_fft_inverse(n2), planner.plan_fft_inverse(n1))
    } else {
        (planner.plan_fft_forward(n2), planner.plan_fft_forward(n1))
    };
    for r in data.chunks_exact_mut(n2) {
        row.process(r);
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n1];
    for j in 0..n2 {
        for i in 0..n1 {
            buf[i] = data[i * n2 + j];
        }
        col.process(&mut buf);
        for i in 0..n1 {
            data[i * n2 + j] = buf[i];
        }
    }
}

/// Position of the signed frequency `m` in a length-`n` transform.
pub fn bin(m: i64, n: usize) -> usize {
    m.rem_euclid(n as i64) as usize
}

/// Smallest power of two ≥ `n` (and ≥ 8).
pub fn grid_size(n: usize) -> usize {
    n.max(8).next_power_of_two()
}

/// Fourier coefficients `ĥ(m) = ∫∫ h e^{−2πi(m₁s + m₂t)} ds dt` on a grid.
#[derive(Debug, Clone)]
pub struct CoefTable {
    pub n1: usize,
    pub n2: usize,
    pub data: Vec<Complex64>,
}

impl CoefTable {
    /// Transform real samples `h(i/n1, j/n2)`.
    pub fn from_samples(samples: &[f64], n1: usize, n2: usize) -> Self {
        let mut data: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        fft2(&mut data, n1, n2, false);
        let norm = 1.0 / (n1 * n2) as f64;
        data.iter_mut().for_each(|c| *c *= norm);
        Self { n1, n2, data }
    }

    pub fn get(&self, m1: i64, m2: i64) -> Complex64 {
        self.data[bin(m1, self.n1) * self.n2 + bin(m2, self.n2)]
    }

    /// Largest coefficient among the top eighth of frequencies in either
    /// direction, relative to the largest coefficient overall.
    pub fn tail(&self) -> f64 {
        let (h1, h2) = (self.n1 as i64 / 2, self.n2 as i64 / 2);
        let (e1, e2) = (h1 - (self.n1 as i64 / 8).max(1), h2 - (self.n2 as i64 / 8).max(1));
        let mut top = 0.0f64;
        let mut tail = 0.0f64;
        for i in 0..self.n1 {
            let m1 = if i as i64 >= h1 { i as i64 - self.n1 as i64 } else { i as i64 };
            for j in 0..self.n2 {
                let m2 = if j as i64 >= h2 { j as i64 - self.n2 as i64 } else { j as i64 };
                let a = self.data[i * self.n2 + j].norm();
                top = top.max(a);
                if m1.abs() >= e1 || m2.abs() >= e2 {
                    tail = tail.max(a);
                }
            }
        }
        tail / top.max(1e-300)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn single_mode_round_trip() {
        let (n1, n2) = (8, 16);
        let samples: Vec<f64> = (0..n1 * n2)
            .map(|idx| {
                let (i, j) = (idx / n2, idx % n2);
                (2.0 * PI * (i as f64 / n1 as f64 + 3.0 * j as f64 / n2 as f64)).cos()
            })
            .collect();
        let t = CoefTable::from_samples(&samples, n1, n2);
        assert!((t.get(1, 3) - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        assert!((t.get(-1, -3) - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        assert!(t.get(0, 0).norm() < 1e-14);
    }
}
