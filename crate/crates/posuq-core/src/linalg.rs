//! Small dense linear algebra: just enough for GP training and the
//! 2-parameter Gauss-Newton step.

use alloc::vec;
use alloc::vec::Vec;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }
}

/// Lower-triangular Cholesky factor L with A = L·Lᵀ.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    pub n: usize,
    /// Row-major lower triangle (upper triangle zeroed).
    pub lower: Vec<f64>,
}

/// Cholesky decomposition of a symmetric matrix. Fails if a pivot is not
/// strictly positive.
pub fn cholesky(a: &SquareMatrix) -> Result<CholeskyFactor, NotPositiveDefinite> {
    let n = a.n;
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(NotPositiveDefinite { pivot: i });
                }
                l[i * n + i] = libm::sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(CholeskyFactor { n, lower: l })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotPositiveDefinite {
    pub pivot: usize,
}

impl CholeskyFactor {
    /// Solve L·y = b.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.lower[i * n + k] * y[k];
            }
            y[i] /= self.lower[i * n + i];
        }
        y
    }

    /// Solve Lᵀ·x = b.
    pub fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                x[i] -= self.lower[k * n + i] * x[k];
            }
            x[i] /= self.lower[i * n + i];
        }
        x
    }

    /// Solve (L·Lᵀ)·x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// log det(L·Lᵀ) = 2·Σ log L_ii.
    pub fn log_det(&self) -> f64 {
        let n = self.n;
        (0..n).map(|i| 2.0 * libm::log(self.lower[i * n + i])).sum()
    }
}

/// Solve the 2x2 system [[a,b],[b,c]]·x = rhs. Returns None if singular.
pub fn solve_sym2(a: f64, b: f64, c: f64, rhs: [f64; 2]) -> Option<[f64; 2]> {
    let det = a * c - b * b;
    let scale = a.abs().max(c.abs()).max(b.abs()).max(1e-300);
    if !det.is_finite() || det.abs() <= 1e-14 * scale * scale {
        return None;
    }
    Some([
        (c * rhs[0] - b * rhs[1]) / det,
        (a * rhs[1] - b * rhs[0]) / det,
    ])
}
