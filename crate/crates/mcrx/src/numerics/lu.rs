//! Pivoted LU factorization for dense complex systems.

use num_complex::Complex64 as Cpx;

use super::{CMat, CVec};
use crate::error::{Error, Result};

/// Relative pivot threshold below which a matrix is declared singular.
pub const SINGULAR_PIVOT_REL: f64 = 1e-14;

/// LU factors of a square matrix with row pivoting, reusable for several
/// right-hand sides (solve, inverse, condition estimation).
pub struct LuFactors {
    n: usize,
    /// combined L (unit diagonal, below) and U (on and above), row-major
    lu: Vec<Cpx>,
    /// row permutation: factored row i came from original row perm[i]
    perm: Vec<usize>,
}

impl LuFactors {
    pub fn factor(a: &CMat) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "LU needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let threshold = SINGULAR_PIVOT_REL * a.max_abs();
        let mut lu = a.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();

        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_mag = lu[col * n + col].norm();
            for row in col + 1..n {
                let mag = lu[row * n + col].norm();
                if mag > pivot_mag {
                    pivot_mag = mag;
                    pivot_row = row;
                }
            }
            if pivot_mag <= threshold {
                return Err(Error::SingularMatrix {
                    pivot: pivot_mag,
                    threshold,
                    step: col,
                });
            }
            if pivot_row != col {
                for j in 0..n {
                    lu.swap(col * n + j, pivot_row * n + j);
                }
                perm.swap(col, pivot_row);
            }
            let pivot = lu[col * n + col];
            for row in col + 1..n {
                let factor = lu[row * n + col] / pivot;
                lu[row * n + col] = factor;
                for j in col + 1..n {
                    let sub = factor * lu[col * n + j];
                    lu[row * n + j] -= sub;
                }
            }
        }

        Ok(Self { n, lu, perm })
    }

    pub fn solve_vec(&self, b: &CVec) -> Result<CVec> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "system is {}x{} but rhs has length {}",
                self.n,
                self.n,
                b.len()
            )));
        }
        let mut x: Vec<Cpx> = (0..self.n).map(|i| b[self.perm[i]]).collect();
        self.solve_in_place(&mut x);
        Ok(CVec::from_vec_unchecked(x))
    }

    /// Inverse as a dense matrix (column-by-column solves).
    pub fn inverse(&self) -> CMat {
        let n = self.n;
        let mut inv = vec![Cpx::new(0.0, 0.0); n * n];
        let mut col = vec![Cpx::new(0.0, 0.0); n];
        for j in 0..n {
            for (i, c) in col.iter_mut().enumerate() {
                *c = if self.perm[i] == j {
                    Cpx::new(1.0, 0.0)
                } else {
                    Cpx::new(0.0, 0.0)
                };
            }
            self.solve_in_place(&mut col);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        CMat::from_vec_unchecked(n, n, inv)
    }

    /// Forward/back substitution on an already-permuted rhs.
    fn solve_in_place(&self, x: &mut [Cpx]) {
        let n = self.n;
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc / self.lu[i * n + i];
        }
    }
}
