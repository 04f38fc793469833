//! Complex vectors and matrices, transforms, circulant construction, and
//! dense solves. Everything here is a pure function of its inputs.

mod fft;
mod lu;

pub use fft::{dft, idft};
pub use lu::{LuFactors, SINGULAR_PIVOT_REL};

use num_complex::Complex64;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

pub type Cpx = Complex64;

/// Complex column vector, non-empty with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CVec {
    data: Vec<Cpx>,
}

impl CVec {
    /// Validating constructor: rejects empty vectors and NaN/Inf entries.
    pub fn new(data: Vec<Cpx>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyVector);
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite("CVec"));
        }
        Ok(Self { data })
    }

    /// Internal constructor for values produced by finite arithmetic.
    pub(crate) fn from_vec_unchecked(data: Vec<Cpx>) -> Self {
        debug_assert!(!data.is_empty());
        Self { data }
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n > 0);
        Self {
            data: vec![Cpx::new(0.0, 0.0); n],
        }
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> Cpx) -> Self {
        assert!(n > 0);
        Self {
            data: (0..n).map(f).collect(),
        }
    }

    /// Real-valued input helper.
    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&r| Cpx::new(r, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the constructors forbid empty vectors
    }

    pub fn as_slice(&self) -> &[Cpx] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Cpx] {
        &mut self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Cpx> {
        self.data.iter()
    }

    pub fn into_vec(self) -> Vec<Cpx> {
        self.data
    }

    /// Euclidean norm.
    pub fn norm2(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise distance to another vector of the same length.
    pub fn max_abs_diff(&self, other: &CVec) -> f64 {
        assert_eq!(self.len(), other.len());
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Index<usize> for CVec {
    type Output = Cpx;
    fn index(&self, i: usize) -> &Cpx {
        &self.data[i]
    }
}

impl IndexMut<usize> for CVec {
    fn index_mut(&mut self, i: usize) -> &mut Cpx {
        &mut self.data[i]
    }
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<Cpx>,
}

impl CMat {
    pub fn new(rows: usize, cols: usize, data: Vec<Cpx>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite("CMat"));
        }
        Ok(Self { rows, cols, data })
    }

    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<Cpx>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0);
        Self {
            rows,
            cols,
            data: vec![Cpx::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Cpx::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Cpx) -> Self {
        assert!(rows > 0 && cols > 0);
        let data = (0..rows * cols).map(|i| f(i / cols, i % cols)).collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Cpx] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Cpx] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Column `j` as a vector.
    pub fn col(&self, j: usize) -> CVec {
        CVec::from_fn(self.rows, |i| self.data[i * self.cols + j])
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self.data[j * self.cols + i].conj())
    }

    pub fn matvec(&self, x: &CVec) -> Result<CVec> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "matvec: {}x{} times length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        let mut out = vec![Cpx::new(0.0, 0.0); self.rows];
        for (i, o) in out.iter_mut().enumerate() {
            let row = self.row(i);
            let mut acc = Cpx::new(0.0, 0.0);
            for (a, b) in row.iter().zip(x.iter()) {
                acc += a * b;
            }
            *o = acc;
        }
        Ok(CVec::from_vec_unchecked(out))
    }

    pub fn matmul(&self, other: &CMat) -> Result<CMat> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "matmul: {}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(orow.iter()) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Induced infinity norm (max absolute row sum).
    pub fn inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest entrywise distance to another matrix of the same shape.
    pub fn max_abs_diff(&self, other: &CMat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = Cpx;
    fn index(&self, (i, j): (usize, usize)) -> &Cpx {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Cpx {
        &mut self.data[i * self.cols + j]
    }
}

/// n-by-n circulant matrix whose first column is `h` zero-padded to n;
/// each later column is a cyclic downward shift of the previous one.
pub fn circulant_from(h: &CVec, n: usize) -> Result<CMat> {
    if h.len() > n {
        return Err(Error::ChannelTooLong {
            taps: h.len(),
            n,
        });
    }
    let mut first = vec![Cpx::new(0.0, 0.0); n];
    first[..h.len()].copy_from_slice(h.as_slice());
    Ok(CMat::from_fn(n, n, |i, j| first[(n + i - j) % n]))
}

/// Solve `a x = b` by pivoted elimination.
pub fn solve(a: &CMat, b: &CVec) -> Result<CVec> {
    LuFactors::factor(a)?.solve_vec(b)
}

/// Infinity-norm condition number; `+inf` for singular matrices.
///
/// Computed exactly from the LU inverse — fine at the dense sizes used
/// here (blocks of at most a few hundred).
pub fn cond_estimate(a: &CMat) -> f64 {
    assert!(a.is_square(), "cond_estimate needs a square matrix");
    match LuFactors::factor(a) {
        Ok(f) => a.inf_norm() * f.inverse().inf_norm(),
        Err(_) => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn rand_cvec(n: usize, rng: &mut ChaCha20Rng) -> CVec {
        CVec::from_fn(n, |_| Cpx::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    /// Random diagonally dominant matrix — comfortably nonsingular.
    fn rand_well_conditioned(n: usize, rng: &mut ChaCha20Rng) -> CMat {
        let mut m = CMat::from_fn(n, n, |_, _| {
            Cpx::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        for i in 0..n {
            m[(i, i)] += Cpx::new(n as f64, 0.0);
        }
        m
    }

    #[test]
    fn cvec_rejects_empty_and_nonfinite() {
        assert!(matches!(CVec::new(vec![]), Err(Error::EmptyVector)));
        let bad = vec![Cpx::new(f64::NAN, 0.0)];
        assert!(matches!(CVec::new(bad), Err(Error::NonFinite(_))));
        let inf = vec![Cpx::new(0.0, f64::INFINITY)];
        assert!(matches!(CVec::new(inf), Err(Error::NonFinite(_))));
    }

    #[test]
    fn circulant_impulse_is_identity() {
        let h = CVec::new(vec![Cpx::new(1.0, 0.0)]).unwrap();
        let c = circulant_from(&h, 3).unwrap();
        assert_eq!(c.max_abs_diff(&CMat::identity(3)), 0.0);
    }

    #[test]
    fn circulant_columns_are_cyclic_shifts() {
        // h=[1,2], n=3: columns ([1,2,0],[0,1,2],[2,0,1])
        let h = CVec::new(vec![Cpx::new(1.0, 0.0), Cpx::new(2.0, 0.0)]).unwrap();
        let c = circulant_from(&h, 3).unwrap();
        let expect = [
            [1.0, 0.0, 2.0],
            [2.0, 1.0, 0.0],
            [0.0, 2.0, 1.0],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(c[(i, j)], Cpx::new(expect[i][j], 0.0));
            }
        }
    }

    #[test]
    fn circulant_too_many_taps_errors() {
        let h = CVec::new(vec![Cpx::new(1.0, 0.0); 4]).unwrap();
        assert!(matches!(
            circulant_from(&h, 3),
            Err(Error::ChannelTooLong { taps: 4, n: 3 })
        ));
    }

    #[test]
    fn circulant_matches_direct_circular_convolution() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for n in [4usize, 9, 96] {
            let h = rand_cvec(3, &mut rng);
            let x = rand_cvec(n, &mut rng);
            let c = circulant_from(&h, n).unwrap();
            let via_mat = c.matvec(&x).unwrap();
            // direct circular-convolution sum, independent of the matrix path
            let direct = CVec::from_fn(n, |i| {
                (0..h.len())
                    .map(|m| h[m] * x[(n + i - m) % n])
                    .sum()
            });
            assert!(via_mat.max_abs_diff(&direct) < 1e-12, "n={n}");
        }
    }

    #[test]
    fn circulant_diagonalized_by_dft() {
        // C x = idft(dft(h_pad) .* dft(x)) * sqrt(n)
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        for n in [8usize, 96] {
            let h = rand_cvec(5, &mut rng);
            let x = rand_cvec(n, &mut rng);
            let c = circulant_from(&h, n).unwrap();
            let direct = c.matvec(&x).unwrap();

            let mut h_pad = vec![Cpx::new(0.0, 0.0); n];
            h_pad[..5].copy_from_slice(h.as_slice());
            let hf = dft(&CVec::new(h_pad).unwrap());
            let xf = dft(&x);
            let prod = CVec::from_fn(n, |k| hf[k] * xf[k]);
            let mut freq = idft(&prod);
            let root_n = (n as f64).sqrt();
            for i in 0..n {
                freq[i] *= root_n;
            }
            assert!(direct.max_abs_diff(&freq) < 1e-10, "n={n}");
        }
    }

    #[test]
    fn solve_identity_and_scaling() {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let b = rand_cvec(5, &mut rng);
        let x = solve(&CMat::identity(5), &b).unwrap();
        assert!(x.max_abs_diff(&b) < 1e-15);

        let mut two_i = CMat::identity(5);
        for i in 0..5 {
            two_i[(i, i)] = Cpx::new(2.0, 0.0);
        }
        let x = solve(&two_i, &b).unwrap();
        let half = CVec::from_fn(5, |i| b[i] * 0.5);
        assert!(x.max_abs_diff(&half) < 1e-15);
    }

    #[test]
    fn solve_recovers_known_solution() {
        let mut rng = ChaCha20Rng::seed_from_u64(22);
        for n in [3usize, 8, 32] {
            let a = rand_well_conditioned(n, &mut rng);
            let x_true = rand_cvec(n, &mut rng);
            let b = a.matvec(&x_true).unwrap();
            let x = solve(&a, &b).unwrap();
            let rel = x.max_abs_diff(&x_true) / x_true.max_abs();
            assert!(rel < 1e-9, "n={n} rel={rel}");
        }
    }

    #[test]
    fn solve_residual_bound_over_random_systems() {
        let mut rng = ChaCha20Rng::seed_from_u64(23);
        for trial in 0..100 {
            let n = 2 + (trial % 15);
            let a = rand_well_conditioned(n, &mut rng);
            let b = rand_cvec(n, &mut rng);
            let x = solve(&a, &b).unwrap();
            let ax = a.matvec(&x).unwrap();
            let resid = ax.max_abs_diff(&b);
            let bound = 1e-9 * b.max_abs() * cond_estimate(&a);
            assert!(resid <= bound, "trial={trial} resid={resid} bound={bound}");
        }
    }

    #[test]
    fn solve_rejects_singular() {
        let z = CMat::zeros(3, 3);
        let b = CVec::new(vec![Cpx::new(1.0, 0.0); 3]).unwrap();
        assert!(matches!(solve(&z, &b), Err(Error::SingularMatrix { .. })));

        // rank-1
        let r1 = CMat::from_fn(3, 3, |_, j| Cpx::new(j as f64 + 1.0, 0.0));
        assert!(matches!(solve(&r1, &b), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn cond_of_identity_and_diagonal() {
        assert!((cond_estimate(&CMat::identity(6)) - 1.0).abs() < 1e-12);

        let mut d = CMat::identity(2);
        d[(1, 1)] = Cpx::new(1e-8, 0.0);
        let c = cond_estimate(&d);
        assert!((c / 1e8 - 1.0).abs() < 1e-6, "cond={c}");
    }

    #[test]
    fn cond_of_unitary_dft_matrix_is_near_one() {
        // unitary, so the 2-norm condition number is exactly 1; the
        // infinity-norm figure grows like n, hence the small n here
        let n = 8;
        let scale = 1.0 / (n as f64).sqrt();
        let f = CMat::from_fn(n, n, |i, j| {
            let ang = -2.0 * std::f64::consts::PI * (i * j) as f64 / n as f64;
            Cpx::new(ang.cos(), ang.sin()) * scale
        });
        let c = cond_estimate(&f);
        assert!(c >= 1.0 && c < 10.0, "cond={c}");
    }

    #[test]
    fn cond_of_singular_is_infinite() {
        assert!(cond_estimate(&CMat::zeros(4, 4)).is_infinite());
    }
}
