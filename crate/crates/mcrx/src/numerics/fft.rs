//! Discrete Fourier transforms, unitary convention (1/sqrt(N) both ways).
//!
//! Power-of-two lengths go through an iterative radix-2 Cooley-Tukey;
//! everything else through Bluestein's chirp-z algorithm, so any block
//! length works (GFDM blocks are not powers of two).

use num_complex::Complex64 as Cpx;
use std::f64::consts::PI;

use super::CVec;

/// Unitary DFT: `out[k] = (1/sqrt(N)) * sum_n v[n] exp(-j 2 pi k n / N)`.
pub fn dft(v: &CVec) -> CVec {
    let mut out = transform(v.as_slice(), true);
    scale(&mut out, 1.0 / (v.len() as f64).sqrt());
    CVec::from_vec_unchecked(out)
}

/// Unitary inverse DFT, the exact inverse of [`dft`].
pub fn idft(v: &CVec) -> CVec {
    let mut out = transform(v.as_slice(), false);
    scale(&mut out, 1.0 / (v.len() as f64).sqrt());
    CVec::from_vec_unchecked(out)
}

fn scale(data: &mut [Cpx], s: f64) {
    for x in data {
        *x *= s;
    }
}

/// Unnormalized transform: `out[k] = sum_n input[n] exp(sign j 2 pi k n / N)`
/// with sign = -1 when `forward`.
pub(crate) fn transform(input: &[Cpx], forward: bool) -> Vec<Cpx> {
    let n = input.len();
    assert!(n > 0, "transform of empty slice");
    if n.is_power_of_two() {
        let mut buf = input.to_vec();
        fft_pow2(&mut buf, forward);
        buf
    } else {
        bluestein(input, forward)
    }
}

/// In-place iterative radix-2 Cooley-Tukey, no scaling.
fn fft_pow2(buf: &mut [Cpx], forward: bool) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    if n == 1 {
        return;
    }

    // bit-reversal permutation
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = (i.reverse_bits() >> (usize::BITS - bits)) as usize;
        if j > i {
            buf.swap(i, j);
        }
    }

    let sign = if forward { -1.0 } else { 1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * PI / len as f64;
        let wlen = Cpx::new(ang.cos(), ang.sin());
        let mut start = 0;
        while start < n {
            let mut w = Cpx::new(1.0, 0.0);
            for i in 0..len / 2 {
                let a = buf[start + i];
                let b = buf[start + i + len / 2] * w;
                buf[start + i] = a + b;
                buf[start + i + len / 2] = a - b;
                w *= wlen;
            }
            start += len;
        }
        len <<= 1;
    }
}

/// Chirp-z (Bluestein) transform for arbitrary length via a power-of-two
/// circular convolution.
fn bluestein(input: &[Cpx], forward: bool) -> Vec<Cpx> {
    let n = input.len();
    let sign = if forward { -1.0 } else { 1.0 };

    // chirp[j] = exp(sign * j*pi*j^2/n); reduce j^2 mod 2n to keep the
    // angle small and the evaluation accurate for large j.
    let chirp: Vec<Cpx> = (0..n)
        .map(|j| {
            let q = ((j * j) % (2 * n)) as f64;
            let ang = sign * PI * q / n as f64;
            Cpx::new(ang.cos(), ang.sin())
        })
        .collect();

    let m = (2 * n - 1).next_power_of_two();
    let mut a = vec![Cpx::new(0.0, 0.0); m];
    for j in 0..n {
        a[j] = input[j] * chirp[j];
    }
    let mut b = vec![Cpx::new(0.0, 0.0); m];
    b[0] = chirp[0].conj();
    for j in 1..n {
        b[j] = chirp[j].conj();
        b[m - j] = chirp[j].conj();
    }

    fft_pow2(&mut a, true);
    fft_pow2(&mut b, true);
    for j in 0..m {
        a[j] *= b[j];
    }
    fft_pow2(&mut a, false);
    let inv_m = 1.0 / m as f64;

    (0..n).map(|k| a[k] * inv_m * chirp[k]).collect()
}
