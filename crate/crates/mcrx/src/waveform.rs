//! Multi-carrier waveform synthesis: modulation-matrix construction for
//! OFDM and GFDM, BPSK mapping, and cyclic-prefix handling.
//!
//! A block carries N = K*M symbols: K subcarriers times M subsymbols.
//! The transmit signal is x = A d, where the columns of the N-by-N matrix
//! A are the time/frequency-shifted prototype pulses; column m*K + k holds
//! the pulse for subcarrier k, subsymbol m. OFDM is the M = 1 special
//! case, for which A is exactly the unitary inverse DFT matrix.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{cond_estimate, CMat, CVec, Cpx};

/// Condition-number ceiling above which matrix construction fails.
pub const COND_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveformKind {
    Ofdm,
    Gfdm,
}

impl WaveformKind {
    pub fn label(&self) -> &'static str {
        match self {
            WaveformKind::Ofdm => "ofdm",
            WaveformKind::Gfdm => "gfdm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrototypeFilter {
    /// Rectangular pulse spanning one subsymbol (K samples).
    Rect,
    /// Root-raised-cosine, circularly wrapped to the block length.
    Rrc,
}

/// Waveform configuration: dimensions, prototype filter, CP length and
/// modulation order exponent (bits per symbol; 1 = BPSK).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveformSpec {
    pub kind: WaveformKind,
    pub subcarriers: usize,
    pub subsymbols: usize,
    pub filter: PrototypeFilter,
    pub rolloff: f64,
    pub ncp: usize,
    pub bits_per_symbol: u32,
}

impl WaveformSpec {
    pub fn new(
        kind: WaveformKind,
        subcarriers: usize,
        subsymbols: usize,
        filter: PrototypeFilter,
        rolloff: f64,
        ncp: usize,
    ) -> Result<Self> {
        let spec = Self {
            kind,
            subcarriers,
            subsymbols,
            filter,
            rolloff,
            ncp,
            bits_per_symbol: 1,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Reproduction default: K=64, M=1, Ncp=16.
    pub fn ofdm_default() -> Self {
        Self::new(WaveformKind::Ofdm, 64, 1, PrototypeFilter::Rect, 0.0, 16).unwrap()
    }

    /// Reproduction default: K=32, M=3, RRC a=0.1, Ncp=24.
    pub fn gfdm_default() -> Self {
        Self::new(WaveformKind::Gfdm, 32, 3, PrototypeFilter::Rrc, 0.1, 24).unwrap()
    }

    fn validate(&self) -> Result<()> {
        if self.subcarriers < 1 || self.subsymbols < 1 || self.block_len() < 2 {
            return Err(Error::InvalidWaveform(format!(
                "need K >= 1, M >= 1, K*M >= 2 (got K={}, M={})",
                self.subcarriers, self.subsymbols
            )));
        }
        if self.kind == WaveformKind::Ofdm
            && (self.subsymbols != 1 || self.filter != PrototypeFilter::Rect)
        {
            return Err(Error::InvalidWaveform(
                "OFDM requires M = 1 and a rectangular prototype".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.rolloff) {
            return Err(Error::InvalidRolloff(self.rolloff));
        }
        if self.bits_per_symbol != 1 {
            return Err(Error::InvalidWaveform(
                "only BPSK (one bit per symbol) is supported".into(),
            ));
        }
        Ok(())
    }

    /// Block length N = K*M.
    pub fn block_len(&self) -> usize {
        self.subcarriers * self.subsymbols
    }

    /// Bits carried by one block.
    pub fn bits_per_block(&self) -> usize {
        self.block_len() * self.bits_per_symbol as usize
    }
}

/// Time-domain root-raised-cosine prototype: symbol period K samples,
/// sampled at the N block positions centered on the pulse peak, circularly
/// wrapped, and normalized to unit energy.
pub fn rrc_prototype(spec: &WaveformSpec) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&spec.rolloff) {
        return Err(Error::InvalidRolloff(spec.rolloff));
    }
    let n = spec.block_len();
    let k = spec.subcarriers as f64;
    let mut g: Vec<f64> = (0..n)
        .map(|i| {
            // signed sample offset from the peak, wrapped to [-N/2, N/2)
            let s = if i < n.div_ceil(2) {
                i as f64
            } else {
                i as f64 - n as f64
            };
            rrc_impulse(s / k, spec.rolloff)
        })
        .collect();
    normalize_energy(&mut g);
    Ok(g)
}

/// Analog RRC impulse response at time `t` in symbol periods, with the
/// removable singularities at t = 0 and |4at| = 1 evaluated by their
/// analytic limits.
fn rrc_impulse(t: f64, a: f64) -> f64 {
    if t.abs() < 1e-12 {
        return 1.0 + a * (4.0 / PI - 1.0);
    }
    let four_at = 4.0 * a * t;
    let denom_factor = 1.0 - four_at * four_at;
    if denom_factor.abs() < 1e-12 {
        // t = +-1/(4a)
        let c = PI / (4.0 * a);
        return (a / 2f64.sqrt())
            * ((1.0 + 2.0 / PI) * c.sin() + (1.0 - 2.0 / PI) * c.cos());
    }
    let num = (PI * t * (1.0 - a)).sin() + four_at * (PI * t * (1.0 + a)).cos();
    num / (PI * t * denom_factor)
}

/// Rectangular prototype: one subsymbol (K samples) wide, unit energy.
fn rect_prototype(spec: &WaveformSpec) -> Vec<f64> {
    let n = spec.block_len();
    let k = spec.subcarriers;
    let mut g = vec![0.0; n];
    let amp = 1.0 / (k as f64).sqrt();
    for slot in g.iter_mut().take(k) {
        *slot = amp;
    }
    g
}

fn normalize_energy(g: &mut [f64]) {
    let energy: f64 = g.iter().map(|v| v * v).sum();
    let scale = 1.0 / energy.sqrt();
    for v in g {
        *v *= scale;
    }
}

/// A waveform's N-by-N modulation matrix together with its condition
/// number. Immutable once built.
#[derive(Debug, Clone)]
pub struct ModMatrix {
    spec: WaveformSpec,
    a_mat: CMat,
    cond: f64,
}

impl ModMatrix {
    pub fn spec(&self) -> &WaveformSpec {
        &self.spec
    }

    pub fn matrix(&self) -> &CMat {
        &self.a_mat
    }

    pub fn cond(&self) -> f64 {
        self.cond
    }

    pub fn block_len(&self) -> usize {
        self.spec.block_len()
    }
}

/// Build the modulation matrix for a waveform spec.
///
/// OFDM is constructed directly as the unitary N-point inverse DFT matrix.
/// GFDM columns are the circularly shifted, frequency-shifted prototype
/// pulses; every column is normalized to unit 2-norm.
pub fn build_mod_matrix(spec: &WaveformSpec) -> Result<ModMatrix> {
    spec.validate()?;
    let n = spec.block_len();
    let a_mat = match spec.kind {
        WaveformKind::Ofdm => {
            let scale = 1.0 / (n as f64).sqrt();
            CMat::from_fn(n, n, |row, col| {
                let ang = 2.0 * PI * ((row * col) % n) as f64 / n as f64;
                Cpx::new(ang.cos(), ang.sin()) * scale
            })
        }
        WaveformKind::Gfdm => {
            let g = match spec.filter {
                PrototypeFilter::Rrc => rrc_prototype(spec)?,
                PrototypeFilter::Rect => rect_prototype(spec),
            };
            gfdm_matrix(spec, &g)
        }
    };
    let cond = cond_estimate(&a_mat);
    if !cond.is_finite() || cond >= COND_LIMIT {
        return Err(Error::IllConditioned {
            k: spec.subcarriers,
            m: spec.subsymbols,
            rolloff: spec.rolloff,
            cond,
        });
    }
    Ok(ModMatrix {
        spec: *spec,
        a_mat,
        cond,
    })
}

fn gfdm_matrix(spec: &WaveformSpec, g: &[f64]) -> CMat {
    let n = spec.block_len();
    let k_sub = spec.subcarriers;
    let mut mat = CMat::zeros(n, n);
    for m in 0..spec.subsymbols {
        for k in 0..k_sub {
            let col = m * k_sub + k;
            let mut norm_sq = 0.0;
            for row in 0..n {
                let shift = (n + row - m * k_sub) % n;
                let ang = 2.0 * PI * ((k * row) % k_sub) as f64 / k_sub as f64;
                let val = Cpx::new(ang.cos(), ang.sin()) * g[shift];
                norm_sq += val.norm_sqr();
                mat[(row, col)] = val;
            }
            let scale = 1.0 / norm_sq.sqrt();
            for row in 0..n {
                mat[(row, col)] *= scale;
            }
        }
    }
    mat
}

/// BPSK mapping: bit 0 -> +1, bit 1 -> -1 (unit symbol energy).
pub fn map_bits(bits: &[u8]) -> Result<CVec> {
    debug_assert!(bits.iter().all(|&b| b <= 1));
    CVec::new(
        bits.iter()
            .map(|&b| Cpx::new(if b == 0 { 1.0 } else { -1.0 }, 0.0))
            .collect(),
    )
}

/// x = A d.
pub fn modulate(mm: &ModMatrix, d: &CVec) -> Result<CVec> {
    mm.a_mat.matvec(d)
}

/// Prepend the last `ncp` samples of the block.
pub fn add_cp(x: &CVec, ncp: usize) -> Result<CVec> {
    if ncp > x.len() {
        return Err(Error::CpTooLong { ncp, len: x.len() });
    }
    let mut out = Vec::with_capacity(x.len() + ncp);
    out.extend_from_slice(&x.as_slice()[x.len() - ncp..]);
    out.extend_from_slice(x.as_slice());
    Ok(CVec::from_vec_unchecked(out))
}

/// Drop the first `ncp` samples.
pub fn remove_cp(y: &CVec, ncp: usize) -> Result<CVec> {
    if ncp >= y.len() {
        return Err(Error::CpTooLong { ncp, len: y.len() });
    }
    Ok(CVec::from_vec_unchecked(y.as_slice()[ncp..].to_vec()))
}

/// BPSK hard decision on the real part: Re >= 0 -> bit 0, Re < 0 -> bit 1.
pub fn demap_symbols(d_hat: &CVec) -> Vec<u8> {
    d_hat
        .iter()
        .map(|z| if z.re >= 0.0 { 0 } else { 1 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{idft, solve, CMat};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random_bits(n: usize, rng: &mut ChaCha20Rng) -> Vec<u8> {
        (0..n).map(|_| rng.random_range(0..2u8)).collect()
    }

    #[test]
    fn spec_validation() {
        assert!(WaveformSpec::new(WaveformKind::Ofdm, 64, 2, PrototypeFilter::Rect, 0.0, 16).is_err());
        assert!(WaveformSpec::new(WaveformKind::Gfdm, 32, 3, PrototypeFilter::Rrc, 1.5, 24).is_err());
        assert!(WaveformSpec::new(WaveformKind::Ofdm, 1, 1, PrototypeFilter::Rect, 0.0, 0).is_err());
        assert_eq!(WaveformSpec::gfdm_default().block_len(), 96);
        assert_eq!(WaveformSpec::ofdm_default().block_len(), 64);
    }

    #[test]
    fn rrc_zero_rolloff_is_periodified_sinc() {
        let spec = WaveformSpec::new(WaveformKind::Gfdm, 32, 3, PrototypeFilter::Rrc, 0.0, 24).unwrap();
        let g = rrc_prototype(&spec).unwrap();
        // zeros at nonzero multiples of K samples from the peak
        assert!(g[32].abs() < 1e-12);
        assert!(g[64].abs() < 1e-12, "wrapped offset of -K");
        assert!(g[0] > 0.0);
        // and not zero off the grid
        assert!(g[48].abs() > 1e-3);
    }

    #[test]
    fn rrc_has_unit_energy() {
        let spec = WaveformSpec::gfdm_default();
        let g = rrc_prototype(&spec).unwrap();
        let energy: f64 = g.iter().map(|v| v * v).sum();
        assert!((energy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rrc_matches_textbook_formula() {
        // Independent oracle: the closed-form RRC response, evaluated
        // directly at a few sample offsets (t in symbol periods). The
        // t = 0 limit is frozen as its analytic value.
        let a: f64 = 0.1;
        let oracle = |t: f64| -> f64 {
            if t == 0.0 {
                return 1.0 + a * (4.0 / PI - 1.0);
            }
            let num = (PI * t * (1.0 - a)).sin() + 4.0 * a * t * (PI * t * (1.0 + a)).cos();
            num / (PI * t * (1.0 - (4.0 * a * t).powi(2)))
        };

        let spec = WaveformSpec::gfdm_default(); // K=32
        let g = rrc_prototype(&spec).unwrap();
        // normalization cancels in ratios to the peak
        for (idx, t) in [(16usize, 0.5), (32usize, 1.0)] {
            let got = g[idx] / g[0];
            let want = oracle(t) / oracle(0.0);
            assert!(
                (got - want).abs() < 1e-12,
                "t={t}: ratio {got} vs oracle {want}"
            );
        }
    }

    #[test]
    fn rrc_rejects_bad_rolloff() {
        let mut spec = WaveformSpec::gfdm_default();
        spec.rolloff = -0.2;
        assert!(matches!(rrc_prototype(&spec), Err(Error::InvalidRolloff(_))));
    }

    #[test]
    fn ofdm_matrix_is_the_unitary_idft() {
        let spec = WaveformSpec::new(WaveformKind::Ofdm, 4, 1, PrototypeFilter::Rect, 0.0, 0).unwrap();
        let mm = build_mod_matrix(&spec).unwrap();
        // A[n,k] = exp(j 2 pi n k / 4) / 2; entry (1,1) = j/2
        let a11 = mm.matrix()[(1, 1)];
        assert!((a11 - Cpx::new(0.0, 0.5)).norm() < 1e-15);
        let a00 = mm.matrix()[(0, 0)];
        assert!((a00 - Cpx::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn ofdm_matrix_is_unitary_at_table_dims() {
        let mm = build_mod_matrix(&WaveformSpec::ofdm_default()).unwrap();
        let gram = mm.matrix().hermitian().matmul(mm.matrix()).unwrap();
        assert!(gram.max_abs_diff(&CMat::identity(64)) < 1e-10);
    }

    #[test]
    fn gfdm_impulse_prototype_gives_identity() {
        // K=1 makes the rectangular prototype a unit impulse and kills the
        // frequency shift, so the columns are plain delays.
        let spec = WaveformSpec::new(WaveformKind::Gfdm, 1, 4, PrototypeFilter::Rect, 0.0, 0).unwrap();
        let mm = build_mod_matrix(&spec).unwrap();
        assert!(mm.matrix().max_abs_diff(&CMat::identity(4)) < 1e-15);
    }

    #[test]
    fn gfdm_table_config_shape_and_conditioning() {
        let mm = build_mod_matrix(&WaveformSpec::gfdm_default()).unwrap();
        assert_eq!(mm.matrix().rows(), 96);
        assert_eq!(mm.matrix().cols(), 96);
        assert!(mm.cond() < 1e12);

        for j in 0..96 {
            let norm = mm.matrix().col(j).norm2();
            assert!((norm - 1.0).abs() < 1e-12, "column {j} norm {norm}");
        }
    }

    #[test]
    fn gfdm_inverse_consistency_via_solve() {
        let mm = build_mod_matrix(&WaveformSpec::gfdm_default()).unwrap();
        let a = mm.matrix();
        // columns of A^-1 A recovered one solve at a time
        let mut prod = CMat::zeros(96, 96);
        for j in 0..96 {
            let x = solve(a, &a.col(j)).unwrap();
            for i in 0..96 {
                prod[(i, j)] = x[i];
            }
        }
        let err = {
            let mut diff = prod;
            for i in 0..96 {
                diff[(i, i)] -= Cpx::new(1.0, 0.0);
            }
            diff.inf_norm()
        };
        assert!(err < 1e-9, "inf norm {err}");
    }

    #[test]
    fn gfdm_columns_are_shifted_copies_within_a_block() {
        // column (k,m) equals column (k,0) circularly shifted by m*K; the
        // frequency shift contributes exp(j 2 pi k m) = 1
        let mm = build_mod_matrix(&WaveformSpec::gfdm_default()).unwrap();
        let a = mm.matrix();
        let (k_sub, n) = (32usize, 96usize);
        for &k in &[0usize, 5, 31] {
            for m in 1..3usize {
                let base = a.col(k);
                let shifted = a.col(m * k_sub + k);
                for row in 0..n {
                    let want = base[(n + row - m * k_sub) % n];
                    assert!(
                        (shifted[row] - want).norm() < 1e-12,
                        "k={k} m={m} row={row}"
                    );
                }
            }
        }
    }

    #[test]
    fn gfdm_magnitude_shows_block_structure() {
        // within subsymbol block m every column's magnitude profile is the
        // prototype magnitude delayed by m*K, independent of k
        let spec = WaveformSpec::gfdm_default();
        let mm = build_mod_matrix(&spec).unwrap();
        let g = rrc_prototype(&spec).unwrap();
        let a = mm.matrix();
        let n = 96;
        for m in 0..3usize {
            for &k in &[0usize, 7, 20] {
                let col = a.col(m * 32 + k);
                for row in 0..n {
                    let want = g[(n + row - m * 32) % n].abs();
                    assert!(
                        (col[row].norm() - want).abs() < 1e-12,
                        "m={m} k={k} row={row}"
                    );
                }
            }
        }
    }

    #[test]
    fn bpsk_mapping_convention() {
        let d = map_bits(&[0, 1, 0]).unwrap();
        assert_eq!(d[0], Cpx::new(1.0, 0.0));
        assert_eq!(d[1], Cpx::new(-1.0, 0.0));
        assert_eq!(d[2], Cpx::new(1.0, 0.0));

        let all_zero = map_bits(&[0; 8]).unwrap();
        assert!(all_zero.iter().all(|z| *z == Cpx::new(1.0, 0.0)));
    }

    #[test]
    fn demap_sign_rule_and_tie_break() {
        let v = CVec::new(vec![Cpx::new(0.9, 0.0), Cpx::new(-0.1, 0.5)]).unwrap();
        assert_eq!(demap_symbols(&v), vec![0, 1]);
        let tie = CVec::new(vec![Cpx::new(0.0, 0.0)]).unwrap();
        assert_eq!(demap_symbols(&tie), vec![0]);
    }

    #[test]
    fn map_demap_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(33);
        for _ in 0..50 {
            let bits = random_bits(96, &mut rng);
            assert_eq!(demap_symbols(&map_bits(&bits).unwrap()), bits);
        }
    }

    #[test]
    fn modulate_basis_vector_picks_column() {
        let mm = build_mod_matrix(&WaveformSpec::gfdm_default()).unwrap();
        let mut e0 = CVec::zeros(96);
        e0[0] = Cpx::new(1.0, 0.0);
        let x = modulate(&mm, &e0).unwrap();
        assert!(x.max_abs_diff(&mm.matrix().col(0)) < 1e-15);
    }

    #[test]
    fn modulate_is_linear() {
        let mm = build_mod_matrix(&WaveformSpec::gfdm_default()).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(34);
        let d1 = CVec::from_fn(96, |_| Cpx::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let d2 = CVec::from_fn(96, |_| Cpx::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let (alpha, beta) = (Cpx::new(1.3, -0.2), Cpx::new(-0.7, 0.9));
        let combo = CVec::from_fn(96, |i| alpha * d1[i] + beta * d2[i]);
        let lhs = modulate(&mm, &combo).unwrap();
        let x1 = modulate(&mm, &d1).unwrap();
        let x2 = modulate(&mm, &d2).unwrap();
        let rhs = CVec::from_fn(96, |i| alpha * x1[i] + beta * x2[i]);
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn ofdm_modulate_matches_idft() {
        let mm = build_mod_matrix(&WaveformSpec::ofdm_default()).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(35);
        let d = CVec::from_fn(64, |_| Cpx::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let x = modulate(&mm, &d).unwrap();
        assert!(x.max_abs_diff(&idft(&d)) < 1e-12);
    }

    #[test]
    fn cyclic_prefix_definition_and_round_trip() {
        let x = CVec::new(
            [1.0, 2.0, 3.0, 4.0].iter().map(|&r| Cpx::new(r, 0.0)).collect(),
        )
        .unwrap();
        let with_cp = add_cp(&x, 2).unwrap();
        let expect: Vec<f64> = vec![3.0, 4.0, 1.0, 2.0, 3.0, 4.0];
        for (i, &e) in expect.iter().enumerate() {
            assert_eq!(with_cp[i], Cpx::new(e, 0.0));
        }

        assert!(add_cp(&x, 0).unwrap().max_abs_diff(&x) == 0.0);
        assert!(remove_cp(&with_cp, 2).unwrap().max_abs_diff(&x) == 0.0);
        assert!(matches!(add_cp(&x, 5), Err(Error::CpTooLong { .. })));
    }

    #[test]
    fn average_transmit_energy_matches_block_length() {
        let mut rng = ChaCha20Rng::seed_from_u64(36);
        for spec in [WaveformSpec::ofdm_default(), WaveformSpec::gfdm_default()] {
            let mm = build_mod_matrix(&spec).unwrap();
            let n = spec.block_len();
            let trials = 2000;
            let mut acc = 0.0;
            for _ in 0..trials {
                let bits = random_bits(n, &mut rng);
                let x = modulate(&mm, &map_bits(&bits).unwrap()).unwrap();
                acc += x.norm2().powi(2);
            }
            let mean = acc / trials as f64;
            assert!(
                (mean / n as f64 - 1.0).abs() < 0.02,
                "{}: mean energy {mean} for N={n}",
                spec.kind.label()
            );
        }
    }
}
