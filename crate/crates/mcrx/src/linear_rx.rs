//! Classical linear receivers: frequency-domain ZF channel equalization
//! and the ZF / MF / MMSE detector family, plus BER bookkeeping.

use crate::error::{Error, Result};
use crate::numerics::{dft, idft, CMat, CVec, Cpx, LuFactors};
use crate::waveform::ModMatrix;

/// Relative eigenvalue floor below which a channel bin counts as faded
/// shut and ZF equalization refuses to divide.
pub const EIGENVALUE_FLOOR_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorKind {
    Zf,
    Mf,
    Mmse,
}

impl DetectorKind {
    pub fn label(&self) -> &'static str {
        match self {
            DetectorKind::Zf => "zf",
            DetectorKind::Mf => "mf",
            DetectorKind::Mmse => "mmse",
        }
    }
}

/// One BER measurement. The rate itself is derived from the counts so the
/// two can never disagree.
#[derive(Debug, Clone, PartialEq)]
pub struct BerRecord {
    pub waveform: String,
    pub receiver: String,
    /// registry name for neural receivers, None for classical ones
    pub model: Option<String>,
    pub ebno_db: f64,
    pub n_bits: u64,
    pub n_errors: u64,
    pub seed: u64,
    /// set when the measurement aborted (e.g. singular channel bin)
    pub error: Option<String>,
}

impl BerRecord {
    pub fn ber(&self) -> f64 {
        self.n_errors as f64 / self.n_bits as f64
    }
}

/// Labels attached to a BER measurement.
#[derive(Debug, Clone)]
pub struct RecordMeta {
    pub waveform: String,
    pub receiver: String,
    pub model: Option<String>,
    pub ebno_db: f64,
    pub seed: u64,
}

/// z = H^-1 y computed in the frequency domain: the circulant channel is
/// diagonalized by the DFT with eigenvalues sqrt(N) * dft(h_pad).
pub fn zf_equalize(y: &CVec, h: &CVec) -> Result<CVec> {
    let n = y.len();
    if h.len() > n {
        return Err(Error::ChannelTooLong { taps: h.len(), n });
    }
    let mut h_pad = vec![Cpx::new(0.0, 0.0); n];
    h_pad[..h.len()].copy_from_slice(h.as_slice());
    let root_n = (n as f64).sqrt();
    let eig: Vec<Cpx> = dft(&CVec::from_vec_unchecked(h_pad))
        .iter()
        .map(|l| l * root_n)
        .collect();

    let max_mag = eig.iter().map(|l| l.norm()).fold(0.0, f64::max);
    for (bin, lambda) in eig.iter().enumerate() {
        if lambda.norm() <= EIGENVALUE_FLOOR_REL * max_mag {
            return Err(Error::SingularChannel {
                bin,
                magnitude: lambda.norm(),
            });
        }
    }

    let yf = dft(y);
    let zf = CVec::from_fn(n, |k| yf[k] / eig[k]);
    Ok(idft(&zf))
}

/// The detector matrix B for d_hat = B z. MMSE uses R_w = sigma^2 I, a
/// documented simplification (ZF equalization actually colors the noise).
pub fn detector_matrix(kind: DetectorKind, mm: &ModMatrix, sigma2: f64) -> Result<CMat> {
    let a = mm.matrix();
    match kind {
        DetectorKind::Zf => Ok(LuFactors::factor(a)?.inverse()),
        DetectorKind::Mf => Ok(a.hermitian()),
        DetectorKind::Mmse => {
            let ah = a.hermitian();
            let mut gram = ah.matmul(a)?;
            for i in 0..gram.rows() {
                gram[(i, i)] += Cpx::new(sigma2, 0.0);
            }
            LuFactors::factor(&gram)?.inverse().matmul(&ah)
        }
    }
}

/// d_hat = B z.
pub fn detect(b_mat: &CMat, z: &CVec) -> Result<CVec> {
    b_mat.matvec(z)
}

/// Count bit mismatches into a BER record.
pub fn ber(bits_hat: &[u8], bits_true: &[u8], meta: RecordMeta) -> Result<BerRecord> {
    if bits_hat.len() != bits_true.len() {
        return Err(Error::DimensionMismatch(format!(
            "bit streams differ in length: {} vs {}",
            bits_hat.len(),
            bits_true.len()
        )));
    }
    let n_errors = bits_hat
        .iter()
        .zip(bits_true.iter())
        .filter(|(a, b)| a != b)
        .count() as u64;
    Ok(BerRecord {
        waveform: meta.waveform,
        receiver: meta.receiver,
        model: meta.model,
        ebno_db: meta.ebno_db,
        n_bits: bits_hat.len() as u64,
        n_errors,
        seed: meta.seed,
        error: None,
    })
}
