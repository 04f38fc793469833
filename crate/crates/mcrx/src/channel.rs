//! Rayleigh multipath channel: tap drawing, AWGN application, the post-CP
//! circulant model, and Eb/No calibration.
//!
//! Taps are circularly symmetric complex Gaussians scaled by a power-delay
//! profile that sums to one, so E||h||^2 = 1. With unit-energy BPSK symbols
//! and unit-norm modulation columns, sigma^2 = 1 / (phi * 10^(EbNo/10));
//! cyclic-prefix energy overhead is deliberately excluded from the
//! calibration.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::{circulant_from, CMat, CVec, Cpx};

/// Published EPA power-delay profile: (delay ns, mean power dB).
const EPA_PROFILE: [(f64, f64); 7] = [
    (0.0, 0.0),
    (30.0, -1.0),
    (70.0, -1.0),
    (90.0, -2.0),
    (110.0, -3.0),
    (190.0, -8.0),
    (410.0, -20.8),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    /// Flat power across all taps.
    Uniform,
    /// EPA delay profile accumulated into sample-spaced bins.
    EpaResampled,
}

impl ProfileKind {
    pub fn label(&self) -> &'static str {
        match self {
            ProfileKind::Uniform => "uniform",
            ProfileKind::EpaResampled => "epa",
        }
    }
}

/// Mean tap powers for a multipath profile; always sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProfile {
    pub kind: ProfileKind,
    pub n_taps: usize,
    pub pdp: Vec<f64>,
}

impl ChannelProfile {
    pub fn uniform(n_taps: usize) -> Result<Self> {
        if n_taps == 0 {
            return Err(Error::InvalidProfile("need at least one tap".into()));
        }
        Ok(Self {
            kind: ProfileKind::Uniform,
            n_taps,
            pdp: vec![1.0 / n_taps as f64; n_taps],
        })
    }

    /// EPA profile resampled onto `n_taps` sample-spaced bins: the bin
    /// spacing maps the longest published delay onto the last bin, each
    /// published tap's linear power is accumulated into its nearest bin,
    /// and the result is renormalized. Bins without a published tap stay
    /// zero.
    pub fn epa_resampled(n_taps: usize) -> Result<Self> {
        if n_taps == 0 {
            return Err(Error::InvalidProfile("need at least one tap".into()));
        }
        let mut pdp = vec![0.0; n_taps];
        let max_delay = EPA_PROFILE.last().unwrap().0;
        for &(delay, power_db) in &EPA_PROFILE {
            let bin = if n_taps == 1 {
                0
            } else {
                let ts = max_delay / (n_taps - 1) as f64;
                ((delay / ts).round() as usize).min(n_taps - 1)
            };
            pdp[bin] += 10f64.powf(power_db / 10.0);
        }
        let total: f64 = pdp.iter().sum();
        for p in &mut pdp {
            *p /= total;
        }
        Ok(Self {
            kind: ProfileKind::EpaResampled,
            n_taps,
            pdp,
        })
    }

    pub fn from_kind(kind: ProfileKind, n_taps: usize) -> Result<Self> {
        match kind {
            ProfileKind::Uniform => Self::uniform(n_taps),
            ProfileKind::EpaResampled => Self::epa_resampled(n_taps),
        }
    }
}

/// One channel draw: taps plus the noise variance in force.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub h: CVec,
    pub sigma2: f64,
}

impl ChannelRealization {
    /// The effective post-CP channel matrix for block length `n`.
    pub fn circulant(&self, n: usize) -> Result<CMat> {
        post_cp_model(&self.h, n)
    }
}

/// Draw taps: tap i = sqrt(pdp[i]) * g with g ~ CN(0,1), so E||h||^2 = 1.
pub fn draw_taps(profile: &ChannelProfile, rng: &mut impl Rng) -> CVec {
    CVec::from_fn(profile.n_taps, |i| {
        let scale = (profile.pdp[i] / 2.0).sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Cpx::new(re * scale, im * scale)
    })
}

/// Total complex noise variance per sample for a given Eb/No in dB.
pub fn ebno_to_sigma2(ebno_db: f64, bits_per_symbol: u32) -> f64 {
    assert!(bits_per_symbol >= 1);
    1.0 / (bits_per_symbol as f64 * 10f64.powf(ebno_db / 10.0))
}

/// Linear convolution with the taps, truncated to the input length, plus
/// white CN(0, sigma^2) noise per sample.
pub fn apply_channel(x: &CVec, h: &CVec, sigma2: f64, rng: &mut impl Rng) -> CVec {
    let len = x.len();
    let noise_scale = (sigma2 / 2.0).sqrt();
    let mut out = vec![Cpx::new(0.0, 0.0); len];
    for (m, tap) in h.iter().enumerate() {
        if tap.norm_sqr() == 0.0 {
            continue;
        }
        for i in m..len {
            out[i] += tap * x[i - m];
        }
    }
    for sample in &mut out {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *sample += Cpx::new(re * noise_scale, im * noise_scale);
    }
    CVec::from_vec_unchecked(out)
}

/// The circulant channel seen between CP insertion and removal.
pub fn post_cp_model(h: &CVec, n: usize) -> Result<CMat> {
    circulant_from(h, n)
}
