//! Multi-carrier receiver workbench.
//!
//! Simulates OFDM/GFDM transmission over Rayleigh multipath channels and
//! compares classical linear receivers (ZF, MF, MMSE) against neural
//! receivers that detect symbols directly from the received block,
//! without explicit channel equalization. A Monte-Carlo harness sweeps
//! BER over Eb/No and writes CSV/SVG reports; everything is a pure
//! function of the configuration and a master seed.

pub mod channel;
pub mod error;
pub mod linear_rx;
pub mod neuralnet;
pub mod numerics;
pub mod waveform;

pub use error::{Error, Result};
