//! Experiment configuration and the plain-text config-file format.
//!
//! The file format is `section.key = value` lines with `#` comments:
//!
//! ```text
//! waveform.kind = gfdm        # ofdm | gfdm
//! waveform.K = 32
//! waveform.M = 3
//! waveform.filter = rrc       # rect | rrc
//! waveform.rolloff = 0.1
//! waveform.ncp = 24
//! channel.profile = uniform   # uniform | epa
//! channel.ntaps = 10
//! sweep.start = 0
//! sweep.stop = 20
//! sweep.step = 2
//! data.train_symbols = 10000
//! data.test_symbols = 10000
//! train.lr = 0.0001
//! train.epochs = 30
//! train.batch = 64
//! train.dropout = 0.1
//! train.patience = 3
//! seed = 1
//! ```
//!
//! Unset keys fall back to the reproduction defaults of the chosen
//! waveform kind.

use std::path::Path;

use crate::channel::{ChannelProfile, ProfileKind};
use crate::error::{Error, Result};
use crate::neuralnet::TrainConfig;
use crate::waveform::{PrototypeFilter, WaveformKind, WaveformSpec};

/// Eb/No grid in dB: start, stop (inclusive), positive step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SweepGrid {
    pub fn points(&self) -> Vec<f64> {
        let mut pts = Vec::new();
        let mut i = 0usize;
        loop {
            let v = self.start + self.step * i as f64;
            if v > self.stop + 1e-9 {
                break;
            }
            pts.push(v);
            i += 1;
        }
        pts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DataConfig {
    pub train_symbols: usize,
    pub test_symbols: usize,
}

/// Everything a sweep needs; all outputs are a pure function of this
/// struct (notably the master `seed`).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub waveform: WaveformSpec,
    pub channel: ChannelProfile,
    pub sweep: SweepGrid,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub receivers: Vec<String>,
    pub seed: u64,
}

pub const DEFAULT_RECEIVERS: [&str; 4] = ["zf", "mf", "mmse", "zf-noeq"];

impl ExperimentConfig {
    /// Reproduction defaults for a waveform kind: Table-style dimensions,
    /// 10 fixed taps, 0..20 dB in 2 dB steps, 10000 + 10000 symbols.
    pub fn default_for(kind: WaveformKind) -> Self {
        let waveform = match kind {
            WaveformKind::Ofdm => WaveformSpec::ofdm_default(),
            WaveformKind::Gfdm => WaveformSpec::gfdm_default(),
        };
        Self {
            waveform,
            channel: ChannelProfile::uniform(10).unwrap(),
            sweep: SweepGrid {
                start: 0.0,
                stop: 20.0,
                step: 2.0,
            },
            data: DataConfig {
                train_symbols: 10_000,
                test_symbols: 10_000,
            },
            train: TrainConfig::default(),
            receivers: DEFAULT_RECEIVERS.iter().map(|s| s.to_string()).collect(),
            seed: 1,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            entries.push((key.trim().to_string(), value.trim().to_string(), lineno + 1));
        }

        // the waveform kind decides the defaults everything else overrides
        let mut kind = WaveformKind::Ofdm;
        for (key, value, lineno) in &entries {
            if key == "waveform.kind" {
                kind = match value.as_str() {
                    "ofdm" => WaveformKind::Ofdm,
                    "gfdm" => WaveformKind::Gfdm,
                    other => {
                        return Err(Error::Config(format!(
                            "line {lineno}: unknown waveform kind `{other}`"
                        )))
                    }
                };
            }
        }
        let mut cfg = Self::default_for(kind);
        let mut profile_kind = cfg.channel.kind;
        let mut n_taps = cfg.channel.n_taps;

        for (key, value, lineno) in &entries {
            let bad = |what: &str| Error::Config(format!("line {lineno}: bad {what} `{value}`"));
            match key.as_str() {
                "waveform.kind" => {}
                "waveform.K" => {
                    cfg.waveform.subcarriers = value.parse().map_err(|_| bad("integer"))?
                }
                "waveform.M" => {
                    cfg.waveform.subsymbols = value.parse().map_err(|_| bad("integer"))?
                }
                "waveform.ncp" => cfg.waveform.ncp = value.parse().map_err(|_| bad("integer"))?,
                "waveform.filter" => {
                    cfg.waveform.filter = match value.as_str() {
                        "rect" => PrototypeFilter::Rect,
                        "rrc" => PrototypeFilter::Rrc,
                        _ => return Err(bad("filter")),
                    }
                }
                "waveform.rolloff" => {
                    cfg.waveform.rolloff = value.parse().map_err(|_| bad("number"))?
                }
                "channel.profile" => {
                    profile_kind = match value.as_str() {
                        "uniform" => ProfileKind::Uniform,
                        "epa" => ProfileKind::EpaResampled,
                        _ => return Err(bad("profile")),
                    }
                }
                "channel.ntaps" => n_taps = value.parse().map_err(|_| bad("integer"))?,
                "sweep.start" => cfg.sweep.start = value.parse().map_err(|_| bad("number"))?,
                "sweep.stop" => cfg.sweep.stop = value.parse().map_err(|_| bad("number"))?,
                "sweep.step" => cfg.sweep.step = value.parse().map_err(|_| bad("number"))?,
                "data.train_symbols" => {
                    cfg.data.train_symbols = value.parse().map_err(|_| bad("integer"))?
                }
                "data.test_symbols" => {
                    cfg.data.test_symbols = value.parse().map_err(|_| bad("integer"))?
                }
                "train.lr" => cfg.train.lr = value.parse().map_err(|_| bad("number"))?,
                "train.epochs" => {
                    cfg.train.max_epochs = value.parse().map_err(|_| bad("integer"))?
                }
                "train.batch" => {
                    cfg.train.batch_size = value.parse().map_err(|_| bad("integer"))?
                }
                "train.dropout" => cfg.train.dropout = value.parse().map_err(|_| bad("number"))?,
                "train.patience" => {
                    cfg.train.patience = value.parse().map_err(|_| bad("integer"))?
                }
                "seed" => cfg.seed = value.parse().map_err(|_| bad("integer"))?,
                other => {
                    return Err(Error::Config(format!("line {lineno}: unknown key `{other}`")))
                }
            }
        }

        // rebuild the validated pieces from the overridden raw fields
        cfg.waveform = WaveformSpec::new(
            cfg.waveform.kind,
            cfg.waveform.subcarriers,
            cfg.waveform.subsymbols,
            cfg.waveform.filter,
            cfg.waveform.rolloff,
            cfg.waveform.ncp,
        )?;
        cfg.channel = ChannelProfile::from_kind(profile_kind, n_taps)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep.step <= 0.0 {
            return Err(Error::Config(format!(
                "sweep step must be positive, got {}",
                self.sweep.step
            )));
        }
        if self.sweep.stop < self.sweep.start {
            return Err(Error::Config("sweep stop before start".into()));
        }
        if self.data.train_symbols == 0 || self.data.test_symbols == 0 {
            return Err(Error::Config("need at least one symbol per role".into()));
        }
        if self.channel.n_taps > self.waveform.ncp + 1 {
            return Err(Error::Config(format!(
                "{} channel taps exceed the cyclic prefix + 1 ({}); the \
                 circular channel model would not hold",
                self.channel.n_taps,
                self.waveform.ncp + 1
            )));
        }
        self.train.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reproduction_dimensions() {
        let ofdm = ExperimentConfig::default_for(WaveformKind::Ofdm);
        assert_eq!(ofdm.waveform.subcarriers, 64);
        assert_eq!(ofdm.waveform.ncp, 16);
        assert_eq!(ofdm.data.train_symbols, 10_000);

        let gfdm = ExperimentConfig::default_for(WaveformKind::Gfdm);
        assert_eq!(gfdm.waveform.subcarriers, 32);
        assert_eq!(gfdm.waveform.subsymbols, 3);
        assert_eq!(gfdm.waveform.ncp, 24);
        assert_eq!(gfdm.channel.n_taps, 10);
        assert_eq!(gfdm.sweep.points().len(), 11);
    }

    #[test]
    fn parses_overrides_and_comments() {
        let text = "\
# reproduction run
waveform.kind = gfdm
sweep.start = 4   # trimmed inline comment
sweep.stop = 8
sweep.step = 2
train.lr = 0.001
channel.profile = epa
seed = 99
";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.waveform.subcarriers, 32);
        assert_eq!(cfg.sweep.points(), vec![4.0, 6.0, 8.0]);
        assert_eq!(cfg.train.lr, 0.001);
        assert_eq!(cfg.channel.kind, ProfileKind::EpaResampled);
        assert_eq!(cfg.seed, 99);
    }

    #[test]
    fn kind_applies_before_other_keys_regardless_of_order() {
        let cfg = ExperimentConfig::parse("waveform.K = 16\nwaveform.kind = gfdm\n").unwrap();
        assert_eq!(cfg.waveform.subcarriers, 16);
        assert_eq!(cfg.waveform.subsymbols, 3); // gfdm default M
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(
            ExperimentConfig::parse("waveform.bogus = 3\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("sweep.step = fast\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("just a line\n"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn rejects_channel_longer_than_cp() {
        let err = ExperimentConfig::parse("waveform.ncp = 4\nchannel.ntaps = 10\n");
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn grid_handles_fractional_steps() {
        let grid = SweepGrid {
            start: 0.0,
            stop: 1.0,
            step: 0.1,
        };
        assert_eq!(grid.points().len(), 11);
    }
}
