//! Mini-batch Adam training with a validation split and early stopping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{ForwardMode, Model, Tensor};
use crate::error::{Error, Result};

/// Training hyperparameters.
///
/// `dropout` is the rate stamped onto the dropout layers of registry
/// models by the experiment harness; the loop itself applies whatever
/// rates the layer specs carry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub patience: usize,
    pub min_delta: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            max_epochs: 30,
            batch_size: 64,
            dropout: 0.1,
            patience: 3,
            min_delta: 1e-5,
            val_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr <= 0.0
            || self.max_epochs == 0
            || self.batch_size == 0
            || self.patience == 0
            || self.min_delta <= 0.0
        {
            return Err(Error::Config(
                "training parameters must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} outside [0,1)",
                self.dropout
            )));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Config(format!(
                "val_fraction {} outside (0,1)",
                self.val_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub history: Vec<EpochStats>,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

/// Train with shuffled mini-batches, holding out `val_fraction` of the
/// data for the early-stopping criterion. The model keeps the weights of
/// the best validation epoch.
pub fn train(
    model: &mut Model,
    inputs: &Tensor,
    targets: &Tensor,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    let n = inputs.batch();
    if targets.batch() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} input rows vs {} target rows",
            n,
            targets.batch()
        )));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    // a single sample serves as both halves rather than failing outright
    let val_n = (((n as f64) * cfg.val_fraction).round() as usize).clamp(1, (n - 1).max(1));
    let (val_idx, train_idx) = if n == 1 {
        (vec![0usize], vec![0usize])
    } else {
        let (v, t) = order.split_at(val_n);
        (v.to_vec(), t.to_vec())
    };

    let val_in = inputs.gather_rows(&val_idx);
    let val_tg = targets.gather_rows(&val_idx);
    let mut train_order = train_idx;

    let mut history = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_params = model.params().to_vec();
    let mut stall = 0usize;
    let mut stopped_early = false;

    for epoch in 0..cfg.max_epochs {
        train_order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (batch_no, chunk) in train_order.chunks(cfg.batch_size).enumerate() {
            let bx = inputs.gather_rows(chunk);
            let bt = targets.gather_rows(chunk);
            let (loss, grads) = model.backward(&bx, &bt, ForwardMode::Train(&mut rng))?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_no,
                });
            }
            model.adam_step(&grads, cfg.lr);
            loss_sum += loss * chunk.len() as f64;
        }
        let train_loss = loss_sum / train_order.len() as f64;
        let val_loss = eval_loss(model, &val_in, &val_tg, cfg.batch_size)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: 0 });
        }
        history.push(EpochStats {
            train_loss,
            val_loss,
        });

        if best_val - val_loss > cfg.min_delta {
            best_val = val_loss;
            best_params.copy_from_slice(model.params());
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }

    model.params_mut().copy_from_slice(&best_params);
    Ok(TrainReport {
        history,
        best_val_loss: best_val,
        stopped_early,
    })
}

/// Continue training for a fixed epoch budget with a fresh Adam state:
/// no validation split, no early stopping. Returns per-epoch train loss.
pub fn fine_tune(
    model: &mut Model,
    inputs: &Tensor,
    targets: &Tensor,
    epochs: usize,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    let n = inputs.batch();
    if targets.batch() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} input rows vs {} target rows",
            n,
            targets.batch()
        )));
    }
    model.reset_adam();
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut losses = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (batch_no, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let bx = inputs.gather_rows(chunk);
            let bt = targets.gather_rows(chunk);
            let (loss, grads) = model.backward(&bx, &bt, ForwardMode::Train(&mut rng))?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_no,
                });
            }
            model.adam_step(&grads, cfg.lr);
            loss_sum += loss * chunk.len() as f64;
        }
        losses.push(loss_sum / n as f64);
    }
    Ok(losses)
}

/// Mean loss over a dataset in eval mode, chunked to bound memory.
pub fn eval_loss(
    model: &Model,
    inputs: &Tensor,
    targets: &Tensor,
    chunk_size: usize,
) -> Result<f64> {
    let n = inputs.batch();
    let all: Vec<usize> = (0..n).collect();
    let mut loss_sum = 0.0;
    for chunk in all.chunks(chunk_size) {
        let bx = inputs.gather_rows(chunk);
        let bt = targets.gather_rows(chunk);
        let pred = model.forward(&bx, ForwardMode::Eval)?;
        let (loss, _) = super::mse_loss(&pred, &bt)?;
        loss_sum += loss * chunk.len() as f64;
    }
    Ok(loss_sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::{registry, Activation, LayerSpec, ModelSpec};
    use crate::waveform::WaveformSpec;

    /// Four orthogonal patterns repeated 25 times: trivially memorizable.
    fn memorizable_dataset() -> (Tensor, Tensor) {
        let mut xs = Vec::new();
        let mut ts = Vec::new();
        let patterns = [
            ([1.0, 0.0, 0.0, 0.0], [0.5, -0.5]),
            ([0.0, 1.0, 0.0, 0.0], [-0.5, 0.5]),
            ([0.0, 0.0, 1.0, 0.0], [0.5, 0.5]),
            ([0.0, 0.0, 0.0, 1.0], [-0.5, -0.5]),
        ];
        for i in 0..100 {
            let (x, t) = patterns[i % 4];
            xs.extend_from_slice(&x);
            ts.extend_from_slice(&t);
        }
        (
            Tensor::new(vec![100, 4], xs).unwrap(),
            Tensor::new(vec![100, 2], ts).unwrap(),
        )
    }

    fn small_spec() -> ModelSpec {
        ModelSpec {
            name: "t".into(),
            waveform: "ofdm".into(),
            input_shape: vec![4],
            layers: vec![
                LayerSpec::Dense {
                    units: 16,
                    activation: Activation::Relu,
                },
                LayerSpec::Dense {
                    units: 2,
                    activation: Activation::Tanh,
                },
            ],
            output_dim: 2,
        }
    }

    #[test]
    fn memorizes_small_noiseless_dataset() {
        let (x, t) = memorizable_dataset();
        let mut model = Model::init(small_spec(), 1).unwrap();
        let cfg = TrainConfig {
            lr: 0.01,
            max_epochs: 300,
            patience: 300,
            seed: 2,
            ..TrainConfig::default()
        };
        let report = train(&mut model, &x, &t, &cfg).unwrap();
        let last = report.history.last().unwrap();
        assert!(
            last.train_loss < 1e-3,
            "train loss stuck at {}",
            last.train_loss
        );
    }

    #[test]
    fn history_respects_epoch_cap() {
        let (x, t) = memorizable_dataset();
        let mut model = Model::init(small_spec(), 3).unwrap();
        let cfg = TrainConfig {
            lr: 1e-4,
            seed: 4,
            ..TrainConfig::default()
        };
        let report = train(&mut model, &x, &t, &cfg).unwrap();
        assert!(report.history.len() <= 30);
        assert!(!report.history.is_empty());
    }

    #[test]
    fn training_is_bit_deterministic() {
        let (x, t) = memorizable_dataset();
        let cfg = TrainConfig {
            lr: 0.003,
            max_epochs: 10,
            patience: 10,
            seed: 5,
            ..TrainConfig::default()
        };
        let mut m1 = Model::init(small_spec(), 6).unwrap();
        let r1 = train(&mut m1, &x, &t, &cfg).unwrap();
        let mut m2 = Model::init(small_spec(), 6).unwrap();
        let r2 = train(&mut m2, &x, &t, &cfg).unwrap();

        assert_eq!(m1.params(), m2.params());
        assert_eq!(r1.history.len(), r2.history.len());
        for (a, b) in r1.history.iter().zip(&r2.history) {
            assert_eq!(a.train_loss.to_bits(), b.train_loss.to_bits());
            assert_eq!(a.val_loss.to_bits(), b.val_loss.to_bits());
        }
    }

    #[test]
    fn early_stopping_restores_best_weights() {
        let (x, t) = memorizable_dataset();
        let mut model = Model::init(small_spec(), 7).unwrap();
        let cfg = TrainConfig {
            lr: 0.05, // aggressive on purpose so validation loss bounces
            max_epochs: 30,
            patience: 2,
            seed: 8,
            ..TrainConfig::default()
        };
        let report = train(&mut model, &x, &t, &cfg).unwrap();
        let min_val = report
            .history
            .iter()
            .map(|e| e.val_loss)
            .fold(f64::INFINITY, f64::min);
        assert!((report.best_val_loss - min_val).abs() < 1e-15);
    }

    #[test]
    fn fine_tune_zero_epochs_is_identity() {
        let (x, t) = memorizable_dataset();
        let mut model = Model::init(small_spec(), 9).unwrap();
        let before = model.params().to_vec();
        let losses = fine_tune(&mut model, &x, &t, 0, &TrainConfig::default()).unwrap();
        assert!(losses.is_empty());
        assert_eq!(model.params(), &before[..]);
    }

    #[test]
    fn fine_tune_restarts_adam_and_updates() {
        let (x, t) = memorizable_dataset();
        let mut model = Model::init(small_spec(), 10).unwrap();
        let cfg = TrainConfig {
            lr: 0.01,
            max_epochs: 5,
            patience: 5,
            seed: 11,
            ..TrainConfig::default()
        };
        train(&mut model, &x, &t, &cfg).unwrap();
        let before = model.params().to_vec();

        let losses = fine_tune(&mut model, &x, &t, 2, &cfg).unwrap();
        assert_eq!(losses.len(), 2);
        assert_ne!(model.params(), &before[..]);
        // fresh optimizer state: step counter counts only fine-tune batches
        let batches_per_epoch = 100usize.div_ceil(cfg.batch_size);
        assert_eq!(model.adam_state().2, (2 * batches_per_epoch) as u64);
    }

    #[test]
    fn non_finite_loss_aborts_with_diagnostics() {
        let spec = ModelSpec {
            name: "t".into(),
            waveform: "ofdm".into(),
            input_shape: vec![2],
            layers: vec![LayerSpec::Dense {
                units: 1,
                activation: Activation::Linear,
            }],
            output_dim: 1,
        };
        let mut model = Model::zeroed(spec).unwrap();
        model.params_mut()[0] = 1e200;
        model.params_mut()[1] = 1e200;
        let x = Tensor::new(vec![4, 2], vec![1.0; 8]).unwrap();
        let t = Tensor::new(vec![4, 1], vec![0.0; 4]).unwrap();
        let cfg = TrainConfig {
            seed: 12,
            ..TrainConfig::default()
        };
        match train(&mut model, &x, &t, &cfg) {
            Err(Error::NonFiniteLoss { .. }) => {}
            other => panic!("expected NonFiniteLoss, got {other:?}"),
        }
    }

    #[test]
    fn registry_param_vector_lengths_match_count() {
        use crate::neuralnet::{count_params, registry_names};
        for wf in [WaveformSpec::ofdm_default(), WaveformSpec::gfdm_default()] {
            for name in registry_names() {
                let spec = registry(&name, &wf).unwrap();
                let model = Model::init(spec.clone(), 13).unwrap();
                assert_eq!(
                    model.n_params(),
                    count_params(&spec),
                    "{name} on {}",
                    wf.kind.label()
                );
            }
        }
    }
}
