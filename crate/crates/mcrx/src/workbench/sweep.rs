//! BER sweeps over Eb/No for classical and neural receivers, plus the
//! transfer-learning experiment.
//!
//! One experiment draws a single channel realization from the master
//! seed and reuses it for every grid point (training and testing). Each
//! (purpose, grid point) pair owns a derived seed, so sweeps are fully
//! reproducible and train/test data never overlap.

use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::dataset::{gen_dataset, to_inputs, to_targets, DataRole, Dataset};
use super::seed::{derive_seed, ebno_millibels, rng_from_seed, stream};
use crate::channel::{draw_taps, ebno_to_sigma2};
use crate::error::{Error, Result};
use crate::linear_rx::{
    ber, detect, detector_matrix, zf_equalize, BerRecord, DetectorKind, RecordMeta,
};
use crate::neuralnet::{
    fine_tune, load_checkpoint, registry, save_checkpoint, train, ForwardMode, LayerSpec, Model,
    ModelSpec, TrainReport,
};
use crate::numerics::{CMat, CVec};
use crate::waveform::{build_mod_matrix, demap_symbols, ModMatrix};

/// Receiver label for neural records; the registry name goes in `model`.
pub const DEEP_RECEIVER_LABEL: &str = "deep";

/// The experiment's fixed channel draw.
pub fn experiment_channel(cfg: &ExperimentConfig) -> CVec {
    let mut rng = rng_from_seed(derive_seed(cfg.seed, stream::CHANNEL));
    draw_taps(&cfg.channel, &mut rng)
}

fn point_seed(master: u64, role: u64, ebno_db: f64) -> u64 {
    derive_seed(derive_seed(master, role), ebno_millibels(ebno_db) as u64)
}

/// Classical sweep over the configured receivers, one channel draw for
/// the whole grid.
pub fn run_classical_sweep(cfg: &ExperimentConfig) -> Result<Vec<BerRecord>> {
    let h = experiment_channel(cfg);
    run_classical_sweep_with_channel(cfg, &h)
}

/// Classical sweep over an explicitly supplied channel (tests use this
/// to pin, e.g., an identity channel).
pub fn run_classical_sweep_with_channel(
    cfg: &ExperimentConfig,
    h: &CVec,
) -> Result<Vec<BerRecord>> {
    let mm = build_mod_matrix(&cfg.waveform)?;
    let b_zf = detector_matrix(DetectorKind::Zf, &mm, 0.0)?;
    let b_mf = detector_matrix(DetectorKind::Mf, &mm, 0.0)?;
    let label = cfg.waveform.kind.label().to_string();

    let mut records = Vec::new();
    for ebno_db in cfg.sweep.points() {
        let ds = gen_dataset(cfg, &mm, ebno_db, DataRole::Test, h)?;
        let sigma2 = ebno_to_sigma2(ebno_db, cfg.waveform.bits_per_symbol);

        // ZF channel equalization is shared by zf, mf and mmse; a faded
        // bin flags those receivers without ending the sweep
        let equalized: std::result::Result<Vec<CVec>, Error> = ds
            .records
            .iter()
            .map(|r| zf_equalize(&r.received, h))
            .collect();

        for receiver in &cfg.receivers {
            let meta = RecordMeta {
                waveform: label.clone(),
                receiver: receiver.clone(),
                model: None,
                ebno_db,
                seed: ds.meta.seed,
            };
            // Err(message) marks the record instead of ending the sweep
            let outcome: std::result::Result<Vec<u8>, String> = match receiver.as_str() {
                "zf-noeq" => Ok(detect_all(&b_zf, ds.records.iter().map(|r| &r.received))?),
                "zf" | "mf" | "mmse" => match &equalized {
                    Ok(zs) => {
                        let b_owned;
                        let b = match receiver.as_str() {
                            "zf" => &b_zf,
                            "mf" => &b_mf,
                            _ => {
                                b_owned = detector_matrix(DetectorKind::Mmse, &mm, sigma2)?;
                                &b_owned
                            }
                        };
                        Ok(detect_all(b, zs.iter())?)
                    }
                    Err(e) => Err(e.to_string()),
                },
                other => {
                    return Err(Error::Config(format!("unknown receiver label `{other}`")))
                }
            };
            records.push(match outcome {
                Ok(bits_hat) => ber(&bits_hat, &ds.all_bits(), meta)?,
                Err(msg) => BerRecord {
                    waveform: meta.waveform,
                    receiver: meta.receiver,
                    model: meta.model,
                    ebno_db: meta.ebno_db,
                    n_bits: 0,
                    n_errors: 0,
                    seed: meta.seed,
                    error: Some(msg),
                },
            });
        }
    }
    Ok(records)
}

fn detect_all<'a>(
    b_mat: &CMat,
    observations: impl Iterator<Item = &'a CVec>,
) -> Result<Vec<u8>> {
    let mut bits = Vec::new();
    for z in observations {
        let d_hat = detect(b_mat, z)?;
        bits.extend(demap_symbols(&d_hat));
    }
    Ok(bits)
}

/// The registry spec for this experiment, with the configured dropout
/// rate stamped onto every dropout layer.
pub fn model_spec_for(cfg: &ExperimentConfig, model_name: &str) -> Result<ModelSpec> {
    let mut spec = registry(model_name, &cfg.waveform)?;
    for layer in &mut spec.layers {
        if let LayerSpec::Dropout { rate } = layer {
            *rate = cfg.train.dropout;
        }
    }
    Ok(spec)
}

/// Train one model at one grid point (per-point training data, derived
/// seeds for init and shuffling).
pub fn train_model_at(
    cfg: &ExperimentConfig,
    mm: &ModMatrix,
    model_name: &str,
    h: &CVec,
    ebno_db: f64,
) -> Result<(Model, TrainReport)> {
    let train_ds = gen_dataset(cfg, mm, ebno_db, DataRole::Train, h)?;
    let spec = model_spec_for(cfg, model_name)?;
    let inputs = to_inputs(&train_ds, &spec.input_shape)?;
    let targets = to_targets(&train_ds);
    let mut model = Model::init(spec, point_seed(cfg.seed, stream::MODEL_INIT, ebno_db))?;
    let mut tc = cfg.train;
    tc.seed = point_seed(cfg.seed, stream::TRAINING, ebno_db);
    let report = train(&mut model, &inputs, &targets, &tc)?;
    Ok((model, report))
}

/// Hard bit decisions from a model over a dataset: the first half of the
/// output vector estimates Re(d); Re >= 0 decides bit 0.
pub fn model_decisions(model: &Model, ds: &Dataset) -> Result<Vec<u8>> {
    let inputs = to_inputs(ds, &model.spec().input_shape)?;
    let n = ds.block_len();
    let n_rec = ds.records.len();
    let mut bits = Vec::with_capacity(n_rec * n);
    let all: Vec<usize> = (0..n_rec).collect();
    for chunk in all.chunks(256) {
        let bx = inputs.gather_rows(chunk);
        let pred = model.forward(&bx, ForwardMode::Eval)?;
        for row in 0..chunk.len() {
            let out = pred.sample(row);
            bits.extend(out[..n].iter().map(|&re| u8::from(re < 0.0)));
        }
    }
    Ok(bits)
}

/// BER of a model over a dataset.
pub fn evaluate_model(model: &Model, ds: &Dataset, waveform: &str) -> Result<BerRecord> {
    let bits_hat = model_decisions(model, ds)?;
    ber(
        &bits_hat,
        &ds.all_bits(),
        RecordMeta {
            waveform: waveform.to_string(),
            receiver: DEEP_RECEIVER_LABEL.to_string(),
            model: Some(model.spec().name.clone()),
            ebno_db: ds.meta.ebno_db,
            seed: ds.meta.seed,
        },
    )
}

/// Neural sweep: per grid point, train a fresh model on that point's
/// training data, evaluate on independent test data, and (optionally)
/// persist a checkpoint. A non-finite training loss yields a diagnostic
/// record instead of aborting the sweep.
pub fn run_neural_sweep(
    cfg: &ExperimentConfig,
    model_name: &str,
    out_dir: Option<&Path>,
) -> Result<Vec<BerRecord>> {
    let h = experiment_channel(cfg);
    run_neural_sweep_with_channel(cfg, model_name, &h, out_dir)
}

pub fn run_neural_sweep_with_channel(
    cfg: &ExperimentConfig,
    model_name: &str,
    h: &CVec,
    out_dir: Option<&Path>,
) -> Result<Vec<BerRecord>> {
    registry(model_name, &cfg.waveform)?; // fail fast on unknown names
    let mm = build_mod_matrix(&cfg.waveform)?;
    let label = cfg.waveform.kind.label().to_string();

    let mut records = Vec::new();
    for ebno_db in cfg.sweep.points() {
        match train_model_at(cfg, &mm, model_name, h, ebno_db) {
            Ok((model, _report)) => {
                let test_ds = gen_dataset(cfg, &mm, ebno_db, DataRole::Test, h)?;
                records.push(evaluate_model(&model, &test_ds, &label)?);
                if let Some(dir) = out_dir {
                    save_checkpoint(&model, &checkpoint_path(dir, model_name, &label, ebno_db))?;
                }
            }
            Err(Error::NonFiniteLoss { epoch, batch }) => records.push(BerRecord {
                waveform: label.clone(),
                receiver: DEEP_RECEIVER_LABEL.to_string(),
                model: Some(model_name.to_string()),
                ebno_db,
                n_bits: 0,
                n_errors: 0,
                seed: point_seed(cfg.seed, stream::TRAINING, ebno_db),
                error: Some(format!("non-finite loss at epoch {epoch}, batch {batch}")),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(records)
}

pub fn checkpoint_path(dir: &Path, model_name: &str, waveform: &str, ebno_db: f64) -> PathBuf {
    dir.join(format!("{model_name}-{waveform}-{ebno_db}dB.mcnn"))
}

/// Outcome of a transfer-learning run: the stale model on a redrawn
/// channel, the same weights after a short fine-tune, and a full retrain
/// for reference.
#[derive(Debug, Clone)]
pub struct TransferReport {
    pub model: String,
    pub ebno_db: f64,
    pub stale_ber: f64,
    pub finetuned_ber: f64,
    pub fullretrain_ber: f64,
    pub redraw_seed: u64,
}

/// Redraw the channel, measure the checkpointed model as-is, fine-tune it
/// for `finetune_epochs` on new-channel training data, and retrain from
/// scratch for comparison.
///
/// `redraw_seed` defaults to a derivation from the master seed; passing
/// the master seed itself reproduces the original channel (control case).
pub fn run_transfer_experiment(
    cfg: &ExperimentConfig,
    model_name: &str,
    checkpoint: &Path,
    ebno_db: f64,
    finetune_epochs: usize,
    redraw_seed: Option<u64>,
) -> Result<TransferReport> {
    let model = load_checkpoint(checkpoint)?;
    if model.spec().name != model_name {
        return Err(Error::Config(format!(
            "checkpoint holds `{}`, expected `{model_name}`",
            model.spec().name
        )));
    }
    if model.spec().output_dim != 2 * cfg.waveform.block_len() {
        return Err(Error::Config(format!(
            "checkpoint block length {} does not match waveform N={}",
            model.spec().output_dim / 2,
            cfg.waveform.block_len()
        )));
    }

    let mut cfg2 = cfg.clone();
    cfg2.seed = redraw_seed.unwrap_or_else(|| derive_seed(cfg.seed, stream::CHANNEL_REDRAW));
    let h2 = experiment_channel(&cfg2);
    let mm = build_mod_matrix(&cfg2.waveform)?;
    let label = cfg2.waveform.kind.label().to_string();

    let test2 = gen_dataset(&cfg2, &mm, ebno_db, DataRole::Test, &h2)?;
    let stale_ber = evaluate_model(&model, &test2, &label)?.ber();

    let train2 = gen_dataset(&cfg2, &mm, ebno_db, DataRole::Train, &h2)?;
    let inputs = to_inputs(&train2, &model.spec().input_shape)?;
    let targets = to_targets(&train2);
    let mut tuned = model.clone();
    let mut tc = cfg2.train;
    tc.seed = point_seed(cfg2.seed, stream::TRAINING, ebno_db);
    fine_tune(&mut tuned, &inputs, &targets, finetune_epochs, &tc)?;
    let finetuned_ber = evaluate_model(&tuned, &test2, &label)?.ber();

    let (fresh, _) = train_model_at(&cfg2, &mm, model_name, &h2, ebno_db)?;
    let fullretrain_ber = evaluate_model(&fresh, &test2, &label)?.ber();

    Ok(TransferReport {
        model: model_name.to_string(),
        ebno_db,
        stale_ber,
        finetuned_ber,
        fullretrain_ber,
        redraw_seed: cfg2.seed,
    })
}
