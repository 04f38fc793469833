//! From-scratch neural-network engine for the deep receiver: dense and
//! convolutional layers, inverted dropout, MSE loss, Adam, a training
//! loop with early stopping, and binary checkpoints.
//!
//! The model registry defines the canonical families compared in the
//! workbench: `mlp-2` .. `mlp-5`, `conv1d-2p1` .. `conv1d-5p1` and
//! `conv2d-2p1` .. `conv2d-5p1`, where `L+1` means L convolutional layers
//! followed by one fully connected output layer. Inputs are the received
//! block split into real and imaginary parts: a flat [Re; Im] vector of
//! length 2N for MLPs and 1D CNNs, an N-by-2 single-channel image for 2D
//! CNNs. The output layer is always Dense(2N) with tanh.

mod checkpoint;
mod model;
mod tensor;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use model::{mse_loss, ForwardMode, Model, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use tensor::Tensor;
pub use train::{fine_tune, train, EpochStats, TrainConfig, TrainReport};

use crate::error::{Error, Result};
use crate::waveform::WaveformSpec;

/// Dropout rate used by every registry model.
pub const REGISTRY_DROPOUT: f64 = 0.1;

/// Hidden widths for the MLP family, first `L` taken for `mlp-L`.
const MLP_WIDTHS: [usize; 5] = [256, 128, 64, 32, 16];

/// Filter counts for the conv families: the first `L-1` of these, then a
/// final 8-filter layer.
const CONV_WIDTHS: [usize; 4] = [16, 32, 64, 128];

/// Filters in the last convolutional layer of every conv model.
const FINAL_CONV_FILTERS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Linear,
}

impl Activation {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the activation output.
    pub fn derivative_from_output(&self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Linear => 1.0,
        }
    }
}

/// One layer of a model. Convolutions are stride-1 with length-preserving
/// (same) padding throughout.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Dense {
        units: usize,
        activation: Activation,
    },
    Conv1d {
        filters: usize,
        kernel: usize,
        activation: Activation,
    },
    Conv2d {
        filters: usize,
        kernel: (usize, usize),
        activation: Activation,
    },
    Flatten,
    Dropout {
        rate: f64,
    },
}

/// A layer graph plus its input/output contract.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    /// registry label, e.g. "conv2d-2p1"
    pub name: String,
    /// waveform family the model was built for ("ofdm"/"gfdm")
    pub waveform: String,
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    pub output_dim: usize,
}

impl ModelSpec {
    /// Checks the output-layer contract: Dense(output_dim) with tanh.
    pub fn validate(&self) -> Result<()> {
        match self.layers.last() {
            Some(LayerSpec::Dense {
                units,
                activation: Activation::Tanh,
            }) if *units == self.output_dim => Ok(()),
            _ => Err(Error::Config(format!(
                "model `{}`: output layer must be Dense({}) with tanh",
                self.name, self.output_dim
            ))),
        }
    }
}

/// All registry model names.
pub fn registry_names() -> Vec<String> {
    let mut names = Vec::new();
    for l in 2..=5 {
        names.push(format!("mlp-{l}"));
    }
    for l in 2..=5 {
        names.push(format!("conv1d-{l}p1"));
    }
    for l in 2..=5 {
        names.push(format!("conv2d-{l}p1"));
    }
    names
}

/// Canonical model spec for a registry name and waveform.
pub fn registry(name: &str, waveform: &WaveformSpec) -> Result<ModelSpec> {
    registry_for_block(name, waveform.block_len(), waveform.kind.label())
}

/// Registry lookup from the block length alone (checkpoints restore
/// through this path).
pub fn registry_for_block(name: &str, block_len: usize, waveform: &str) -> Result<ModelSpec> {
    let out_dim = 2 * block_len;
    let (family, depth) = parse_name(name).ok_or_else(|| Error::UnknownModel(name.to_string()))?;

    let mut layers = Vec::new();
    let input_shape = match family {
        Family::Mlp => {
            for &width in &MLP_WIDTHS[..depth] {
                layers.push(LayerSpec::Dense {
                    units: width,
                    activation: Activation::Relu,
                });
                layers.push(LayerSpec::Dropout {
                    rate: REGISTRY_DROPOUT,
                });
            }
            vec![out_dim]
        }
        Family::Conv1d => {
            for &filters in conv_filters(depth) {
                layers.push(LayerSpec::Conv1d {
                    filters,
                    kernel: 3,
                    activation: Activation::Relu,
                });
                layers.push(LayerSpec::Dropout {
                    rate: REGISTRY_DROPOUT,
                });
            }
            layers.push(LayerSpec::Flatten);
            vec![out_dim, 1]
        }
        Family::Conv2d => {
            for &filters in conv_filters(depth) {
                layers.push(LayerSpec::Conv2d {
                    filters,
                    kernel: (3, 2),
                    activation: Activation::Relu,
                });
                layers.push(LayerSpec::Dropout {
                    rate: REGISTRY_DROPOUT,
                });
            }
            layers.push(LayerSpec::Flatten);
            vec![block_len, 2, 1]
        }
    };
    layers.push(LayerSpec::Dense {
        units: out_dim,
        activation: Activation::Tanh,
    });

    let spec = ModelSpec {
        name: name.to_string(),
        waveform: waveform.to_string(),
        input_shape,
        layers,
        output_dim: out_dim,
    };
    spec.validate()?;
    Ok(spec)
}

enum Family {
    Mlp,
    Conv1d,
    Conv2d,
}

fn parse_name(name: &str) -> Option<(Family, usize)> {
    if let Some(rest) = name.strip_prefix("mlp-") {
        let depth: usize = rest.parse().ok()?;
        if (2..=5).contains(&depth) {
            return Some((Family::Mlp, depth));
        }
    }
    for (prefix, family) in [("conv1d-", Family::Conv1d), ("conv2d-", Family::Conv2d)] {
        if let Some(rest) = name.strip_prefix(prefix) {
            let depth: usize = rest.strip_suffix("p1")?.parse().ok()?;
            if (2..=5).contains(&depth) {
                return Some((family, depth));
            }
        }
    }
    None
}

/// Filter counts for a conv model of the given total depth: the ramp
/// 16, 32, ... truncated to depth-1 layers, then the 8-filter head.
fn conv_filters(depth: usize) -> Vec<&'static usize> {
    CONV_WIDTHS[..depth - 1]
        .iter()
        .chain(std::iter::once(&FINAL_CONV_FILTERS))
        .collect()
}

/// Trainable parameter count, walking the layer graph analytically:
/// Dense (n_in+1)*n_out, Conv1D (k*c_in+1)*c_out, Conv2D
/// (kh*kw*c_in+1)*c_out, everything else zero.
pub fn count_params(spec: &ModelSpec) -> usize {
    let mut shape = spec.input_shape.clone();
    let mut total = 0usize;
    for layer in &spec.layers {
        match layer {
            LayerSpec::Dense { units, .. } => {
                let n_in: usize = shape.iter().product();
                total += (n_in + 1) * units;
                shape = vec![*units];
            }
            LayerSpec::Conv1d {
                filters, kernel, ..
            } => {
                let c_in = shape[1];
                total += (kernel * c_in + 1) * filters;
                shape = vec![shape[0], *filters];
            }
            LayerSpec::Conv2d {
                filters,
                kernel: (kh, kw),
                ..
            } => {
                let c_in = shape[2];
                total += (kh * kw * c_in + 1) * filters;
                shape = vec![shape[0], shape[1], *filters];
            }
            LayerSpec::Flatten => {
                shape = vec![shape.iter().product()];
            }
            LayerSpec::Dropout { .. } => {}
        }
    }
    total
}

/// Per-layer parameter breakdown as (description, count) pairs.
pub fn param_breakdown(spec: &ModelSpec) -> Vec<(String, usize)> {
    let mut shape = spec.input_shape.clone();
    let mut rows = Vec::new();
    for layer in &spec.layers {
        match layer {
            LayerSpec::Dense { units, .. } => {
                let n_in: usize = shape.iter().product();
                rows.push((format!("dense {n_in}->{units}"), (n_in + 1) * units));
                shape = vec![*units];
            }
            LayerSpec::Conv1d {
                filters, kernel, ..
            } => {
                let c_in = shape[1];
                rows.push((
                    format!("conv1d k{kernel} {c_in}->{filters}"),
                    (kernel * c_in + 1) * filters,
                ));
                shape = vec![shape[0], *filters];
            }
            LayerSpec::Conv2d {
                filters,
                kernel: (kh, kw),
                ..
            } => {
                let c_in = shape[2];
                rows.push((
                    format!("conv2d k{kh}x{kw} {c_in}->{filters}"),
                    (kh * kw * c_in + 1) * filters,
                ));
                shape = vec![shape[0], shape[1], *filters];
            }
            LayerSpec::Flatten => {
                shape = vec![shape.iter().product()];
            }
            LayerSpec::Dropout { .. } => {}
        }
    }
    rows
}

/// Previously reported parameter totals for the registry names, by
/// waveform. These published figures do not match any architecture this
/// registry can express (the originals are underdetermined); they are
/// surfaced by `params --explain` for comparison and never reconciled
/// silently.
pub fn reported_param_count(name: &str, waveform: &str) -> Option<u64> {
    let idx = match waveform {
        "ofdm" => 0,
        "gfdm" => 1,
        _ => return None,
    };
    let pair: [u64; 2] = match name {
        "conv1d-2p1" => [132_832, 296_736],
        "conv1d-3p1" => [139_040, 302_944],
        "conv1d-4p1" => [163_744, 327_648],
        "conv1d-5p1" => [262_304, 426_208],
        "conv2d-2p1" => [134_416, 298_320],
        "conv2d-3p1" => [146_768, 310_672],
        "conv2d-4p1" => [196_048, 359_952],
        "conv2d-5p1" => [392_912, 556_816],
        "mlp-2" => [2_130_688, 4_752_192],
        "mlp-3" => [1_090_368, 2_401_152],
        "mlp-4" => [568_160, 1_223_584],
        "mlp-5" => [306_544, 634_288],
        _ => return None,
    };
    Some(pair[idx])
}
