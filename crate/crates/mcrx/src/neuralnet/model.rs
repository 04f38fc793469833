//! Parameter storage, forward/backward evaluation and the Adam update.
//!
//! Parameters live in one flat vector with per-layer offsets (weights
//! first, then biases), which keeps the optimizer and checkpoint I/O
//! trivial. Backward runs a cached forward pass and accumulates exact
//! gradients of the MSE loss; a dropout mask drawn in the forward pass
//! stays fixed for the paired backward pass.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{count_params, Activation, LayerSpec, ModelSpec, Tensor};
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Whether a forward pass applies dropout (training) or is deterministic
/// (evaluation). Training mode carries the RNG the masks are drawn from.
pub enum ForwardMode<'a> {
    Eval,
    Train(&'a mut ChaCha20Rng),
}

/// Resolved layer geometry: shapes and parameter offsets.
#[derive(Debug, Clone)]
enum LayerPlan {
    Dense {
        n_in: usize,
        n_out: usize,
        w_off: usize,
        b_off: usize,
        act: Activation,
    },
    Conv1d {
        len: usize,
        c_in: usize,
        c_out: usize,
        k: usize,
        w_off: usize,
        b_off: usize,
        act: Activation,
    },
    Conv2d {
        h: usize,
        w: usize,
        c_in: usize,
        c_out: usize,
        kh: usize,
        kw: usize,
        w_off: usize,
        b_off: usize,
        act: Activation,
    },
    Flatten,
    Dropout {
        rate: f64,
    },
}

fn build_plan(spec: &ModelSpec) -> Result<Vec<LayerPlan>> {
    let mut shape = spec.input_shape.clone();
    let mut offset = 0usize;
    let mut plan = Vec::with_capacity(spec.layers.len());
    for layer in &spec.layers {
        match layer {
            LayerSpec::Dense { units, activation } => {
                let n_in: usize = shape.iter().product();
                plan.push(LayerPlan::Dense {
                    n_in,
                    n_out: *units,
                    w_off: offset,
                    b_off: offset + n_in * units,
                    act: *activation,
                });
                offset += (n_in + 1) * units;
                shape = vec![*units];
            }
            LayerSpec::Conv1d {
                filters,
                kernel,
                activation,
            } => {
                if shape.len() != 2 {
                    return Err(Error::Config(format!(
                        "conv1d needs a [len, channels] input, got {shape:?}"
                    )));
                }
                let (len, c_in) = (shape[0], shape[1]);
                plan.push(LayerPlan::Conv1d {
                    len,
                    c_in,
                    c_out: *filters,
                    k: *kernel,
                    w_off: offset,
                    b_off: offset + kernel * c_in * filters,
                    act: *activation,
                });
                offset += (kernel * c_in + 1) * filters;
                shape = vec![len, *filters];
            }
            LayerSpec::Conv2d {
                filters,
                kernel: (kh, kw),
                activation,
            } => {
                if shape.len() != 3 {
                    return Err(Error::Config(format!(
                        "conv2d needs a [h, w, channels] input, got {shape:?}"
                    )));
                }
                let (h, w, c_in) = (shape[0], shape[1], shape[2]);
                plan.push(LayerPlan::Conv2d {
                    h,
                    w,
                    c_in,
                    c_out: *filters,
                    kh: *kh,
                    kw: *kw,
                    w_off: offset,
                    b_off: offset + kh * kw * c_in * filters,
                    act: *activation,
                });
                offset += (kh * kw * c_in + 1) * filters;
                shape = vec![h, w, *filters];
            }
            LayerSpec::Flatten => {
                plan.push(LayerPlan::Flatten);
                shape = vec![shape.iter().product()];
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(rate) {
                    return Err(Error::Config(format!("dropout rate {rate} outside [0,1)")));
                }
                plan.push(LayerPlan::Dropout { rate: *rate });
            }
        }
    }
    let final_dim: usize = shape.iter().product();
    if final_dim != spec.output_dim {
        return Err(Error::Config(format!(
            "model `{}` produces {final_dim} outputs, expected {}",
            spec.name, spec.output_dim
        )));
    }
    debug_assert_eq!(offset, count_params(spec));
    Ok(plan)
}

/// A model: spec, flat parameter vector, and Adam state.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    plan: Vec<LayerPlan>,
    params: Vec<f64>,
    adam_m: Vec<f64>,
    adam_v: Vec<f64>,
    adam_t: u64,
}

impl Model {
    /// Glorot-style uniform initialization (seeded), biases zero.
    pub fn init(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut model = Self::zeroed(spec)?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        for layer in &model.plan {
            let (w_off, w_len, fan_in, fan_out) = match layer {
                LayerPlan::Dense {
                    n_in, n_out, w_off, ..
                } => (*w_off, n_in * n_out, *n_in, *n_out),
                LayerPlan::Conv1d {
                    c_in,
                    c_out,
                    k,
                    w_off,
                    ..
                } => (*w_off, k * c_in * c_out, k * c_in, k * c_out),
                LayerPlan::Conv2d {
                    c_in,
                    c_out,
                    kh,
                    kw,
                    w_off,
                    ..
                } => (
                    *w_off,
                    kh * kw * c_in * c_out,
                    kh * kw * c_in,
                    kh * kw * c_out,
                ),
                _ => continue,
            };
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in &mut model.params[w_off..w_off + w_len] {
                *w = (rng.random::<f64>() * 2.0 - 1.0) * limit;
            }
        }
        Ok(model)
    }

    /// All parameters zero; mostly useful in tests.
    pub fn zeroed(spec: ModelSpec) -> Result<Self> {
        let plan = build_plan(&spec)?;
        let n = count_params(&spec);
        Ok(Self {
            spec,
            plan,
            params: vec![0.0; n],
            adam_m: vec![0.0; n],
            adam_v: vec![0.0; n],
            adam_t: 0,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn adam_state(&self) -> (&[f64], &[f64], u64) {
        (&self.adam_m, &self.adam_v, self.adam_t)
    }

    pub(crate) fn set_adam_state(&mut self, m: Vec<f64>, v: Vec<f64>, t: u64) {
        debug_assert_eq!(m.len(), self.params.len());
        debug_assert_eq!(v.len(), self.params.len());
        self.adam_m = m;
        self.adam_v = v;
        self.adam_t = t;
    }

    /// Drop all optimizer memory (used when fine-tuning starts afresh).
    pub fn reset_adam(&mut self) {
        self.adam_m.iter_mut().for_each(|x| *x = 0.0);
        self.adam_v.iter_mut().for_each(|x| *x = 0.0);
        self.adam_t = 0;
    }

    fn check_batch(&self, batch: &Tensor) -> Result<()> {
        if batch.shape().len() != self.spec.input_shape.len() + 1
            || batch.shape()[1..] != self.spec.input_shape[..]
        {
            return Err(Error::DimensionMismatch(format!(
                "model `{}` expects input {:?}, got batch {:?}",
                self.spec.name,
                self.spec.input_shape,
                batch.shape()
            )));
        }
        Ok(())
    }

    /// Layer-by-layer evaluation. Dropout is inverted (surviving
    /// activations scaled by 1/(1-p)) and active only in training mode.
    pub fn forward(&self, batch: &Tensor, mode: ForwardMode) -> Result<Tensor> {
        self.check_batch(batch)?;
        let cache = self.run_forward(batch, mode);
        let out = cache.outs.into_iter().next_back().unwrap();
        Ok(Tensor::from_parts(
            vec![batch.batch(), self.spec.output_dim],
            out,
        ))
    }

    /// Exact gradient of the batch-mean MSE loss with respect to every
    /// parameter. Returns (loss, gradient vector).
    pub fn backward(
        &self,
        batch: &Tensor,
        target: &Tensor,
        mode: ForwardMode,
    ) -> Result<(f64, Vec<f64>)> {
        self.check_batch(batch)?;
        let n_batch = batch.batch();
        if target.batch() != n_batch || target.sample_len() != self.spec.output_dim {
            return Err(Error::DimensionMismatch(format!(
                "target shape {:?} does not match batch {} x {}",
                target.shape(),
                n_batch,
                self.spec.output_dim
            )));
        }

        let cache = self.run_forward(batch, mode);
        let pred = cache.outs.last().unwrap();
        let scale = 2.0 / (self.spec.output_dim * n_batch) as f64;
        let mut loss = 0.0;
        let mut dy: Vec<f64> = pred
            .iter()
            .zip(target.as_slice())
            .map(|(p, t)| {
                let d = p - t;
                loss += d * d;
                scale * d
            })
            .collect();
        loss /= (self.spec.output_dim * n_batch) as f64;

        let mut grads = vec![0.0; self.params.len()];
        for (idx, layer) in self.plan.iter().enumerate().rev() {
            dy = self.backward_layer(layer, idx, &cache, n_batch, dy, &mut grads);
        }
        Ok((loss, grads))
    }

    /// Standard Adam with bias-corrected moments.
    pub fn adam_step(&mut self, grads: &[f64], lr: f64) {
        assert_eq!(grads.len(), self.params.len());
        self.adam_t += 1;
        let t = self.adam_t as i32;
        let m_corr = 1.0 - ADAM_BETA1.powi(t);
        let v_corr = 1.0 - ADAM_BETA2.powi(t);
        for i in 0..self.params.len() {
            let g = grads[i];
            self.adam_m[i] = ADAM_BETA1 * self.adam_m[i] + (1.0 - ADAM_BETA1) * g;
            self.adam_v[i] = ADAM_BETA2 * self.adam_v[i] + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = self.adam_m[i] / m_corr;
            let v_hat = self.adam_v[i] / v_corr;
            self.params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }

    fn run_forward(&self, batch: &Tensor, mut mode: ForwardMode) -> Cache {
        let n_batch = batch.batch();
        let mut outs: Vec<Vec<f64>> = Vec::with_capacity(self.plan.len() + 1);
        outs.push(batch.as_slice().to_vec());
        let mut masks: Vec<Option<Vec<f64>>> = Vec::with_capacity(self.plan.len());

        for layer in &self.plan {
            let x = outs.last().unwrap();
            let (out, mask) = match layer {
                LayerPlan::Dense {
                    n_in,
                    n_out,
                    w_off,
                    b_off,
                    act,
                } => {
                    let w = &self.params[*w_off..w_off + n_in * n_out];
                    let b = &self.params[*b_off..b_off + n_out];
                    let mut out = vec![0.0; n_batch * n_out];
                    for bi in 0..n_batch {
                        let x_row = &x[bi * n_in..(bi + 1) * n_in];
                        let out_row = &mut out[bi * n_out..(bi + 1) * n_out];
                        out_row.copy_from_slice(b);
                        for (i, &xi) in x_row.iter().enumerate() {
                            if xi == 0.0 {
                                continue;
                            }
                            let w_row = &w[i * n_out..(i + 1) * n_out];
                            for (o, wv) in out_row.iter_mut().zip(w_row) {
                                *o += xi * wv;
                            }
                        }
                        for o in out_row.iter_mut() {
                            *o = act.apply(*o);
                        }
                    }
                    (out, None)
                }
                LayerPlan::Conv1d {
                    len,
                    c_in,
                    c_out,
                    k,
                    w_off,
                    b_off,
                    act,
                } => {
                    let w = &self.params[*w_off..w_off + k * c_in * c_out];
                    let b = &self.params[*b_off..b_off + c_out];
                    let pad = (k - 1) / 2;
                    let mut out = vec![0.0; n_batch * len * c_out];
                    for bi in 0..n_batch {
                        for p in 0..*len {
                            let out_row = &mut out[(bi * len + p) * c_out..][..*c_out];
                            out_row.copy_from_slice(b);
                            for dk in 0..*k {
                                let ip = p + dk;
                                if ip < pad || ip - pad >= *len {
                                    continue;
                                }
                                let x_off = (bi * len + ip - pad) * c_in;
                                for ci in 0..*c_in {
                                    let xi = x[x_off + ci];
                                    if xi == 0.0 {
                                        continue;
                                    }
                                    let w_row = &w[(dk * c_in + ci) * c_out..][..*c_out];
                                    for (o, wv) in out_row.iter_mut().zip(w_row) {
                                        *o += xi * wv;
                                    }
                                }
                            }
                            for o in out_row.iter_mut() {
                                *o = act.apply(*o);
                            }
                        }
                    }
                    (out, None)
                }
                LayerPlan::Conv2d {
                    h,
                    w: width,
                    c_in,
                    c_out,
                    kh,
                    kw,
                    w_off,
                    b_off,
                    act,
                } => {
                    let wts = &self.params[*w_off..w_off + kh * kw * c_in * c_out];
                    let b = &self.params[*b_off..b_off + c_out];
                    let (pad_h, pad_w) = ((kh - 1) / 2, (kw - 1) / 2);
                    let mut out = vec![0.0; n_batch * h * width * c_out];
                    for bi in 0..n_batch {
                        for py in 0..*h {
                            for px in 0..*width {
                                let out_row =
                                    &mut out[((bi * h + py) * width + px) * c_out..][..*c_out];
                                out_row.copy_from_slice(b);
                                for dy_k in 0..*kh {
                                    let iy = py + dy_k;
                                    if iy < pad_h || iy - pad_h >= *h {
                                        continue;
                                    }
                                    for dx_k in 0..*kw {
                                        let ix = px + dx_k;
                                        if ix < pad_w || ix - pad_w >= *width {
                                            continue;
                                        }
                                        let x_off =
                                            ((bi * h + iy - pad_h) * width + ix - pad_w) * c_in;
                                        for ci in 0..*c_in {
                                            let xi = x[x_off + ci];
                                            if xi == 0.0 {
                                                continue;
                                            }
                                            let w_row = &wts
                                                [((dy_k * kw + dx_k) * c_in + ci) * c_out..]
                                                [..*c_out];
                                            for (o, wv) in out_row.iter_mut().zip(w_row) {
                                                *o += xi * wv;
                                            }
                                        }
                                    }
                                }
                                for o in out_row.iter_mut() {
                                    *o = act.apply(*o);
                                }
                            }
                        }
                    }
                    (out, None)
                }
                LayerPlan::Flatten => (x.clone(), None),
                LayerPlan::Dropout { rate } => match &mut mode {
                    ForwardMode::Eval => (x.clone(), None),
                    ForwardMode::Train(rng) => {
                        let keep_scale = 1.0 / (1.0 - rate);
                        let mask: Vec<f64> = (0..x.len())
                            .map(|_| {
                                if rng.random::<f64>() < *rate {
                                    0.0
                                } else {
                                    keep_scale
                                }
                            })
                            .collect();
                        let out = x.iter().zip(&mask).map(|(v, m)| v * m).collect();
                        (out, Some(mask))
                    }
                },
            };
            outs.push(out);
            masks.push(mask);
        }
        Cache { outs, masks }
    }

    /// Gradient step for one layer: consumes d(loss)/d(output), returns
    /// d(loss)/d(input), accumulating parameter gradients.
    fn backward_layer(
        &self,
        layer: &LayerPlan,
        idx: usize,
        cache: &Cache,
        n_batch: usize,
        mut dy: Vec<f64>,
        grads: &mut [f64],
    ) -> Vec<f64> {
        let x = &cache.outs[idx];
        let y = &cache.outs[idx + 1];
        match layer {
            LayerPlan::Dense {
                n_in,
                n_out,
                w_off,
                b_off,
                act,
            } => {
                for (d, yv) in dy.iter_mut().zip(y) {
                    *d *= act.derivative_from_output(*yv);
                }
                let w = &self.params[*w_off..w_off + n_in * n_out];
                let mut dx = vec![0.0; n_batch * n_in];
                for bi in 0..n_batch {
                    let dy_row = &dy[bi * n_out..(bi + 1) * n_out];
                    let x_row = &x[bi * n_in..(bi + 1) * n_in];
                    let dx_row = &mut dx[bi * n_in..(bi + 1) * n_in];
                    for i in 0..*n_in {
                        let xi = x_row[i];
                        let w_row = &w[i * n_out..(i + 1) * n_out];
                        let mut acc = 0.0;
                        if xi == 0.0 {
                            for (wv, d) in w_row.iter().zip(dy_row) {
                                acc += wv * d;
                            }
                        } else {
                            let gw_row = &mut grads[w_off + i * n_out..w_off + (i + 1) * n_out];
                            for ((gw, wv), d) in gw_row.iter_mut().zip(w_row).zip(dy_row) {
                                *gw += xi * d;
                                acc += wv * d;
                            }
                        }
                        dx_row[i] = acc;
                    }
                    let gb = &mut grads[*b_off..b_off + n_out];
                    for (g, d) in gb.iter_mut().zip(dy_row) {
                        *g += d;
                    }
                }
                dx
            }
            LayerPlan::Conv1d {
                len,
                c_in,
                c_out,
                k,
                w_off,
                b_off,
                act,
            } => {
                for (d, yv) in dy.iter_mut().zip(y) {
                    *d *= act.derivative_from_output(*yv);
                }
                let w = &self.params[*w_off..w_off + k * c_in * c_out];
                let pad = (k - 1) / 2;
                let mut dx = vec![0.0; n_batch * len * c_in];
                for bi in 0..n_batch {
                    for p in 0..*len {
                        let dy_row = &dy[(bi * len + p) * c_out..][..*c_out];
                        let gb = &mut grads[*b_off..b_off + c_out];
                        for (g, d) in gb.iter_mut().zip(dy_row) {
                            *g += d;
                        }
                        for dk in 0..*k {
                            let ip = p + dk;
                            if ip < pad || ip - pad >= *len {
                                continue;
                            }
                            let x_off = (bi * len + ip - pad) * c_in;
                            for ci in 0..*c_in {
                                let xi = x[x_off + ci];
                                let w_row = &w[(dk * c_in + ci) * c_out..][..*c_out];
                                let gw_row =
                                    &mut grads[w_off + (dk * c_in + ci) * c_out..][..*c_out];
                                let mut acc = 0.0;
                                for ((gw, wv), d) in gw_row.iter_mut().zip(w_row).zip(dy_row) {
                                    *gw += xi * d;
                                    acc += wv * d;
                                }
                                dx[x_off + ci] += acc;
                            }
                        }
                    }
                }
                dx
            }
            LayerPlan::Conv2d {
                h,
                w: width,
                c_in,
                c_out,
                kh,
                kw,
                w_off,
                b_off,
                act,
            } => {
                for (d, yv) in dy.iter_mut().zip(y) {
                    *d *= act.derivative_from_output(*yv);
                }
                let wts = &self.params[*w_off..w_off + kh * kw * c_in * c_out];
                let (pad_h, pad_w) = ((kh - 1) / 2, (kw - 1) / 2);
                let mut dx = vec![0.0; n_batch * h * width * c_in];
                for bi in 0..n_batch {
                    for py in 0..*h {
                        for px in 0..*width {
                            let dy_row = &dy[((bi * h + py) * width + px) * c_out..][..*c_out];
                            let gb = &mut grads[*b_off..b_off + c_out];
                            for (g, d) in gb.iter_mut().zip(dy_row) {
                                *g += d;
                            }
                            for dy_k in 0..*kh {
                                let iy = py + dy_k;
                                if iy < pad_h || iy - pad_h >= *h {
                                    continue;
                                }
                                for dx_k in 0..*kw {
                                    let ix = px + dx_k;
                                    if ix < pad_w || ix - pad_w >= *width {
                                        continue;
                                    }
                                    let x_off = ((bi * h + iy - pad_h) * width + ix - pad_w) * c_in;
                                    for ci in 0..*c_in {
                                        let xi = x[x_off + ci];
                                        let w_base = ((dy_k * kw + dx_k) * c_in + ci) * c_out;
                                        let w_row = &wts[w_base..w_base + c_out];
                                        let gw_row =
                                            &mut grads[w_off + w_base..w_off + w_base + c_out];
                                        let mut acc = 0.0;
                                        for ((gw, wv), d) in
                                            gw_row.iter_mut().zip(w_row).zip(dy_row)
                                        {
                                            *gw += xi * d;
                                            acc += wv * d;
                                        }
                                        dx[x_off + ci] += acc;
                                    }
                                }
                            }
                        }
                    }
                }
                dx
            }
            LayerPlan::Flatten => dy,
            LayerPlan::Dropout { .. } => {
                if let Some(mask) = &cache.masks[idx] {
                    for (d, m) in dy.iter_mut().zip(mask) {
                        *d *= m;
                    }
                }
                dy
            }
        }
    }
}

struct Cache {
    /// outs[0] is the input; outs[i+1] the output of layer i
    outs: Vec<Vec<f64>>,
    /// dropout masks by layer index (train mode only)
    masks: Vec<Option<Vec<f64>>>,
}

/// Batch-mean MSE: L = sum((pred-target)^2) / (sample_len * batch), with
/// the matching gradient 2(pred-target)/(sample_len * batch).
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if pred.shape() != target.shape() {
        return Err(Error::DimensionMismatch(format!(
            "mse: {:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let denom = (pred.sample_len() * pred.batch()) as f64;
    let mut loss = 0.0;
    let grad: Vec<f64> = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / denom
        })
        .collect();
    Ok((loss / denom, Tensor::from_parts(pred.shape().to_vec(), grad)))
}
