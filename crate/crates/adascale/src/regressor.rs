//! The scale regressor: parallel convolutional branches (1x1 and 3x3 by
//! default) over deep features, rectified, globally pooled, and combined by
//! a fully-connected layer into a single relative-scale output.
//!
//! Forward, backward, and SGD training are implemented directly; the
//! convolutions are plain sliding-window with zero padding and stride 1.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalecodec::ScaleSet;

pub const MODEL_FORMAT: &str = "adascale-regressor";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RegressorError {
    #[error("feature map has {got} channels, model expects {expected}")]
    ChannelMismatch { got: usize, expected: usize },
    #[error("feature map contains non-finite values")]
    NonFiniteInput,
    #[error("non-finite training target")]
    NonFiniteTarget,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("unsupported model file: format {0:?} version {1}")]
    UnsupportedModel(String, u32),
    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Deep feature tensor, C x H x W, row-major within each channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn at_mut(&mut self, c: usize, y: usize, x: usize) -> &mut f64 {
        &mut self.data[(c * self.height + y) * self.width + x]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Per-channel global average, used by the linear-readout diagnostics.
    pub fn channel_means(&self) -> Vec<f64> {
        let hw = (self.height * self.width) as f64;
        (0..self.channels)
            .map(|c| {
                self.data[c * self.height * self.width..(c + 1) * self.height * self.width]
                    .iter()
                    .sum::<f64>()
                    / hw
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Average,
    Max,
}

/// One convolutional branch: `out_channels` filters of size
/// `kernel x kernel` (odd) over `in_channels` input channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvBranch {
    pub kernel: usize,
    pub out_channels: usize,
    /// Flat, row-major: `[out][in][ky][kx]`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvBranch {
    #[inline]
    fn w(&self, o: usize, c: usize, ky: usize, kx: usize, in_channels: usize) -> f64 {
        self.weights[((o * in_channels + c) * self.kernel + ky) * self.kernel + kx]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorModel {
    pub format: String,
    pub version: u32,
    pub in_channels: usize,
    pub pooling: Pooling,
    /// Scale set the training targets were encoded against.
    pub scale_set: ScaleSet,
    pub branches: Vec<ConvBranch>,
    /// One weight per pooled branch output, concatenated in branch order.
    pub fc_weights: Vec<f64>,
    pub fc_bias: f64,
}

#[derive(Debug, Clone)]
pub struct RegressorConfig {
    pub in_channels: usize,
    /// (kernel size, branch width) pairs; kernels must be odd.
    pub branches: Vec<(usize, usize)>,
    pub pooling: Pooling,
}

impl Default for RegressorConfig {
    fn default() -> Self {
        Self {
            in_channels: 8,
            branches: vec![(1, 96), (3, 96)],
            pooling: Pooling::Average,
        }
    }
}

impl RegressorModel {
    /// Seeded uniform initialization in `[-r, r]` with `r = 1/sqrt(fan_in)`.
    pub fn init(config: &RegressorConfig, scale_set: ScaleSet, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut branches = Vec::new();
        for &(kernel, out_channels) in &config.branches {
            assert!(kernel % 2 == 1, "kernel size must be odd");
            let fan_in = config.in_channels * kernel * kernel;
            let r = 1.0 / (fan_in as f64).sqrt();
            let n = out_channels * config.in_channels * kernel * kernel;
            branches.push(ConvBranch {
                kernel,
                out_channels,
                weights: (0..n).map(|_| rng.gen_range(-r..=r)).collect(),
                bias: (0..out_channels).map(|_| rng.gen_range(-r..=r)).collect(),
            });
        }
        let total: usize = branches.iter().map(|b| b.out_channels).sum();
        let r = 1.0 / (total as f64).sqrt();
        RegressorModel {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            in_channels: config.in_channels,
            pooling: config.pooling,
            scale_set,
            branches,
            fc_weights: (0..total).map(|_| rng.gen_range(-r..=r)).collect(),
            fc_bias: rng.gen_range(-r..=r),
        }
    }

    fn check_input(&self, x: &FeatureMap) -> Result<(), RegressorError> {
        if x.channels != self.in_channels {
            return Err(RegressorError::ChannelMismatch {
                got: x.channels,
                expected: self.in_channels,
            });
        }
        if !x.is_finite() {
            return Err(RegressorError::NonFiniteInput);
        }
        Ok(())
    }

    /// Pre-activation value of one branch filter at one position
    /// (zero padding, stride 1).
    fn conv_at(&self, branch: &ConvBranch, x: &FeatureMap, o: usize, y: usize, xx: usize) -> f64 {
        let pad = branch.kernel / 2;
        let mut acc = branch.bias[o];
        for c in 0..self.in_channels {
            for ky in 0..branch.kernel {
                let sy = y as isize + ky as isize - pad as isize;
                if sy < 0 || sy >= x.height as isize {
                    continue;
                }
                for kx in 0..branch.kernel {
                    let sx = xx as isize + kx as isize - pad as isize;
                    if sx < 0 || sx >= x.width as isize {
                        continue;
                    }
                    acc += self.w_of(branch, o, c, ky, kx) * x.at(c, sy as usize, sx as usize);
                }
            }
        }
        acc
    }

    #[inline]
    fn w_of(&self, branch: &ConvBranch, o: usize, c: usize, ky: usize, kx: usize) -> f64 {
        branch.w(o, c, ky, kx, self.in_channels)
    }

    /// Pooled branch outputs plus, for reuse in backward, the pre-activation
    /// maps and (for max pooling) the argmax positions.
    fn forward_full(&self, x: &FeatureMap) -> ForwardTrace {
        let hw = x.height * x.width;
        let mut pooled = Vec::new();
        let mut preact = Vec::new();
        let mut argmax = Vec::new();
        for branch in &self.branches {
            for o in 0..branch.out_channels {
                let mut pre = Vec::with_capacity(hw);
                for y in 0..x.height {
                    for xx in 0..x.width {
                        pre.push(self.conv_at(branch, x, o, y, xx));
                    }
                }
                let (p, am) = match self.pooling {
                    Pooling::Average => (
                        pre.iter().map(|&v| v.max(0.0)).sum::<f64>() / hw as f64,
                        0,
                    ),
                    Pooling::Max => {
                        let (i, v) = pre
                            .iter()
                            .copied()
                            .map(|v| v.max(0.0))
                            .enumerate()
                            .fold((0usize, f64::NEG_INFINITY), |(bi, bv), (i, v)| {
                                if v > bv {
                                    (i, v)
                                } else {
                                    (bi, bv)
                                }
                            });
                        (v, i)
                    }
                };
                pooled.push(p);
                preact.push(pre);
                argmax.push(am);
            }
        }
        let output = self.fc_bias
            + pooled
                .iter()
                .zip(&self.fc_weights)
                .map(|(p, w)| p * w)
                .sum::<f64>();
        ForwardTrace {
            pooled,
            preact,
            argmax,
            output,
        }
    }

    pub fn forward(&self, x: &FeatureMap) -> Result<f64, RegressorError> {
        self.check_input(x)?;
        Ok(self.forward_full(x).output)
    }

    /// Squared-error loss against `target` and gradients for every
    /// parameter via reverse-mode chain rule.
    pub fn backward(&self, x: &FeatureMap, target: f64) -> Result<BackwardResult, RegressorError> {
        self.check_input(x)?;
        if !target.is_finite() {
            return Err(RegressorError::NonFiniteTarget);
        }
        let trace = self.forward_full(x);
        let err = trace.output - target;
        let loss = err * err;
        let dout = 2.0 * err;

        let mut grads = Gradients::zeros_like(self);
        grads.fc_bias = dout;
        for (g, p) in grads.fc_weights.iter_mut().zip(&trace.pooled) {
            *g = dout * p;
        }

        let hw = x.height * x.width;
        let mut unit = 0; // global pooled-output index across branches
        for (bi, branch) in self.branches.iter().enumerate() {
            let pad = branch.kernel / 2;
            let bg = &mut grads.branches[bi];
            for o in 0..branch.out_channels {
                let dpool = dout * self.fc_weights[unit];
                let pre = &trace.preact[unit];
                match self.pooling {
                    Pooling::Average => {
                        let scale = dpool / hw as f64;
                        for (pos, &pv) in pre.iter().enumerate() {
                            if pv <= 0.0 {
                                continue;
                            }
                            let (y, xx) = (pos / x.width, pos % x.width);
                            accumulate_conv_grad(
                                bg, branch, x, o, y, xx, pad, scale, self.in_channels,
                            );
                        }
                    }
                    Pooling::Max => {
                        let pos = trace.argmax[unit];
                        if pre[pos] > 0.0 {
                            let (y, xx) = (pos / x.width, pos % x.width);
                            accumulate_conv_grad(
                                bg, branch, x, o, y, xx, pad, dpool, self.in_channels,
                            );
                        }
                    }
                }
                unit += 1;
            }
        }
        Ok(BackwardResult {
            loss,
            output: trace.output,
            grads,
        })
    }

    pub fn apply_gradients(&mut self, grads: &Gradients, lr: f64) {
        for (b, gb) in self.branches.iter_mut().zip(&grads.branches) {
            for (w, g) in b.weights.iter_mut().zip(&gb.weights) {
                *w -= lr * g;
            }
            for (w, g) in b.bias.iter_mut().zip(&gb.bias) {
                *w -= lr * g;
            }
        }
        for (w, g) in self.fc_weights.iter_mut().zip(&grads.fc_weights) {
            *w -= lr * g;
        }
        self.fc_bias -= lr * grads.fc_bias;
    }

    pub fn to_json(&self) -> Result<String, RegressorError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, RegressorError> {
        let model: RegressorModel = serde_json::from_str(s)?;
        if model.format != MODEL_FORMAT || model.version != MODEL_VERSION {
            return Err(RegressorError::UnsupportedModel(
                model.format,
                model.version,
            ));
        }
        Ok(model)
    }
}

#[allow(clippy::too_many_arguments)]
fn accumulate_conv_grad(
    bg: &mut BranchGradients,
    branch: &ConvBranch,
    x: &FeatureMap,
    o: usize,
    y: usize,
    xx: usize,
    pad: usize,
    upstream: f64,
    in_channels: usize,
) {
    bg.bias[o] += upstream;
    for c in 0..in_channels {
        for ky in 0..branch.kernel {
            let sy = y as isize + ky as isize - pad as isize;
            if sy < 0 || sy >= x.height as isize {
                continue;
            }
            for kx in 0..branch.kernel {
                let sx = xx as isize + kx as isize - pad as isize;
                if sx < 0 || sx >= x.width as isize {
                    continue;
                }
                let idx = ((o * in_channels + c) * branch.kernel + ky) * branch.kernel + kx;
                bg.weights[idx] += upstream * x.at(c, sy as usize, sx as usize);
            }
        }
    }
}

struct ForwardTrace {
    pooled: Vec<f64>,
    preact: Vec<Vec<f64>>,
    argmax: Vec<usize>,
    output: f64,
}

#[derive(Debug, Clone)]
pub struct BranchGradients {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub branches: Vec<BranchGradients>,
    pub fc_weights: Vec<f64>,
    pub fc_bias: f64,
}

impl Gradients {
    pub fn zeros_like(model: &RegressorModel) -> Self {
        Self {
            branches: model
                .branches
                .iter()
                .map(|b| BranchGradients {
                    weights: vec![0.0; b.weights.len()],
                    bias: vec![0.0; b.bias.len()],
                })
                .collect(),
            fc_weights: vec![0.0; model.fc_weights.len()],
            fc_bias: 0.0,
        }
    }

    fn add_scaled(&mut self, other: &Gradients, k: f64) {
        for (a, b) in self.branches.iter_mut().zip(&other.branches) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += k * y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += k * y;
            }
        }
        for (x, y) in self.fc_weights.iter_mut().zip(&other.fc_weights) {
            *x += k * y;
        }
        self.fc_bias += k * other.fc_bias;
    }
}

#[derive(Debug, Clone)]
pub struct TrainerState {
    pub initial_lr: f64,
    pub decay_factor: f64,
    /// Epoch position after which the learning rate is multiplied once by
    /// `decay_factor`.
    pub decay_epoch: f64,
    pub epochs: u32,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainerState {
    fn default() -> Self {
        Self {
            initial_lr: 1e-4,
            decay_factor: 0.1,
            decay_epoch: 1.3,
            epochs: 2,
            batch_size: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Mean loss of each mini-batch, in step order.
    pub losses: Vec<f64>,
}

/// Plain SGD over `(features, encoded target)` pairs. Samples are shuffled
/// each epoch with the seeded RNG; the learning-rate schedule decays once at
/// `decay_epoch`.
pub fn train(
    model: &mut RegressorModel,
    dataset: &[(FeatureMap, f64)],
    trainer: &TrainerState,
) -> Result<TrainReport, RegressorError> {
    if dataset.is_empty() {
        return Err(RegressorError::EmptyDataset);
    }
    assert!(trainer.initial_lr >= 0.0);
    assert!(trainer.batch_size >= 1);
    let n = dataset.len();
    let mut rng = ChaCha8Rng::seed_from_u64(trainer.seed);
    let mut losses = Vec::new();
    let mut samples_seen = 0usize;

    for _epoch in 0..trainer.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        // Fisher-Yates
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(trainer.batch_size) {
            let epoch_pos = samples_seen as f64 / n as f64;
            let lr = if epoch_pos >= trainer.decay_epoch {
                trainer.initial_lr * trainer.decay_factor
            } else {
                trainer.initial_lr
            };
            let mut acc = Gradients::zeros_like(model);
            let mut batch_loss = 0.0;
            for &i in chunk {
                let (x, t) = &dataset[i];
                let r = model.backward(x, *t)?;
                batch_loss += r.loss;
                acc.add_scaled(&r.grads, 1.0 / chunk.len() as f64);
            }
            model.apply_gradients(&acc, lr);
            losses.push(batch_loss / chunk.len() as f64);
            samples_seen += chunk.len();
        }
    }
    Ok(TrainReport { losses })
}

#[derive(Debug)]
pub struct BackwardResult {
    pub loss: f64,
    pub output: f64,
    pub grads: Gradients,
}

/// Mean squared error of the model over a dataset.
pub fn mse(model: &RegressorModel, dataset: &[(FeatureMap, f64)]) -> Result<f64, RegressorError> {
    if dataset.is_empty() {
        return Err(RegressorError::EmptyDataset);
    }
    let mut acc = 0.0;
    for (x, t) in dataset {
        let e = model.forward(x)? - t;
        acc += e * e;
    }
    Ok(acc / dataset.len() as f64)
}
