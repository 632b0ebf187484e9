//! Arrest classifier: a compact LSTM-FCN scoring occasional arrests 0-3
//! from per-cycle (amplitude, interval) sequences.
//!
//! Two input representations are supported. The default feeds the
//! normalized per-cycle amplitude/interval channels (length 10 with a
//! validity mask); `resampled_signal` instead feeds the raw smoothed
//! signal linearly resampled to 64 samples, one channel. Either way each
//! sample is z-normalized over its valid positions at construction.
//!
//! The network is implemented from scratch (forward, backprop, Adam) so
//! training is deterministic given seeds and the gradient can be checked
//! against finite differences.

mod net;
mod store;
mod tensor;
mod train;

pub use net::{forward, loss_and_grads, loss_only, Mode, NetGrads};
pub use store::{load_model, save_model, MODEL_VERSION};
pub use tensor::{fnv1a64, Tensor};
pub use train::{train, TrainReport};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::seeded_rng;
use crate::signal::{CycleSeries, MAX_CYCLES};

/// Input representation fed to the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    /// Two channels of per-cycle amplitude and interval, length 10.
    #[default]
    CycleFeatures,
    /// One channel: the raw signal resampled to 64 samples.
    ResampledSignal,
}

/// Architecture settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub input_mode: InputMode,
    pub lstm_hidden: usize,
    pub conv_channels: [usize; 3],
    pub conv_kernels: [usize; 3],
    pub dropout_rate: f64,
    pub n_classes: usize,
    pub seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            input_mode: InputMode::CycleFeatures,
            lstm_hidden: 8,
            conv_channels: [32, 64, 32],
            conv_kernels: [8, 5, 3],
            dropout_rate: 0.3,
            n_classes: 4,
            seed: 42,
        }
    }
}

impl NetConfig {
    pub fn in_channels(&self) -> usize {
        match self.input_mode {
            InputMode::CycleFeatures => 2,
            InputMode::ResampledSignal => 1,
        }
    }

    pub fn seq_len(&self) -> usize {
        match self.input_mode {
            InputMode::CycleFeatures => MAX_CYCLES,
            InputMode::ResampledSignal => 64,
        }
    }

    pub fn validate(&self) -> Result<(), ArrestError> {
        if self.lstm_hidden == 0 || self.n_classes < 2 {
            return Err(ArrestError::InvalidConfig(
                "lstm_hidden and n_classes must be positive".into(),
            ));
        }
        if self.conv_channels.contains(&0) {
            return Err(ArrestError::InvalidConfig("conv channels must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(ArrestError::InvalidConfig("dropout rate must be in [0, 1)".into()));
        }
        let l = self.seq_len();
        for &k in &self.conv_kernels {
            if k == 0 || k > l {
                return Err(ArrestError::InvalidConfig(format!(
                    "kernel {k} must be in 1..={l}"
                )));
            }
        }
        Ok(())
    }
}

/// Optimization settings (Adam with the usual moment constants,
/// cross-entropy loss).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 80,
            batch_size: 16,
            learning_rate: 0.01,
            seed: 42,
        }
    }
}

/// One network input: `channels[c][t]` with a prefix-true validity mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSample {
    pub channels: Vec<Vec<f64>>,
    pub mask: Vec<bool>,
    pub label: Option<u8>,
}

impl SeriesSample {
    /// Build the 2 x 10 cycle-feature representation. The interval
    /// channel repeats its last value on the final cycle (there is one
    /// fewer interval than amplitudes), and both channels are
    /// z-normalized over the valid prefix.
    pub fn from_cycles(c: &CycleSeries, label: Option<u8>) -> Result<Self, ArrestError> {
        let n = c.amplitudes.len().min(MAX_CYCLES);
        if n == 0 {
            return Err(ArrestError::EmptySample);
        }
        let mut amp = vec![0.0; MAX_CYCLES];
        let mut int = vec![0.0; MAX_CYCLES];
        for j in 0..n {
            amp[j] = c.amplitudes[j];
            int[j] = if c.intervals.is_empty() {
                0.0
            } else {
                c.intervals[j.min(c.intervals.len() - 1)]
            };
        }
        let mut mask = vec![false; MAX_CYCLES];
        for m in mask.iter_mut().take(n) {
            *m = true;
        }
        let mut s = SeriesSample {
            channels: vec![amp, int],
            mask,
            label,
        };
        s.z_normalize();
        Ok(s)
    }

    /// Build the resampled-signal representation: linear interpolation of
    /// the raw values onto 64 samples, one channel, all positions valid.
    pub fn from_signal(values: &[f64], label: Option<u8>) -> Result<Self, ArrestError> {
        if values.is_empty() {
            return Err(ArrestError::EmptySample);
        }
        const L: usize = 64;
        let n = values.len();
        let mut out = vec![0.0; L];
        for (i, o) in out.iter_mut().enumerate() {
            if n == 1 {
                *o = values[0];
                continue;
            }
            let pos = i as f64 * (n - 1) as f64 / (L - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            let frac = pos - lo as f64;
            *o = values[lo] * (1.0 - frac) + values[hi] * frac;
        }
        let mut s = SeriesSample {
            channels: vec![out],
            mask: vec![true; L],
            label,
        };
        s.z_normalize();
        Ok(s)
    }

    pub fn valid_len(&self) -> usize {
        self.mask.iter().take_while(|&&m| m).count()
    }

    fn z_normalize(&mut self) {
        let n = self.valid_len();
        for ch in self.channels.iter_mut() {
            let mean = ch[..n].iter().sum::<f64>() / n as f64;
            let var = ch[..n].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            for v in ch[..n].iter_mut() {
                *v = if sd > 1e-12 { (*v - mean) / sd } else { 0.0 };
            }
            for v in ch[n..].iter_mut() {
                *v = 0.0;
            }
        }
    }

    pub fn check_shape(&self, cfg: &NetConfig) -> Result<(), ArrestError> {
        if self.channels.len() != cfg.in_channels() {
            return Err(ArrestError::ShapeMismatch(format!(
                "expected {} channels, got {}",
                cfg.in_channels(),
                self.channels.len()
            )));
        }
        let l = self.channels[0].len();
        if self.channels.iter().any(|c| c.len() != l) || self.mask.len() != l {
            return Err(ArrestError::ShapeMismatch("ragged channels or mask".into()));
        }
        let n = self.valid_len();
        if n == 0 {
            return Err(ArrestError::EmptySample);
        }
        if self.mask[n..].iter().any(|&m| m) {
            return Err(ArrestError::ShapeMismatch("mask must be prefix-true".into()));
        }
        Ok(())
    }
}

/// LSTM weights with gates stacked in (input, forget, cell, output)
/// order: `w_ih` is `[4H, C]`, `w_hh` is `[4H, H]`, `b` is `[4H]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub w_ih: Tensor,
    pub w_hh: Tensor,
    pub b: Tensor,
}

/// One convolution block: same-padded conv, per-channel batch norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvBlock {
    pub w: Tensor,
    pub b: Tensor,
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseParams {
    pub w: Tensor,
    pub b: Tensor,
}

/// All weights of the arrest network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub config: NetConfig,
    pub lstm: LstmParams,
    pub blocks: Vec<ConvBlock>,
    pub head: DenseParams,
}

impl NetParams {
    /// Trainable tensors in canonical order (running statistics are
    /// excluded; they are state, not parameters).
    pub fn trainable(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = vec![
            ("lstm.w_ih".into(), &self.lstm.w_ih),
            ("lstm.w_hh".into(), &self.lstm.w_hh),
            ("lstm.b".into(), &self.lstm.b),
        ];
        for (i, blk) in self.blocks.iter().enumerate() {
            out.push((format!("conv{i}.w"), &blk.w));
            out.push((format!("conv{i}.b"), &blk.b));
            out.push((format!("conv{i}.gamma"), &blk.gamma));
            out.push((format!("conv{i}.beta"), &blk.beta));
        }
        out.push(("head.w".into(), &self.head.w));
        out.push(("head.b".into(), &self.head.b));
        out
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = vec![
            &mut self.lstm.w_ih,
            &mut self.lstm.w_hh,
            &mut self.lstm.b,
        ];
        for blk in self.blocks.iter_mut() {
            out.push(&mut blk.w);
            out.push(&mut blk.b);
            out.push(&mut blk.gamma);
            out.push(&mut blk.beta);
        }
        out.push(&mut self.head.w);
        out.push(&mut self.head.b);
        out
    }

    /// Every tensor including running statistics, for serialization.
    pub fn all_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = self.trainable();
        for (i, blk) in self.blocks.iter().enumerate() {
            out.push((format!("conv{i}.running_mean"), &blk.running_mean));
            out.push((format!("conv{i}.running_var"), &blk.running_var));
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.all_tensors().iter().all(|(_, t)| t.all_finite())
    }
}

#[derive(Debug, Error)]
pub enum ArrestError {
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("dataset is degenerate: needs >= 2 classes with labels")]
    DegenerateDataset,
    #[error("empty sample: no valid cycles")]
    EmptySample,
    #[error("model file is corrupt: {0}")]
    ModelFormat(String),
    #[error("model checksum mismatch")]
    ChecksumMismatch,
    #[error("unsupported model version {found}")]
    VersionMismatch { found: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Deterministic fan-in-scaled uniform initialization; batch-norm scale 1
/// and shift 0; biases zero.
pub fn init_params(cfg: &NetConfig) -> Result<NetParams, ArrestError> {
    cfg.validate()?;
    let mut rng = seeded_rng(cfg.seed);
    let mut uniform_init = |shape: &[usize], fan_in: usize| {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut t = Tensor::zeros(shape);
        for v in t.data.iter_mut() {
            *v = (rng.random::<f64>() * 2.0 - 1.0) * bound;
        }
        t
    };
    let h = cfg.lstm_hidden;
    let c_in = cfg.in_channels();
    let lstm = LstmParams {
        w_ih: uniform_init(&[4 * h, c_in], c_in),
        w_hh: uniform_init(&[4 * h, h], h),
        b: Tensor::zeros(&[4 * h]),
    };
    let mut blocks = Vec::with_capacity(3);
    let mut prev = c_in;
    for i in 0..3 {
        let (out_ch, k) = (cfg.conv_channels[i], cfg.conv_kernels[i]);
        blocks.push(ConvBlock {
            w: uniform_init(&[out_ch, prev, k], prev * k),
            b: Tensor::zeros(&[out_ch]),
            gamma: Tensor::filled(&[out_ch], 1.0),
            beta: Tensor::zeros(&[out_ch]),
            running_mean: Tensor::zeros(&[out_ch]),
            running_var: Tensor::filled(&[out_ch], 1.0),
        });
        prev = out_ch;
    }
    let feat = h + cfg.conv_channels[2];
    let head = DenseParams {
        w: uniform_init(&[cfg.n_classes, feat], feat),
        b: Tensor::zeros(&[cfg.n_classes]),
    };
    Ok(NetParams {
        config: cfg.clone(),
        lstm,
        blocks,
        head,
    })
}

/// Arrest category prediction: argmax of eval-mode probabilities, ties
/// broken toward the lower class.
pub fn predict_arrest(p: &NetParams, x: &SeriesSample) -> Result<u8, ArrestError> {
    let probs = forward(p, x)?;
    Ok(argmax_low_tie(&probs))
}

/// Argmax with ties resolved to the lowest index.
pub fn argmax_low_tie(probs: &[f64]) -> u8 {
    let mut best = 0usize;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    best as u8
}
