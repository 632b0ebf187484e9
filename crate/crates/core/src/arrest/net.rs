//! Forward and backward passes of the LSTM-FCN.
//!
//! The LSTM branch walks the valid prefix of the sequence and keeps its
//! final hidden state (dropout on that state during training). The FCN
//! branch is three same-padded conv + batch-norm + ReLU blocks followed
//! by masked global average pooling. Masked positions are zeroed at
//! every block entry so values beyond the valid prefix can never
//! influence the output. The concatenated features feed a dense softmax.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::Tensor;
use super::{ArrestError, NetParams, SeriesSample};
use crate::rng::seeded_rng;

const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Gradients for every trainable tensor, in [`NetParams::trainable`]
/// order.
#[derive(Debug, Clone)]
pub struct NetGrads {
    pub tensors: Vec<Tensor>,
}

impl NetGrads {
    pub fn zeros_like(p: &NetParams) -> Self {
        NetGrads {
            tensors: p
                .trainable()
                .iter()
                .map(|(_, t)| Tensor::zeros(&t.shape))
                .collect(),
        }
    }
}

struct SampleCache {
    x: Vec<Vec<f64>>,
    valid: usize,
    // lstm
    gates: Vec<[Vec<f64>; 4]>,
    cells: Vec<Vec<f64>>,
    tanh_c: Vec<Vec<f64>>,
    hiddens: Vec<Vec<f64>>,
    h_final: Vec<f64>,
    dropout: Vec<f64>,
    // fcn
    conv_in: Vec<Vec<Vec<f64>>>,
    conv_out: Vec<Vec<Vec<f64>>>,
    xhat: Vec<Vec<Vec<f64>>>,
    post: Vec<Vec<Vec<f64>>>,
    gap: Vec<f64>,
    feat: Vec<f64>,
    probs: Vec<f64>,
}

/// Everything the backward pass needs from a forward pass.
pub struct BatchCache {
    samples: Vec<SampleCache>,
    /// Per block, per channel: the statistics used for normalization.
    pub bn_mean: Vec<Vec<f64>>,
    pub bn_var: Vec<Vec<f64>>,
    mode: Mode,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn pad_left(k: usize) -> usize {
    (k - 1) / 2
}

/// Batched forward pass. Batch normalization uses batch statistics over
/// valid positions in train mode and running statistics in eval mode;
/// dropout draws its masks from `dropout_rng` (required when training
/// with a nonzero rate).
pub fn forward_batch(
    p: &NetParams,
    xs: &[&SeriesSample],
    mode: Mode,
    mut dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<(Vec<Vec<f64>>, BatchCache), ArrestError> {
    let cfg = &p.config;
    let h = cfg.lstm_hidden;
    let c_in = cfg.in_channels();
    if xs.is_empty() {
        return Err(ArrestError::ShapeMismatch("empty batch".into()));
    }
    let mut samples = Vec::with_capacity(xs.len());
    for x in xs {
        x.check_shape(cfg)?;
        let l = x.channels[0].len();
        let valid = x.valid_len();

        // masked copy of the input
        let mut xm = vec![vec![0.0; l]; c_in];
        for c in 0..c_in {
            for t in 0..valid {
                xm[c][t] = x.channels[c][t];
            }
        }

        // LSTM over the valid prefix
        let mut gates = Vec::with_capacity(valid);
        let mut cells = Vec::with_capacity(valid);
        let mut tanh_c = Vec::with_capacity(valid);
        let mut hiddens = Vec::with_capacity(valid);
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        for t in 0..valid {
            let mut z = vec![0.0; 4 * h];
            for (r, zr) in z.iter_mut().enumerate() {
                let mut s = p.lstm.b.at1(r);
                for c in 0..c_in {
                    s += p.lstm.w_ih.at2(r, c) * xm[c][t];
                }
                for j in 0..h {
                    s += p.lstm.w_hh.at2(r, j) * h_prev[j];
                }
                *zr = s;
            }
            let mut gi = vec![0.0; h];
            let mut gf = vec![0.0; h];
            let mut gg = vec![0.0; h];
            let mut go = vec![0.0; h];
            for j in 0..h {
                gi[j] = sigmoid(z[j]);
                gf[j] = sigmoid(z[h + j]);
                gg[j] = z[2 * h + j].tanh();
                go[j] = sigmoid(z[3 * h + j]);
            }
            let mut c_t = vec![0.0; h];
            let mut tc = vec![0.0; h];
            let mut h_t = vec![0.0; h];
            for j in 0..h {
                c_t[j] = gf[j] * c_prev[j] + gi[j] * gg[j];
                tc[j] = c_t[j].tanh();
                h_t[j] = go[j] * tc[j];
            }
            gates.push([gi, gf, gg, go]);
            cells.push(c_t.clone());
            tanh_c.push(tc);
            hiddens.push(h_t.clone());
            c_prev = c_t;
            h_prev = h_t;
        }
        let h_final = h_prev;

        let dropout = match mode {
            Mode::Eval => vec![1.0; h],
            Mode::Train => {
                if cfg.dropout_rate == 0.0 {
                    vec![1.0; h]
                } else {
                    let rng = dropout_rng.as_deref_mut().ok_or_else(|| {
                        ArrestError::InvalidConfig(
                            "training with dropout requires an RNG".into(),
                        )
                    })?;
                    let keep = 1.0 - cfg.dropout_rate;
                    (0..h)
                        .map(|_| {
                            if rng.random::<f64>() < cfg.dropout_rate {
                                0.0
                            } else {
                                1.0 / keep
                            }
                        })
                        .collect()
                }
            }
        };

        samples.push(SampleCache {
            x: xm,
            valid,
            gates,
            cells,
            tanh_c,
            hiddens,
            h_final,
            dropout,
            conv_in: Vec::new(),
            conv_out: Vec::new(),
            xhat: Vec::new(),
            post: Vec::new(),
            gap: Vec::new(),
            feat: Vec::new(),
            probs: Vec::new(),
        });
    }

    // FCN stack, block by block so batch statistics see every sample.
    let mut bn_mean = Vec::with_capacity(3);
    let mut bn_var = Vec::with_capacity(3);
    for (bi, blk) in p.blocks.iter().enumerate() {
        let out_ch = blk.b.len();
        let k = blk.w.shape[2];
        let in_ch = blk.w.shape[1];
        let pl = pad_left(k);

        for s in samples.iter_mut() {
            let input: Vec<Vec<f64>> = if bi == 0 {
                s.x.clone()
            } else {
                // previous block's output with masked positions zeroed
                let prev = &s.post[bi - 1];
                let l = prev[0].len();
                let mut m = vec![vec![0.0; l]; prev.len()];
                for c in 0..prev.len() {
                    for t in 0..s.valid {
                        m[c][t] = prev[c][t];
                    }
                }
                m
            };
            let l = input[0].len();
            let mut out = vec![vec![0.0; l]; out_ch];
            for (o, row) in out.iter_mut().enumerate() {
                for (t, val) in row.iter_mut().enumerate() {
                    let mut acc = blk.b.at1(o);
                    for i in 0..in_ch {
                        for kk in 0..k {
                            let tin = t as i64 + kk as i64 - pl as i64;
                            if tin >= 0 && (tin as usize) < l {
                                acc += blk.w.at3(o, i, kk) * input[i][tin as usize];
                            }
                        }
                    }
                    *val = acc;
                }
            }
            s.conv_in.push(input);
            s.conv_out.push(out);
        }

        // statistics over valid positions
        let (mean, var) = match mode {
            Mode::Eval => (
                blk.running_mean.data.clone(),
                blk.running_var.data.clone(),
            ),
            Mode::Train => {
                let mut mean = vec![0.0; out_ch];
                let mut count = 0usize;
                for s in &samples {
                    count += s.valid;
                    for (c, m) in mean.iter_mut().enumerate() {
                        for t in 0..s.valid {
                            *m += s.conv_out[bi][c][t];
                        }
                    }
                }
                for m in mean.iter_mut() {
                    *m /= count as f64;
                }
                let mut var = vec![0.0; out_ch];
                for s in &samples {
                    for (c, v) in var.iter_mut().enumerate() {
                        for t in 0..s.valid {
                            let d = s.conv_out[bi][c][t] - mean[c];
                            *v += d * d;
                        }
                    }
                }
                for v in var.iter_mut() {
                    *v /= count as f64;
                }
                (mean, var)
            }
        };

        for s in samples.iter_mut() {
            let l = s.conv_out[bi][0].len();
            let mut xh = vec![vec![0.0; l]; out_ch];
            let mut post = vec![vec![0.0; l]; out_ch];
            for c in 0..out_ch {
                let inv_sd = 1.0 / (var[c] + BN_EPS).sqrt();
                for t in 0..l {
                    let xhat = (s.conv_out[bi][c][t] - mean[c]) * inv_sd;
                    xh[c][t] = xhat;
                    post[c][t] = (blk.gamma.at1(c) * xhat + blk.beta.at1(c)).max(0.0);
                }
            }
            s.xhat.push(xh);
            s.post.push(post);
        }
        bn_mean.push(mean);
        bn_var.push(var);
    }

    // pooling, concatenation, head
    let n_classes = p.config.n_classes;
    let out_ch = p.config.conv_channels[2];
    let mut all_probs = Vec::with_capacity(samples.len());
    for s in samples.iter_mut() {
        let mut gap = vec![0.0; out_ch];
        for (c, g) in gap.iter_mut().enumerate() {
            for t in 0..s.valid {
                *g += s.post[2][c][t];
            }
            *g /= s.valid as f64;
        }
        let mut feat = Vec::with_capacity(h + out_ch);
        for j in 0..h {
            feat.push(s.h_final[j] * s.dropout[j]);
        }
        feat.extend_from_slice(&gap);
        let mut logits = vec![0.0; n_classes];
        for (k, l) in logits.iter_mut().enumerate() {
            let mut acc = p.head.b.at1(k);
            for (j, f) in feat.iter().enumerate() {
                acc += p.head.w.at2(k, j) * f;
            }
            *l = acc;
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        let probs: Vec<f64> = exps.iter().map(|e| e / z).collect();
        s.gap = gap;
        s.feat = feat;
        s.probs = probs.clone();
        all_probs.push(probs);
    }

    Ok((
        all_probs,
        BatchCache {
            samples,
            bn_mean,
            bn_var,
            mode,
        },
    ))
}

/// Eval-mode class probabilities for a single sample. Deterministic:
/// dropout off, batch norm on running statistics.
pub fn forward(p: &NetParams, x: &SeriesSample) -> Result<Vec<f64>, ArrestError> {
    let (probs, _) = forward_batch(p, &[x], Mode::Eval, None)?;
    Ok(probs.into_iter().next().unwrap())
}

/// Mean cross-entropy of a forward batch against labels.
pub fn batch_loss(probs: &[Vec<f64>], labels: &[u8]) -> f64 {
    let n = probs.len() as f64;
    probs
        .iter()
        .zip(labels)
        .map(|(p, &y)| -(p[y as usize].max(1e-300)).ln())
        .sum::<f64>()
        / n
}

/// Backward pass through a training-mode cache. Returns gradients of the
/// mean cross-entropy with respect to every trainable tensor.
pub fn backward_batch(
    p: &NetParams,
    cache: &BatchCache,
    labels: &[u8],
) -> Result<NetGrads, ArrestError> {
    assert!(matches!(cache.mode, Mode::Train), "backward needs a train-mode cache");
    if labels.len() != cache.samples.len() {
        return Err(ArrestError::ShapeMismatch("labels/batch length".into()));
    }
    let cfg = &p.config;
    let h = cfg.lstm_hidden;
    let n = cache.samples.len();
    let n_classes = cfg.n_classes;
    let out_ch_last = cfg.conv_channels[2];
    let mut grads = NetGrads::zeros_like(p);
    // trainable order: 0 w_ih, 1 w_hh, 2 b, then per block (w, b, gamma,
    // beta), then head.w, head.b
    let head_w_idx = 3 + 4 * p.blocks.len();

    // head and feature gradients
    let mut dfeat_all: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (s, &y) in cache.samples.iter().zip(labels) {
        if y as usize >= n_classes {
            return Err(ArrestError::ShapeMismatch(format!("label {y} out of range")));
        }
        let mut dlogits = s.probs.clone();
        dlogits[y as usize] -= 1.0;
        for d in dlogits.iter_mut() {
            *d /= n as f64;
        }
        let feat_len = s.feat.len();
        let mut dfeat = vec![0.0; feat_len];
        for k in 0..n_classes {
            *grads.tensors[head_w_idx + 1].at1_mut(k) += dlogits[k];
            for j in 0..feat_len {
                *grads.tensors[head_w_idx].at2_mut(k, j) += dlogits[k] * s.feat[j];
                dfeat[j] += p.head.w.at2(k, j) * dlogits[k];
            }
        }
        dfeat_all.push(dfeat);
    }

    // split the feature gradient: LSTM state (through dropout) + GAP
    let mut d_post: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n);
    let mut dh_final: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (s, dfeat) in cache.samples.iter().zip(&dfeat_all) {
        let mut dh = vec![0.0; h];
        for j in 0..h {
            dh[j] = dfeat[j] * s.dropout[j];
        }
        dh_final.push(dh);
        let l = s.post[2][0].len();
        let mut dp = vec![vec![0.0; l]; out_ch_last];
        for c in 0..out_ch_last {
            let g = dfeat[h + c] / s.valid as f64;
            for t in 0..s.valid {
                dp[c][t] = g;
            }
        }
        d_post.push(dp);
    }

    // conv blocks, last to first
    for bi in (0..p.blocks.len()).rev() {
        let blk = &p.blocks[bi];
        let out_ch = blk.b.len();
        let in_ch = blk.w.shape[1];
        let k = blk.w.shape[2];
        let pl = pad_left(k);
        let mean = &cache.bn_mean[bi];
        let var = &cache.bn_var[bi];
        let g_w = 3 + 4 * bi;

        // ReLU backward, then the batch reductions BN needs.
        let mut d_bn: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n);
        let mut sum_d = vec![0.0; out_ch];
        let mut sum_dx = vec![0.0; out_ch];
        let mut count = 0usize;
        for (s, dp) in cache.samples.iter().zip(&d_post) {
            count += s.valid;
            let l = dp[0].len();
            let mut db = vec![vec![0.0; l]; out_ch];
            for c in 0..out_ch {
                for t in 0..s.valid {
                    if s.post[bi][c][t] > 0.0 {
                        let d = dp[c][t];
                        db[c][t] = d;
                        sum_d[c] += d;
                        sum_dx[c] += d * s.xhat[bi][c][t];
                    }
                }
            }
            d_bn.push(db);
        }
        for c in 0..out_ch {
            *grads.tensors[g_w + 2].at1_mut(c) += sum_dx[c]; // gamma
            *grads.tensors[g_w + 3].at1_mut(c) += sum_d[c]; // beta
        }

        // out-of-place so every sample sees the same reductions
        let mut d_prev: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n);
        for (s, db) in cache.samples.iter().zip(&d_bn) {
            let l = db[0].len();
            let mut d_conv = vec![vec![0.0; l]; out_ch];
            for c in 0..out_ch {
                let inv_sd = 1.0 / (var[c] + BN_EPS).sqrt();
                let gam = blk.gamma.at1(c);
                let m = count as f64;
                for t in 0..s.valid {
                    // d/dx of batch norm with batch statistics
                    let dxhat = db[c][t] * gam;
                    d_conv[c][t] = inv_sd
                        * (dxhat
                            - gam * sum_d[c] / m
                            - s.xhat[bi][c][t] * gam * sum_dx[c] / m);
                }
            }
            // conv parameter and input gradients
            let mut d_in = vec![vec![0.0; l]; in_ch];
            for o in 0..out_ch {
                for t in 0..l {
                    let d = d_conv[o][t];
                    if d == 0.0 {
                        continue;
                    }
                    *grads.tensors[g_w + 1].at1_mut(o) += d;
                    for i in 0..in_ch {
                        for kk in 0..k {
                            let tin = t as i64 + kk as i64 - pl as i64;
                            if tin >= 0 && (tin as usize) < l {
                                let tin = tin as usize;
                                *grads.tensors[g_w].at3_mut(o, i, kk) +=
                                    d * s.conv_in[bi][i][tin];
                                d_in[i][tin] += blk.w.at3(o, i, kk) * d;
                            }
                        }
                    }
                }
            }
            // inputs were zeroed beyond the valid prefix
            for row in d_in.iter_mut() {
                for t in s.valid..l {
                    row[t] = 0.0;
                }
            }
            d_prev.push(d_in);
        }
        check_mean_ordering(mean);
        d_post = d_prev;
    }

    // LSTM BPTT
    let c_in = cfg.in_channels();
    for (s, dhf) in cache.samples.iter().zip(&dh_final) {
        let mut dh = dhf.clone();
        let mut dc = vec![0.0; h];
        for t in (0..s.valid).rev() {
            let [gi, gf, gg, go] = &s.gates[t];
            let tc = &s.tanh_c[t];
            let c_prev: &[f64] = if t == 0 { &[] } else { &s.cells[t - 1] };
            let h_prev: &[f64] = if t == 0 { &[] } else { &s.hiddens[t - 1] };
            let mut dz = vec![0.0; 4 * h];
            for j in 0..h {
                let do_ = dh[j] * tc[j];
                let dcj = dc[j] + dh[j] * go[j] * (1.0 - tc[j] * tc[j]);
                let di = dcj * gg[j];
                let df = dcj * if t == 0 { 0.0 } else { c_prev[j] };
                let dg = dcj * gi[j];
                dz[j] = di * gi[j] * (1.0 - gi[j]);
                dz[h + j] = df * gf[j] * (1.0 - gf[j]);
                dz[2 * h + j] = dg * (1.0 - gg[j] * gg[j]);
                dz[3 * h + j] = do_ * go[j] * (1.0 - go[j]);
                dc[j] = dcj * gf[j];
            }
            for (r, &dzr) in dz.iter().enumerate() {
                *grads.tensors[2].at1_mut(r) += dzr;
                for c in 0..c_in {
                    *grads.tensors[0].at2_mut(r, c) += dzr * s.x[c][t];
                }
                if t > 0 {
                    for j in 0..h {
                        *grads.tensors[1].at2_mut(r, j) += dzr * h_prev[j];
                    }
                }
            }
            let mut dh_new = vec![0.0; h];
            for j in 0..h {
                for (r, &dzr) in dz.iter().enumerate() {
                    dh_new[j] += p.lstm.w_hh.at2(r, j) * dzr;
                }
            }
            dh = dh_new;
        }
    }

    Ok(grads)
}

// The BN means are recomputed nowhere in backward; this is a cheap
// debug-time guard that the cache really carried per-channel stats.
fn check_mean_ordering(mean: &[f64]) {
    debug_assert!(mean.iter().all(|m| m.is_finite()));
}

impl Tensor {
    #[inline]
    pub(crate) fn at1_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

/// Forward + backward with a fixed dropout stream: the same
/// `dropout_seed` always produces the same loss, which is what both the
/// trainer and the finite-difference checks need.
pub fn loss_and_grads(
    p: &NetParams,
    xs: &[&SeriesSample],
    labels: &[u8],
    dropout_seed: u64,
) -> Result<(f64, NetGrads, BatchCache), ArrestError> {
    let mut rng = seeded_rng(dropout_seed);
    let (probs, cache) = forward_batch(p, xs, Mode::Train, Some(&mut rng))?;
    let loss = batch_loss(&probs, labels);
    let grads = backward_batch(p, &cache, labels)?;
    Ok((loss, grads, cache))
}

/// Loss only, same dropout convention (used by the gradient check).
pub fn loss_only(
    p: &NetParams,
    xs: &[&SeriesSample],
    labels: &[u8],
    dropout_seed: u64,
) -> Result<f64, ArrestError> {
    let mut rng = seeded_rng(dropout_seed);
    let (probs, _) = forward_batch(p, xs, Mode::Train, Some(&mut rng))?;
    Ok(batch_loss(&probs, labels))
}

/// Update running batch-norm statistics from the batch statistics in a
/// train-mode cache (`running = momentum * running + (1-m) * batch`).
pub fn update_running_stats(p: &mut NetParams, cache: &BatchCache, momentum: f64) {
    for (bi, blk) in p.blocks.iter_mut().enumerate() {
        for c in 0..blk.running_mean.len() {
            let rm = blk.running_mean.at1(c);
            let rv = blk.running_var.at1(c);
            *blk.running_mean.at1_mut(c) = momentum * rm + (1.0 - momentum) * cache.bn_mean[bi][c];
            *blk.running_var.at1_mut(c) = momentum * rv + (1.0 - momentum) * cache.bn_var[bi][c];
        }
    }
}
