//! Single-threaded Adam training loop. Determinism is contractual:
//! shuffling, dropout, and initialization all derive from the config
//! seeds, so identical seeds give identical loss histories.

use super::net::{batch_loss, forward_batch, loss_and_grads, update_running_stats, Mode};
use super::{argmax_low_tie, init_params, ArrestError, NetConfig, NetParams, SeriesSample, Tensor};
use crate::rng::{derive_seed, seeded_rng};
use super::TrainConfig;
use rand::Rng;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const BN_MOMENTUM: f64 = 0.9;

/// Loss history and end-of-training diagnostics.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TrainReport {
    /// Mean training loss per epoch.
    pub loss_history: Vec<f64>,
    /// Training-set accuracy in eval mode after the final epoch.
    pub train_accuracy: f64,
}

struct Adam {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: u64,
}

impl Adam {
    fn new(p: &NetParams) -> Self {
        let zeros: Vec<Tensor> = p
            .trainable()
            .iter()
            .map(|(_, t)| Tensor::zeros(&t.shape))
            .collect();
        Adam {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    fn step(&mut self, p: &mut NetParams, grads: &[Tensor], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        for ((tensor, g), (m, v)) in p
            .trainable_mut()
            .into_iter()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for i in 0..tensor.data.len() {
                let gi = g.data[i];
                m.data[i] = ADAM_BETA1 * m.data[i] + (1.0 - ADAM_BETA1) * gi;
                v.data[i] = ADAM_BETA2 * v.data[i] + (1.0 - ADAM_BETA2) * gi * gi;
                let mhat = m.data[i] / bc1;
                let vhat = v.data[i] / bc2;
                tensor.data[i] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
            }
        }
    }
}

/// Train the arrest network. Every sample must be labeled and at least
/// two classes must be present.
pub fn train(
    data: &[SeriesSample],
    net_cfg: &NetConfig,
    train_cfg: &TrainConfig,
) -> Result<(NetParams, TrainReport), ArrestError> {
    if train_cfg.epochs == 0 || train_cfg.batch_size == 0 || train_cfg.learning_rate <= 0.0 {
        return Err(ArrestError::InvalidConfig("train hyperparameters must be positive".into()));
    }
    let labels: Vec<u8> = data
        .iter()
        .map(|s| s.label.ok_or(ArrestError::DegenerateDataset))
        .collect::<Result<_, _>>()?;
    let mut seen = [false; 256];
    for &l in &labels {
        seen[l as usize] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(ArrestError::DegenerateDataset);
    }
    for s in data {
        s.check_shape(net_cfg)?;
    }

    let mut params = init_params(net_cfg)?;
    let mut adam = Adam::new(&params);
    let mut shuffle_rng = seeded_rng(derive_seed(train_cfg.seed, 0xD0));
    let mut loss_history = Vec::with_capacity(train_cfg.epochs);
    let mut step: u64 = 0;

    for _epoch in 0..train_cfg.epochs {
        let mut order: Vec<usize> = (0..data.len()).collect();
        // Fisher-Yates
        for i in (1..order.len()).rev() {
            let j = shuffle_rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        let mut n_batches = 0usize;
        for chunk in order.chunks(train_cfg.batch_size) {
            let xs: Vec<&SeriesSample> = chunk.iter().map(|&i| &data[i]).collect();
            let ys: Vec<u8> = chunk.iter().map(|&i| labels[i]).collect();
            let dropout_seed = derive_seed(train_cfg.seed, 0xD1_0000 + step);
            let (loss, grads, cache) = loss_and_grads(&params, &xs, &ys, dropout_seed)?;
            adam.step(&mut params, &grads.tensors, train_cfg.learning_rate);
            update_running_stats(&mut params, &cache, BN_MOMENTUM);
            epoch_loss += loss;
            n_batches += 1;
            step += 1;
        }
        loss_history.push(epoch_loss / n_batches as f64);
    }

    // eval-mode accuracy on the training set
    let refs: Vec<&SeriesSample> = data.iter().collect();
    let (probs, _) = forward_batch(&params, &refs, Mode::Eval, None)?;
    let correct = probs
        .iter()
        .zip(&labels)
        .filter(|(p, &y)| argmax_low_tie(p) == y)
        .count();
    let report = TrainReport {
        loss_history,
        train_accuracy: correct as f64 / data.len() as f64,
    };
    let _ = batch_loss(&probs, &labels);
    Ok((params, report))
}

#[cfg(test)]
mod tests {
    use super::super::{predict_arrest, InputMode, SeriesSample};
    use super::*;
    use crate::rng::{normal, seeded_rng};

    fn cfg() -> NetConfig {
        NetConfig {
            input_mode: InputMode::CycleFeatures,
            lstm_hidden: 6,
            conv_channels: [8, 12, 8],
            conv_kernels: [5, 3, 3],
            dropout_rate: 0.1,
            n_classes: 4,
            seed: 1,
        }
    }

    // Synthetic per-class interval patterns: class k has k "long interval"
    // spikes, the caricature of arrested movement the net must count.
    fn sample_for_class(class: u8, seed: u64) -> SeriesSample {
        let mut rng = seeded_rng(seed);
        let l = 10;
        let mut amp = vec![0.0; l];
        let mut int = vec![0.0; l];
        for t in 0..l {
            amp[t] = 1.0 + 0.05 * normal(&mut rng);
            int[t] = 0.3 + 0.02 * normal(&mut rng);
        }
        for s in 0..class {
            let pos = 1 + ((seed as usize + 3 * s as usize) % 8);
            int[pos] = 0.9 + 0.05 * normal(&mut rng);
        }
        let mut s = SeriesSample {
            channels: vec![amp, int],
            mask: vec![true; l],
            label: Some(class),
        };
        // normalize like from_cycles would
        for ch in s.channels.iter_mut() {
            let mean = ch.iter().sum::<f64>() / l as f64;
            let sd = (ch.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / l as f64).sqrt();
            for v in ch.iter_mut() {
                *v = (*v - mean) / sd.max(1e-12);
            }
        }
        s
    }

    fn dataset(per_class: usize, seed0: u64) -> Vec<SeriesSample> {
        let mut out = Vec::new();
        for class in 0..4u8 {
            for i in 0..per_class {
                out.push(sample_for_class(class, seed0 + class as u64 * 1000 + i as u64));
            }
        }
        out
    }

    #[test]
    fn overfits_small_dataset() {
        let data = dataset(10, 5);
        let tc = TrainConfig {
            epochs: 200,
            batch_size: 8,
            learning_rate: 0.01,
            seed: 3,
        };
        let (params, report) = train(&data, &cfg(), &tc).unwrap();
        assert_eq!(report.loss_history.len(), 200);
        assert!(
            report.train_accuracy == 1.0,
            "expected full overfit, got {}",
            report.train_accuracy
        );
        assert!(report.loss_history.last().unwrap() < &report.loss_history[0]);
        // reuse the trained net to confirm predict agrees with labels
        for s in &data {
            assert_eq!(predict_arrest(&params, s).unwrap(), s.label.unwrap());
        }
    }

    #[test]
    fn resampled_signal_mode_trains() {
        // one-channel, length-64 inputs through the same machinery
        let cfg = NetConfig {
            input_mode: InputMode::ResampledSignal,
            lstm_hidden: 4,
            conv_channels: [6, 8, 6],
            conv_kernels: [8, 5, 3],
            dropout_rate: 0.1,
            n_classes: 4,
            seed: 2,
        };
        let mut rng = seeded_rng(6);
        let mut data = Vec::new();
        for class in 0..4u8 {
            for _ in 0..6 {
                // class controls the oscillation frequency of the raw signal
                let freq = 1.0 + class as f64;
                let values: Vec<f64> = (0..90)
                    .map(|t| (t as f64 * 0.07 * freq).sin() + 0.05 * normal(&mut rng))
                    .collect();
                let mut s = super::super::SeriesSample::from_signal(&values, Some(class)).unwrap();
                s.label = Some(class);
                data.push(s);
            }
        }
        let tc = TrainConfig {
            epochs: 40,
            batch_size: 8,
            learning_rate: 0.02,
            seed: 5,
        };
        let (params, report) = train(&data, &cfg, &tc).unwrap();
        assert!(report.loss_history.last().unwrap() < &report.loss_history[0]);
        assert!(report.train_accuracy > 0.75, "accuracy {}", report.train_accuracy);
        let probs = super::super::forward(&params, &data[0]).unwrap();
        assert_eq!(probs.len(), 4);
    }

    #[test]
    fn single_class_dataset_is_degenerate() {
        let data: Vec<SeriesSample> = (0..8).map(|i| sample_for_class(1, i)).collect();
        let err = train(&data, &cfg(), &TrainConfig::default());
        assert!(matches!(err, Err(ArrestError::DegenerateDataset)));
    }

    #[test]
    fn training_is_deterministic() {
        let data = dataset(4, 77);
        let tc = TrainConfig {
            epochs: 10,
            batch_size: 4,
            learning_rate: 0.01,
            seed: 9,
        };
        let (p1, r1) = train(&data, &cfg(), &tc).unwrap();
        let (p2, r2) = train(&data, &cfg(), &tc).unwrap();
        assert_eq!(r1.loss_history, r2.loss_history);
        assert_eq!(p1, p2);
    }

    #[test]
    fn zero_learning_rate_step_leaves_loss_unchanged() {
        let data = dataset(4, 13);
        let refs: Vec<&SeriesSample> = data.iter().collect();
        let ys: Vec<u8> = data.iter().map(|s| s.label.unwrap()).collect();
        let mut params = super::init_params(&cfg()).unwrap();
        let (l1, grads, _) = loss_and_grads(&params, &refs, &ys, 7).unwrap();
        let before = params.clone();
        let mut adam = Adam::new(&params);
        adam.step(&mut params, &grads.tensors, 0.0);
        assert_eq!(params, before);
        let (l2, _, _) = loss_and_grads(&params, &refs, &ys, 7).unwrap();
        assert_eq!(l1, l2);
    }
}
