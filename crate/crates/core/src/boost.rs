//! Gradient-boosted decision trees over the six-feature vector: the
//! top-level classifier mapping features to the bradykinesia score 0-3.
//!
//! Multiclass softmax boosting with second-order leaf weights: each round
//! fits one regression tree per class to the gradient/hessian of the
//! cross-entropy, leaves take the Newton value `-G / (H + lambda)`, and
//! split finding is exact greedy over sorted unique feature values (the
//! datasets here are small). The arrest category enters one-hot, so trees
//! see nine inputs. Everything is deterministic given the seed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureVector;
use crate::rng::{derive_seed, seeded_rng};
use rand::Rng;

/// Number of score classes.
pub const N_CLASSES: usize = 4;
/// Tree input width: four summary statistics, fatigue, one-hot arrest.
pub const N_FEATURES: usize = 9;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "mean_amp", "rsd_amp", "mean_int", "rsd_int", "fatigue", "arrest_0", "arrest_1", "arrest_2",
    "arrest_3",
];

/// Expand a feature vector into the tree input layout.
pub fn expand_features(f: &FeatureVector) -> [f64; N_FEATURES] {
    let mut out = [0.0; N_FEATURES];
    out[0] = f.mean_amp;
    out[1] = f.rsd_amp;
    out[2] = f.mean_int;
    out[3] = f.rsd_int;
    out[4] = f.fatigue;
    out[5 + f.arrest as usize] = 1.0;
    out
}

/// Boosting hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoostConfig {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub lambda_l2: f64,
    pub seed: u64,
    /// Tree input indices the split finder may use. The default is all
    /// nine; ablation studies restrict this to the four summary
    /// statistics.
    pub active_features: Vec<usize>,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            n_rounds: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_leaf: 2,
            lambda_l2: 1.0,
            seed: 42,
            active_features: (0..N_FEATURES).collect(),
        }
    }
}

impl BoostConfig {
    /// The summary-statistics-only variant used by the ablation study.
    pub fn ablated(mut self) -> Self {
        self.active_features = vec![0, 1, 2, 3];
        self
    }

    fn validate(&self) -> Result<(), BoostError> {
        if self.learning_rate <= 0.0 || self.lambda_l2 < 0.0 || self.max_depth == 0 {
            return Err(BoostError::InvalidConfig(
                "learning_rate, lambda_l2 and max_depth must be positive".into(),
            ));
        }
        if self.active_features.is_empty()
            || self.active_features.iter().any(|&f| f >= N_FEATURES)
        {
            return Err(BoostError::InvalidConfig("bad active_features".into()));
        }
        Ok(())
    }
}

/// Node of a regression tree. `feature < 0` marks a leaf carrying
/// `value`; interior nodes route `x[feature] < threshold` to `left`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub feature: i32,
    pub threshold: f64,
    pub left: i32,
    pub right: i32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64; N_FEATURES]) -> f64 {
        let mut idx = 0usize;
        loop {
            let n = &self.nodes[idx];
            if n.feature < 0 {
                return n.value;
            }
            idx = if x[n.feature as usize] < n.threshold {
                n.left as usize
            } else {
                n.right as usize
            };
        }
    }
}

/// Version tag of the JSON model file.
pub const BOOST_MODEL_VERSION: u32 = 1;

/// The fitted classifier: per-round, per-class trees plus base scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub format_version: u32,
    pub config: BoostConfig,
    pub base_score: [f64; N_CLASSES],
    /// `rounds[r][k]` is the round-r tree for class k.
    pub rounds: Vec<Vec<Tree>>,
    /// Multiclass log-loss on the training set after each round.
    pub train_loss: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum BoostError {
    #[error("invalid boosting config: {0}")]
    InvalidConfig(String),
    #[error("dataset is degenerate: needs >= 2 distinct classes and finite features")]
    DegenerateDataset,
    #[error("class {class} has only {count} members, need >= {k} for {k} folds")]
    ClassTooSmall { class: u8, count: usize, k: usize },
    #[error("model file is corrupt: {0}")]
    ModelFormat(String),
    #[error("unsupported model version {found}")]
    VersionMismatch { found: u32 },
}

fn softmax(scores: &[f64; N_CLASSES]) -> [f64; N_CLASSES] {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; N_CLASSES];
    let mut z = 0.0;
    for k in 0..N_CLASSES {
        out[k] = (scores[k] - max).exp();
        z += out[k];
    }
    for o in out.iter_mut() {
        *o /= z;
    }
    out
}

/// Multiclass log-loss of raw margins against labels.
fn log_loss(margins: &[[f64; N_CLASSES]], labels: &[u8]) -> f64 {
    margins
        .iter()
        .zip(labels)
        .map(|(m, &y)| -(softmax(m)[y as usize].max(1e-300)).ln())
        .sum::<f64>()
        / labels.len() as f64
}

struct SplitCandidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct TreeBuilder<'a> {
    x: &'a [[f64; N_FEATURES]],
    grad: &'a [f64],
    hess: &'a [f64],
    cfg: &'a BoostConfig,
    nodes: Vec<Node>,
}

impl<'a> TreeBuilder<'a> {
    fn leaf_value(&self, idx: &[usize]) -> f64 {
        let g: f64 = idx.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = idx.iter().map(|&i| self.hess[i]).sum();
        -g / (h + self.cfg.lambda_l2)
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.cfg.lambda_l2)
    }

    fn best_split(&self, idx: &[usize]) -> Option<SplitCandidate> {
        let g_total: f64 = idx.iter().map(|&i| self.grad[i]).sum();
        let h_total: f64 = idx.iter().map(|&i| self.hess[i]).sum();
        let parent = self.score(g_total, h_total);
        let mut best: Option<SplitCandidate> = None;
        for &f in &self.cfg.active_features {
            let mut order: Vec<usize> = idx.to_vec();
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut gl = 0.0;
            let mut hl = 0.0;
            for (pos, &i) in order.iter().enumerate().take(order.len() - 1) {
                gl += self.grad[i];
                hl += self.hess[i];
                let here = self.x[i][f];
                let next = self.x[order[pos + 1]][f];
                if here == next {
                    continue;
                }
                let n_left = pos + 1;
                let n_right = order.len() - n_left;
                if n_left < self.cfg.min_leaf || n_right < self.cfg.min_leaf {
                    continue;
                }
                let gain =
                    0.5 * (self.score(gl, hl) + self.score(g_total - gl, h_total - hl) - parent);
                if gain > 1e-12 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(SplitCandidate {
                        feature: f,
                        threshold: 0.5 * (here + next),
                        gain,
                    });
                }
            }
        }
        best
    }

    fn build(&mut self, idx: &[usize], depth: usize) -> i32 {
        let split = if depth < self.cfg.max_depth && idx.len() >= 2 * self.cfg.min_leaf {
            self.best_split(idx)
        } else {
            None
        };
        let node_id = self.nodes.len() as i32;
        match split {
            None => {
                self.nodes.push(Node {
                    feature: -1,
                    threshold: 0.0,
                    left: -1,
                    right: -1,
                    value: self.leaf_value(idx),
                });
                node_id
            }
            Some(s) => {
                self.nodes.push(Node {
                    feature: s.feature as i32,
                    threshold: s.threshold,
                    left: -1,
                    right: -1,
                    value: 0.0,
                });
                let (l_idx, r_idx): (Vec<usize>, Vec<usize>) = idx
                    .iter()
                    .partition(|&&i| self.x[i][s.feature] < s.threshold);
                let left = self.build(&l_idx, depth + 1);
                let right = self.build(&r_idx, depth + 1);
                self.nodes[node_id as usize].left = left;
                self.nodes[node_id as usize].right = right;
                node_id
            }
        }
    }
}

/// Fit the boosted ensemble. Requires at least two distinct classes and
/// finite features.
pub fn fit(data: &[(FeatureVector, u8)], cfg: &BoostConfig) -> Result<TreeEnsemble, BoostError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(BoostError::DegenerateDataset);
    }
    let mut class_counts = [0usize; N_CLASSES];
    for (f, y) in data {
        if !f.is_finite() || *y as usize >= N_CLASSES {
            return Err(BoostError::DegenerateDataset);
        }
        class_counts[*y as usize] += 1;
    }
    if class_counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(BoostError::DegenerateDataset);
    }

    let n = data.len();
    let x: Vec<[f64; N_FEATURES]> = data.iter().map(|(f, _)| expand_features(f)).collect();
    let labels: Vec<u8> = data.iter().map(|(_, y)| *y).collect();

    let mut base_score = [0.0; N_CLASSES];
    for k in 0..N_CLASSES {
        base_score[k] = (class_counts[k] as f64 / n as f64).max(1e-12).ln();
    }

    let mut margins = vec![base_score; n];
    let mut rounds = Vec::with_capacity(cfg.n_rounds);
    let mut train_loss = Vec::with_capacity(cfg.n_rounds);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let all_idx: Vec<usize> = (0..n).collect();

    for _round in 0..cfg.n_rounds {
        let probs: Vec<[f64; N_CLASSES]> = margins.iter().map(softmax).collect();
        let mut class_trees = Vec::with_capacity(N_CLASSES);
        for k in 0..N_CLASSES {
            for i in 0..n {
                let p = probs[i][k];
                let y = if labels[i] as usize == k { 1.0 } else { 0.0 };
                grad[i] = p - y;
                hess[i] = p * (1.0 - p);
            }
            let mut builder = TreeBuilder {
                x: &x,
                grad: &grad,
                hess: &hess,
                cfg,
                nodes: Vec::new(),
            };
            builder.build(&all_idx, 0);
            let tree = Tree {
                nodes: builder.nodes,
            };
            for i in 0..n {
                margins[i][k] += cfg.learning_rate * tree.predict(&x[i]);
            }
            class_trees.push(tree);
        }
        rounds.push(class_trees);
        train_loss.push(log_loss(&margins, &labels));
    }

    Ok(TreeEnsemble {
        format_version: BOOST_MODEL_VERSION,
        config: cfg.clone(),
        base_score,
        rounds,
        train_loss,
    })
}

/// Predict the score and class probabilities for one feature vector.
/// Ties break toward the lower class.
pub fn predict(m: &TreeEnsemble, f: &FeatureVector) -> (u8, [f64; N_CLASSES]) {
    let x = expand_features(f);
    let mut scores = m.base_score;
    for round in &m.rounds {
        for (k, tree) in round.iter().enumerate() {
            scores[k] += m.config.learning_rate * tree.predict(&x);
        }
    }
    let probs = softmax(&scores);
    let mut best = 0usize;
    for k in 1..N_CLASSES {
        if probs[k] > probs[best] {
            best = k;
        }
    }
    (best as u8, probs)
}

/// Probability assigned to the severe half {2, 3}; the score used for the
/// mild-vs-severe ROC.
pub fn severe_probability(probs: &[f64; N_CLASSES]) -> f64 {
    probs[2] + probs[3]
}

/// Stratified k-fold assignment: per-class counts across folds differ by
/// at most one, and fold membership (as a set of samples) depends only on
/// the data values and the seed, not the input order.
pub fn stratified_kfold(
    data: &[(FeatureVector, u8)],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, BoostError> {
    assert!(k >= 2, "need at least two folds");
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); N_CLASSES];
    for (i, (_, y)) in data.iter().enumerate() {
        by_class[*y as usize].push(i);
    }
    for (class, members) in by_class.iter().enumerate() {
        if !members.is_empty() && members.len() < k {
            return Err(BoostError::ClassTooSmall {
                class: class as u8,
                count: members.len(),
                k,
            });
        }
    }
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (class, mut members) in by_class.into_iter().enumerate() {
        // canonical order first, so permuted inputs land identically
        members.sort_by(|&a, &b| {
            let fa = expand_features(&data[a].0);
            let fb = expand_features(&data[b].0);
            fa.iter()
                .zip(fb.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| !o.is_eq())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut rng = seeded_rng(derive_seed(seed, class as u64));
        for i in (1..members.len()).rev() {
            let j = rng.random_range(0..=i);
            members.swap(i, j);
        }
        let offset = rng.random_range(0..k);
        for (pos, idx) in members.into_iter().enumerate() {
            folds[(pos + offset) % k].push(idx);
        }
    }
    for fold in folds.iter_mut() {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// Serialize the model as JSON.
pub fn save_model<W: std::io::Write>(m: &TreeEnsemble, w: W) -> Result<(), BoostError> {
    serde_json::to_writer_pretty(w, m).map_err(|e| BoostError::ModelFormat(e.to_string()))
}

/// Load and version-check a JSON model.
pub fn load_model<R: std::io::Read>(r: R) -> Result<TreeEnsemble, BoostError> {
    let m: TreeEnsemble =
        serde_json::from_reader(r).map_err(|e| BoostError::ModelFormat(e.to_string()))?;
    if m.format_version != BOOST_MODEL_VERSION {
        return Err(BoostError::VersionMismatch {
            found: m.format_version,
        });
    }
    Ok(m)
}

/// Human-readable dump of every tree, for auditing fitted models.
pub fn export_text(m: &TreeEnsemble) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "boosted ensemble: {} rounds x {} classes, learning rate {}\n",
        m.rounds.len(),
        N_CLASSES,
        m.config.learning_rate
    ));
    out.push_str(&format!("base scores: {:?}\n", m.base_score));
    for (r, round) in m.rounds.iter().enumerate() {
        for (k, tree) in round.iter().enumerate() {
            out.push_str(&format!("round {r} class {k}:\n"));
            dump_node(tree, 0, 1, &mut out);
        }
    }
    out
}

fn dump_node(tree: &Tree, idx: usize, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    let n = &tree.nodes[idx];
    if n.feature < 0 {
        out.push_str(&format!("{pad}leaf: {:+.6}\n", n.value));
    } else {
        out.push_str(&format!(
            "{pad}if {} < {:.6}:\n",
            FEATURE_NAMES[n.feature as usize], n.threshold
        ));
        dump_node(tree, n.left as usize, depth + 1, out);
        out.push_str(&format!("{pad}else:\n"));
        dump_node(tree, n.right as usize, depth + 1, out);
    }
}
