//! Evaluation metrics: 4x4 confusion matrix, exact and within-one
//! accuracy, and the mild-vs-severe ROC/AUC (scores {0,1} against {2,3}).

use serde::Serialize;

use super::StatsError;

/// One ROC operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    /// `confusion[truth][pred]`.
    pub confusion: [[usize; 4]; 4],
    pub exact_accuracy: f64,
    /// Fraction with |pred - truth| <= 1.
    pub within_one_accuracy: f64,
    pub roc: Vec<RocPoint>,
    pub auc: f64,
    pub n: usize,
}

/// Confusion matrix plus the two accuracies.
pub fn confusion_and_accuracy(
    truth: &[u8],
    pred: &[u8],
) -> Result<([[usize; 4]; 4], f64, f64), StatsError> {
    if truth.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if truth.len() != pred.len() {
        return Err(StatsError::LengthMismatch {
            left: truth.len(),
            right: pred.len(),
        });
    }
    let mut confusion = [[0usize; 4]; 4];
    let mut exact = 0usize;
    let mut within = 0usize;
    for (&t, &p) in truth.iter().zip(pred) {
        if t > 3 || p > 3 {
            return Err(StatsError::BadInput(format!("score out of range: {t}/{p}")));
        }
        confusion[t as usize][p as usize] += 1;
        if t == p {
            exact += 1;
        }
        if (t as i8 - p as i8).abs() <= 1 {
            within += 1;
        }
    }
    let n = truth.len() as f64;
    Ok((confusion, exact as f64 / n, within as f64 / n))
}

/// Map a score to the binary severe class.
pub fn is_severe(score: u8) -> bool {
    score >= 2
}

/// ROC points and AUC for the mild-vs-severe task. `score` is the
/// predicted probability (or any monotone score) of the severe class.
/// AUC uses midranks, so ties get half credit, exactly matching the
/// pairwise count.
pub fn binary_auc(truth: &[u8], score: &[f64]) -> Result<(Vec<RocPoint>, f64), StatsError> {
    if truth.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if truth.len() != score.len() {
        return Err(StatsError::LengthMismatch {
            left: truth.len(),
            right: score.len(),
        });
    }
    let labels: Vec<bool> = truth.iter().map(|&t| is_severe(t)).collect();
    let n_pos = labels.iter().filter(|&&p| p).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(StatsError::SingleClass);
    }

    // midrank Mann-Whitney
    let mut order: Vec<usize> = (0..score.len()).collect();
    order.sort_by(|&a, &b| score[a].total_cmp(&score[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && score[order[j + 1]] == score[order[i]] {
            j += 1;
        }
        // ranks are 1-based; tied block shares the average rank
        let midrank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    let auc = u / (n_pos as f64 * n_neg as f64);

    // ROC sweep over descending unique thresholds
    let mut desc = order;
    desc.reverse();
    let mut roc = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < desc.len() {
        let mut j = i;
        while j + 1 < desc.len() && score[desc[j + 1]] == score[desc[i]] {
            j += 1;
        }
        for &idx in &desc[i..=j] {
            if labels[idx] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        roc.push(RocPoint {
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
        i = j + 1;
    }
    Ok((roc, auc))
}

/// Full evaluation report for one movement (or pooled).
pub fn eval_report(truth: &[u8], pred: &[u8], severe_score: &[f64]) -> Result<EvalReport, StatsError> {
    let (confusion, exact_accuracy, within_one_accuracy) = confusion_and_accuracy(truth, pred)?;
    let (roc, auc) = binary_auc(truth, severe_score)?;
    Ok(EvalReport {
        confusion,
        exact_accuracy,
        within_one_accuracy,
        roc,
        auc,
        n: truth.len(),
    })
}

/// Trapezoidal area under a ROC polyline (cross-check for the rank AUC).
pub fn trapezoid_area(roc: &[RocPoint]) -> f64 {
    roc.windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) * 0.5)
        .sum()
}
