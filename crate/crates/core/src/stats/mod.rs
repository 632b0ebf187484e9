//! Statistical validation: the semiparametric ordinal regression used to
//! test feature significance, bootstrap inference, the random-intercept
//! model for prediction-vs-expert differences, and evaluation metrics.

pub mod bootstrap;
pub mod bspline;
pub mod metrics;
pub mod mixed;
pub mod plam;

pub use bootstrap::{bootstrap_inference, BootstrapResult};
pub use metrics::{binary_auc, confusion_and_accuracy, eval_report, EvalReport, RocPoint};
pub use mixed::{fit_mixed, MixedModel};
pub use plam::{deviance, deviance_explained, fit_plam, null_deviance, PlamConfig, PlamModel};

use serde::Serialize;
use thiserror::Error;

use crate::features::FeatureRow;
use crate::landmark::{MovementKind, Side};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("too few rows: {n} (need >= {need})")]
    TooFewRows { n: usize, need: usize },
    #[error("all four score levels must be present")]
    MissingLevels,
    #[error("backfitting did not converge within the cycle budget")]
    NonConvergence { history: Vec<f64> },
    #[error("bootstrap unstable: {skipped} of {total} replicates failed")]
    BootstrapUnstable { skipped: usize, total: usize },
    #[error("groups are degenerate: need >= 1 group with >= 2 observations each")]
    DegenerateGroups,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("both binary classes must be present")]
    SingleClass,
    #[error("bad input: {0}")]
    BadInput(String),
}

/// One movement-by-side cell of the significance report.
#[derive(Debug, Clone, Serialize)]
pub struct SignificanceCell {
    pub movement: MovementKind,
    pub side: Side,
    pub n_rows: usize,
    pub fatigue_p: Option<f64>,
    pub arrest_cat1_p: Option<f64>,
    pub arrest_cat2_p: Option<f64>,
    pub arrest_cat3_p: Option<f64>,
    pub deviance_explained: Option<f64>,
    pub skipped_replicates: usize,
    /// Present when this cell could not be fit (too few rows, missing
    /// levels, unstable bootstrap).
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SignificanceReport {
    pub bootstrap_replicates: usize,
    pub cells: Vec<SignificanceCell>,
}

/// Fit the additive ordinal model with bootstrap inference per
/// (movement, side) cell, mirroring the per-task significance table.
/// Rows without an arrest label or expert score are skipped.
pub fn significance_table(
    rows: &[FeatureRow],
    cfg: &PlamConfig,
    seed: u64,
) -> SignificanceReport {
    let mut cells = Vec::new();
    for movement in MovementKind::ALL {
        for side in [Side::Left, Side::Right] {
            let subset: Vec<(crate::FeatureVector, u8)> = rows
                .iter()
                .filter(|r| r.movement == movement && r.side == side)
                .filter_map(|r| Some((r.feature_vector()?, r.score?)))
                .collect();
            if subset.is_empty() {
                continue;
            }
            let cell = match bootstrap_inference(&subset, cfg, cfg.bootstrap_b, seed) {
                Ok((model, boot)) => SignificanceCell {
                    movement,
                    side,
                    n_rows: subset.len(),
                    fatigue_p: Some(boot.p_values[0]),
                    arrest_cat1_p: Some(boot.p_values[1]),
                    arrest_cat2_p: Some(boot.p_values[2]),
                    arrest_cat3_p: Some(boot.p_values[3]),
                    deviance_explained: Some(deviance_explained(&model, &subset)),
                    skipped_replicates: boot.n_skipped,
                    error: None,
                },
                Err(e) => SignificanceCell {
                    movement,
                    side,
                    n_rows: subset.len(),
                    fatigue_p: None,
                    arrest_cat1_p: None,
                    arrest_cat2_p: None,
                    arrest_cat3_p: None,
                    deviance_explained: None,
                    skipped_replicates: 0,
                    error: Some(e.to_string()),
                },
            };
            cells.push(cell);
        }
    }
    SignificanceReport {
        bootstrap_replicates: cfg.bootstrap_b,
        cells,
    }
}
