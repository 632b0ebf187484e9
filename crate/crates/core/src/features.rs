//! The six-feature vector consumed by the final classifier: mean and
//! relative standard deviation of amplitude and interval, the fatigue
//! score, and the arrest category.
//!
//! Fatigue quantifies early decrement: a window of five amplitudes
//! slides over the (at most ten) cycles, each window contributing
//! `-beta^3 / (sqrt(i+1) * (loc_amp/amp)^2)` when its regression slope is
//! significant at the 0.1 level. Earlier windows weigh more, so the same
//! decrement scores higher when it starts sooner.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::student_t_p_two_sided;
use crate::landmark::{MovementKind, Side};
use crate::signal::CycleSeries;

/// Width of the sliding regression window.
pub const FATIGUE_WINDOW: usize = 5;
/// Significance level gating a window's contribution.
pub const FATIGUE_GATE: f64 = 0.1;

/// Input feature set of the bradykinesia classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub mean_amp: f64,
    pub rsd_amp: f64,
    pub mean_int: f64,
    pub rsd_int: f64,
    pub fatigue: f64,
    /// Arrest category 0-3 (network prediction or expert label).
    pub arrest: u8,
}

impl FeatureVector {
    pub fn is_finite(&self) -> bool {
        self.mean_amp.is_finite()
            && self.rsd_amp.is_finite()
            && self.mean_int.is_finite()
            && self.rsd_int.is_finite()
            && self.fatigue.is_finite()
            && self.arrest <= 3
    }
}

/// Local regression result for one fatigue window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSlope {
    pub beta: f64,
    pub p_value: f64,
    pub window_index: usize,
    pub loc_amp: f64,
    pub amp: f64,
}

/// Fatigue value plus a data-quality flag for recordings with fewer than
/// five usable cycles (the feature is defined as zero there).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FatigueResult {
    pub value: f64,
    pub insufficient_cycles: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    pub mean_amp: f64,
    pub rsd_amp: f64,
    pub mean_int: f64,
    pub rsd_int: f64,
}

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("insufficient cycles: need >= 2 amplitudes and >= 1 interval")]
    InsufficientCycles,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn population_sd(xs: &[f64], m: f64) -> f64 {
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Mean and relative standard deviation (population sd / mean) of the
/// amplitude and interval series.
pub fn summary_stats(c: &CycleSeries) -> Result<SummaryStats, FeatureError> {
    if c.amplitudes.len() < 2 || c.intervals.is_empty() {
        return Err(FeatureError::InsufficientCycles);
    }
    let mean_amp = mean(&c.amplitudes);
    let mean_int = mean(&c.intervals);
    Ok(SummaryStats {
        mean_amp,
        rsd_amp: population_sd(&c.amplitudes, mean_amp) / mean_amp,
        mean_int,
        rsd_int: population_sd(&c.intervals, mean_int) / mean_int,
    })
}

/// OLS slope of `y` on 0..len-1 with the two-sided p-value of the slope
/// (t statistic, len-2 degrees of freedom). Exact fits report p = 0
/// unless the slope itself is zero, which reports p = 1.
fn ols_slope(y: &[f64]) -> (f64, f64) {
    let n = y.len();
    debug_assert!(n >= 3);
    let nf = n as f64;
    let x_mean = (nf - 1.0) / 2.0;
    let y_mean = mean(y);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, &v) in y.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (v - y_mean);
        sxx += dx * dx;
    }
    let beta = sxy / sxx;
    let intercept = y_mean - beta * x_mean;
    let rss: f64 = y
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let r = v - (intercept + beta * i as f64);
            r * r
        })
        .sum();
    let df = nf - 2.0;
    // Scale-aware zero-residual threshold.
    let scale = y.iter().map(|v| v * v).sum::<f64>().max(1e-300);
    if rss <= 1e-24 * scale {
        return (beta, if beta.abs() <= 1e-12 * scale.sqrt() { 1.0 } else { 0.0 });
    }
    let se = (rss / df / sxx).sqrt();
    let t = beta / se;
    (beta, student_t_p_two_sided(t, df))
}

/// Local regression over one five-amplitude window.
pub fn local_slope(window: &[f64; FATIGUE_WINDOW], window_index: usize, amp_mean: f64) -> LocalSlope {
    let (beta, p_value) = ols_slope(window);
    LocalSlope {
        beta,
        p_value,
        window_index,
        loc_amp: mean(window),
        amp: amp_mean,
    }
}

/// Fatigue feature over an amplitude series with the default window and
/// gate.
pub fn fatigue_feature(amplitudes: &[f64]) -> FatigueResult {
    fatigue_feature_with(amplitudes, FATIGUE_WINDOW, FATIGUE_GATE)
}

/// Fatigue feature with explicit window size and significance gate.
/// Windows slide with stride 1; window `i` contributes
/// `-beta^3 / (sqrt(i+1) * (loc_amp/amp)^2)` iff `p < gate`.
pub fn fatigue_feature_with(amplitudes: &[f64], window: usize, gate: f64) -> FatigueResult {
    assert!(window >= 3, "fatigue window must be >= 3");
    if amplitudes.len() < window {
        return FatigueResult {
            value: 0.0,
            insufficient_cycles: true,
        };
    }
    let amp = mean(amplitudes);
    let mut value = 0.0;
    for (i, w) in amplitudes.windows(window).enumerate() {
        let (beta, p) = ols_slope(w);
        if p < gate {
            let loc_amp = mean(w);
            let weight = ((i + 1) as f64).sqrt() * (loc_amp / amp).powi(2);
            value += -(beta * beta * beta) / weight;
        }
    }
    FatigueResult {
        value,
        insufficient_cycles: false,
    }
}

/// One row of the feature CSV, the interchange format between pipeline
/// stages: `subject_id, movement, side, mean_amp, rsd_amp, mean_int,
/// rsd_int, fatigue, arrest, score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub subject_id: String,
    pub movement: MovementKind,
    pub side: Side,
    pub mean_amp: f64,
    pub rsd_amp: f64,
    pub mean_int: f64,
    pub rsd_int: f64,
    pub fatigue: f64,
    pub arrest: Option<u8>,
    pub score: Option<u8>,
}

impl FeatureRow {
    /// The classifier feature vector, requiring the arrest column.
    pub fn feature_vector(&self) -> Option<FeatureVector> {
        Some(FeatureVector {
            mean_amp: self.mean_amp,
            rsd_amp: self.rsd_amp,
            mean_int: self.mean_int,
            rsd_int: self.rsd_int,
            fatigue: self.fatigue,
            arrest: self.arrest?,
        })
    }
}

/// Write feature rows as CSV.
pub fn write_feature_csv<W: std::io::Write>(
    rows: &[FeatureRow],
    w: W,
) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Read feature rows from CSV.
pub fn read_feature_csv<R: std::io::Read>(r: R) -> Result<Vec<FeatureRow>, csv::Error> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize().collect()
}
