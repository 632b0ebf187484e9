//! Wiring between the stages: recording -> distance signal -> smoothed
//! signal -> extrema -> cycles -> feature vector. Used by the CLI, the
//! examples, and the end-to-end tests.

use thiserror::Error;

use crate::config::PipelineConfig;
use crate::features::{
    fatigue_feature_with, summary_stats, FeatureError, FeatureRow, FeatureVector,
};
use crate::landmark::Recording;
use crate::signal::{
    cycles, detect_extrema, distance_signal_with, savgol_smooth, CycleSeries, DistanceSeries,
    ExtremaSet, SignalError, SmoothedSeries,
};

/// Every intermediate product of cycle extraction, kept for debugging
/// dumps and the arrest-network inputs.
#[derive(Debug, Clone)]
pub struct CycleExtraction {
    pub distance: DistanceSeries,
    pub smoothed: SmoothedSeries,
    pub extrema: ExtremaSet,
    pub cycles: CycleSeries,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Run the signal stage of the pipeline on one recording.
pub fn extract_cycles(r: &Recording, cfg: &PipelineConfig) -> Result<CycleExtraction, PipelineError> {
    let filter = cfg.filter_for(r.movement);
    let distance = distance_signal_with(r, cfg.rapid_am_flip_orientation)?;
    let smoothed = savgol_smooth(&distance, filter.window, filter.polyorder)?;
    let extrema = detect_extrema(&smoothed, &cfg.extrema)?;
    let cyc = cycles(&smoothed, &extrema)?;
    Ok(CycleExtraction {
        distance,
        smoothed,
        extrema,
        cycles: cyc,
    })
}

/// Assemble the classifier features from extracted cycles plus an arrest
/// category. The boolean flags a fatigue value defaulted to zero because
/// fewer than `fatigue.window` cycles were available.
pub fn features_from_cycles(
    c: &CycleSeries,
    arrest: u8,
    cfg: &PipelineConfig,
) -> Result<(FeatureVector, bool), PipelineError> {
    let stats = summary_stats(c)?;
    let fatigue = fatigue_feature_with(&c.amplitudes, cfg.fatigue.window, cfg.fatigue.gate);
    Ok((
        FeatureVector {
            mean_amp: stats.mean_amp,
            rsd_amp: stats.rsd_amp,
            mean_int: stats.mean_int,
            rsd_int: stats.rsd_int,
            fatigue: fatigue.value,
            arrest,
        },
        fatigue.insufficient_cycles,
    ))
}

/// Full per-recording feature row. The arrest column comes from
/// `arrest_override` when given (e.g. a network prediction), otherwise
/// from the recording's own label when present.
pub fn feature_row(
    r: &Recording,
    cfg: &PipelineConfig,
    arrest_override: Option<u8>,
) -> Result<(FeatureRow, CycleExtraction, bool), PipelineError> {
    let extraction = extract_cycles(r, cfg)?;
    let arrest = arrest_override.or(r.arrest);
    let stats = summary_stats(&extraction.cycles)?;
    let fatigue = fatigue_feature_with(
        &extraction.cycles.amplitudes,
        cfg.fatigue.window,
        cfg.fatigue.gate,
    );
    let row = FeatureRow {
        subject_id: r.subject_id.clone(),
        movement: r.movement,
        side: r.side,
        mean_amp: stats.mean_amp,
        rsd_amp: stats.rsd_amp,
        mean_int: stats.mean_int,
        rsd_int: stats.rsd_int,
        fatigue: fatigue.value,
        arrest,
        score: r.score,
    };
    Ok((row, extraction, fatigue.insufficient_cycles))
}

/// Debug CSV of the signal stage: `frame,raw,smoothed,is_peak,is_trough`.
pub fn debug_csv(e: &CycleExtraction) -> String {
    let mut out = String::from("frame,raw,smoothed,is_peak,is_trough\n");
    for i in 0..e.distance.values.len() {
        let is_peak = e.extrema.peaks.binary_search(&i).is_ok();
        let is_trough = e.extrema.troughs.binary_search(&i).is_ok();
        out.push_str(&format!(
            "{i},{},{},{},{}\n",
            e.distance.values[i],
            e.smoothed.values[i],
            is_peak as u8,
            is_trough as u8
        ));
    }
    out
}
