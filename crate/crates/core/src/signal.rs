//! Distance-signal construction and cycle extraction.
//!
//! Each movement maps to a univariate per-frame signal normalized by the
//! palm length of that frame (thumb_cmc to middle_mcp):
//!
//! * finger tapping: thumb tip to index tip, `|p4 - p8| / palm`
//! * hand movement:  thumb_cmc to middle tip, `|p1 - p12| / palm`
//! * rapid alternating movement: 2-d distance of index_mcp to pinky_mcp,
//!   `|p5[:2] - p17[:2]| / palm`, negated on frames where the palm faces
//!   the body.
//!
//! The signal is smoothed with a Savitzky-Golay filter, local extrema are
//! detected and cleaned of false extrema, and the first ten movement
//! cycles yield the amplitude and interval series used everywhere
//! downstream.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::landmark::{
    LandmarkFrame, MovementKind, Recording, Side, INDEX_MCP, INDEX_TIP, MIDDLE_MCP, MIDDLE_TIP,
    PINKY_MCP, THUMB_CMC, THUMB_TIP, WRIST,
};
use crate::linalg::{solve, Mat};

/// Cycles analyzed per recording; later movements are ignored by design.
pub const MAX_CYCLES: usize = 10;

/// Per-frame normalized distance signal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSeries {
    pub values: Vec<f64>,
    pub fps: f64,
    pub movement: MovementKind,
    pub side: Side,
}

/// Savitzky-Golay output, same length and units as its input.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedSeries {
    pub values: Vec<f64>,
    pub fps: f64,
    pub window: usize,
    pub polyorder: usize,
}

/// Filtered alternating peak/trough indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExtremaSet {
    pub peaks: Vec<usize>,
    pub troughs: Vec<usize>,
}

/// Per-cycle amplitude (peak minus preceding trough, palm-length units)
/// and interval (peak-to-peak seconds), truncated to [`MAX_CYCLES`].
#[derive(Debug, Clone, PartialEq)]
pub struct CycleSeries {
    pub amplitudes: Vec<f64>,
    pub intervals: Vec<f64>,
}

impl CycleSeries {
    pub fn n_cycles(&self) -> usize {
        self.amplitudes.len()
    }
}

/// False-extrema filter settings. The defaults are conservative: a
/// peak/trough pair closer than 10% of the signal range is noise, and
/// same-type extrema within 3 frames are merged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtremaConfig {
    pub prominence_frac: f64,
    pub min_separation: usize,
}

impl Default for ExtremaConfig {
    fn default() -> Self {
        ExtremaConfig {
            prominence_frac: 0.1,
            min_separation: 3,
        }
    }
}

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("degenerate palm: thumb_cmc and middle_mcp coincide")]
    DegeneratePalm,
    #[error("frame {frame}: degenerate palm geometry")]
    DegenerateFrame { frame: usize },
    #[error("invalid filter config: {0}")]
    InvalidFilterConfig(String),
    #[error("fewer than two movement cycles detected")]
    NoCyclesDetected,
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// Palm length of one frame: 3-d distance from thumb_cmc to middle_mcp
/// (the thumb_cmc point stands in for the wrist for stability).
pub fn palm_length(f: &LandmarkFrame) -> Result<f64, SignalError> {
    let d = dist3(f.point(THUMB_CMC), f.point(MIDDLE_MCP));
    if d < 1e-9 {
        return Err(SignalError::DegeneratePalm);
    }
    Ok(d)
}

/// True when the palm faces the body, judged from the image-plane cross
/// product of (index_mcp - wrist) x (pinky_mcp - wrist). The sign flips
/// between hands because a mirrored hand reverses the winding; `flip`
/// inverts the convention for cameras with an unusual axis orientation.
pub fn palm_faces_body(f: &LandmarkFrame, side: Side, flip: bool) -> bool {
    let w = f.point(WRIST);
    let a = f.point(INDEX_MCP);
    let b = f.point(PINKY_MCP);
    let cross_z = (a[0] - w[0]) * (b[1] - w[1]) - (a[1] - w[1]) * (b[0] - w[0]);
    let facing = match side {
        Side::Right => cross_z < 0.0,
        Side::Left => cross_z > 0.0,
    };
    facing ^ flip
}

/// Build the per-frame normalized distance signal for a recording.
pub fn distance_signal(r: &Recording) -> Result<DistanceSeries, SignalError> {
    distance_signal_with(r, false)
}

/// As [`distance_signal`], with an override for the palm-orientation
/// convention used by the rapid-AM sign rule.
pub fn distance_signal_with(
    r: &Recording,
    flip_orientation: bool,
) -> Result<DistanceSeries, SignalError> {
    let mut values = Vec::with_capacity(r.frames.len());
    for (i, f) in r.frames.iter().enumerate() {
        let palm = palm_length(f).map_err(|_| SignalError::DegenerateFrame { frame: i })?;
        let v = match r.movement {
            MovementKind::FingerTapping => dist3(f.point(THUMB_TIP), f.point(INDEX_TIP)) / palm,
            MovementKind::HandMovement => dist3(f.point(THUMB_CMC), f.point(MIDDLE_TIP)) / palm,
            MovementKind::RapidAm => {
                let d = dist2(f.point(INDEX_MCP), f.point(PINKY_MCP)) / palm;
                if palm_faces_body(f, r.side, flip_orientation) {
                    -d
                } else {
                    d
                }
            }
        };
        values.push(v);
    }
    Ok(DistanceSeries {
        values,
        fps: r.fps,
        movement: r.movement,
        side: r.side,
    })
}

/// Least-squares polynomial evaluation weights: fit degree `deg` over
/// sample offsets `offsets` and evaluate the fit at offset 0. Returns one
/// weight per sample.
fn polyfit_eval_weights(offsets: &[i64], deg: usize) -> Result<Vec<f64>, SignalError> {
    let n = offsets.len();
    let p = deg + 1;
    let mut design = Mat::zeros(n, p);
    for (r, &off) in offsets.iter().enumerate() {
        let x = off as f64;
        let mut xk = 1.0;
        for c in 0..p {
            design[(r, c)] = xk;
            xk *= x;
        }
    }
    let gram = design.gram();
    let mut e0 = vec![0.0; p];
    e0[0] = 1.0;
    let z = solve(&gram, &e0)
        .ok_or_else(|| SignalError::InvalidFilterConfig("singular normal equations".into()))?;
    Ok(design.mat_vec(&z))
}

/// Interior convolution weights of the smoothing filter (window centered,
/// degree `polyorder`). Exposed for verification.
pub fn savgol_weights(window: usize, polyorder: usize) -> Result<Vec<f64>, SignalError> {
    check_filter(window, polyorder, window)?;
    let h = (window as i64 - 1) / 2;
    let offsets: Vec<i64> = (-h..=h).collect();
    polyfit_eval_weights(&offsets, polyorder)
}

fn check_filter(window: usize, polyorder: usize, len: usize) -> Result<(), SignalError> {
    if window.is_multiple_of(2) || window == 0 {
        return Err(SignalError::InvalidFilterConfig(format!(
            "window {window} must be odd and positive"
        )));
    }
    if polyorder >= window {
        return Err(SignalError::InvalidFilterConfig(format!(
            "polyorder {polyorder} must be < window {window}"
        )));
    }
    if window > len {
        return Err(SignalError::InvalidFilterConfig(format!(
            "window {window} exceeds signal length {len}"
        )));
    }
    Ok(())
}

/// Savitzky-Golay smoothing over a bare slice. Interior samples use the
/// centered window; samples near the clip edges are fit over the
/// truncated one-sided window rather than padded data, with the degree
/// capped at window length - 1 so the fit stays determined.
pub fn savgol_filter(
    values: &[f64],
    window: usize,
    polyorder: usize,
) -> Result<Vec<f64>, SignalError> {
    check_filter(window, polyorder, values.len())?;
    let n = values.len();
    let h = (window - 1) / 2;
    let interior = savgol_weights(window, polyorder)?;
    let mut out = vec![0.0; n];
    for i in 0..n {
        if i >= h && i + h < n {
            let mut s = 0.0;
            for (k, w) in interior.iter().enumerate() {
                s += w * values[i - h + k];
            }
            out[i] = s;
        } else {
            let lo = i.saturating_sub(h);
            let hi = (i + h).min(n - 1);
            let offsets: Vec<i64> = (lo..=hi).map(|j| j as i64 - i as i64).collect();
            let deg = polyorder.min(offsets.len() - 1);
            let w = polyfit_eval_weights(&offsets, deg)?;
            let mut s = 0.0;
            for (k, j) in (lo..=hi).enumerate() {
                s += w[k] * values[j];
            }
            out[i] = s;
        }
    }
    Ok(out)
}

/// Smooth a distance signal.
pub fn savgol_smooth(
    s: &DistanceSeries,
    window: usize,
    polyorder: usize,
) -> Result<SmoothedSeries, SignalError> {
    Ok(SmoothedSeries {
        values: savgol_filter(&s.values, window, polyorder)?,
        fps: s.fps,
        window,
        polyorder,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Extremum {
    idx: usize,
    is_peak: bool,
}

/// Detect alternating local extrema and remove false ones.
///
/// Raw extrema come from sign changes of the first difference (plateaus
/// count once, at their midpoint). Filtering then (a) repeatedly drops
/// the adjacent peak/trough pair with the smallest vertical gap while any
/// gap is below `prominence_frac` of the global range, merging the
/// same-type neighbors this exposes, and (b) merges same-type extrema
/// closer than `min_separation` frames, keeping the more extreme one.
pub fn detect_extrema(s: &SmoothedSeries, cfg: &ExtremaConfig) -> Result<ExtremaSet, SignalError> {
    let v = &s.values;
    if v.len() < 3 {
        return Err(SignalError::NoCyclesDetected);
    }

    // Sign changes of the first difference; zero-runs collapse to one
    // extremum at the plateau midpoint.
    let mut raw: Vec<Extremum> = Vec::new();
    let mut last_sign = 0i8;
    let mut last_sign_end = 0usize; // index where the previous sloped run ended
    for i in 0..v.len() - 1 {
        let d = v[i + 1] - v[i];
        let sign = if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            0
        };
        if sign == 0 {
            continue;
        }
        if last_sign != 0 && sign != last_sign {
            let plateau_start = last_sign_end;
            let plateau_end = i;
            raw.push(Extremum {
                idx: (plateau_start + plateau_end) / 2,
                is_peak: last_sign > 0,
            });
        }
        last_sign = sign;
        last_sign_end = i + 1;
    }

    let range = {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &x in v.iter() {
            lo = lo.min(x);
            hi = hi.max(x);
        }
        hi - lo
    };
    let gap_floor = cfg.prominence_frac * range;

    // (a) prominence filter: drop the weakest adjacent pair until all
    // adjacent gaps clear the floor.
    let mut ex = raw;
    loop {
        if ex.len() < 2 {
            break;
        }
        let mut weakest: Option<(usize, f64)> = None;
        for j in 0..ex.len() - 1 {
            let gap = (v[ex[j].idx] - v[ex[j + 1].idx]).abs();
            if weakest.is_none_or(|(_, g)| gap < g) {
                weakest = Some((j, gap));
            }
        }
        let (j, gap) = weakest.unwrap();
        if gap >= gap_floor {
            break;
        }
        ex.drain(j..j + 2);
        merge_same_type_neighbors(&mut ex, v);
    }

    // (b) temporal merge of same-type extrema.
    loop {
        let mut changed = false;
        let mut j = 0;
        while j + 2 < ex.len() {
            // ex[j] and ex[j+2] share a type with ex[j+1] between them.
            if ex[j].is_peak == ex[j + 2].is_peak
                && ex[j + 2].idx - ex[j].idx < cfg.min_separation
            {
                let keep_first = if ex[j].is_peak {
                    v[ex[j].idx] >= v[ex[j + 2].idx]
                } else {
                    v[ex[j].idx] <= v[ex[j + 2].idx]
                };
                let drop_at = if keep_first { j + 1 } else { j };
                ex.drain(drop_at..drop_at + 2);
                merge_same_type_neighbors(&mut ex, v);
                changed = true;
            } else {
                j += 1;
            }
        }
        if !changed {
            break;
        }
    }

    let mut set = ExtremaSet::default();
    for e in &ex {
        if e.is_peak {
            set.peaks.push(e.idx);
        } else {
            set.troughs.push(e.idx);
        }
    }
    if set.peaks.len() < 2 {
        return Err(SignalError::NoCyclesDetected);
    }
    Ok(set)
}

/// Collapse any adjacent same-type extrema, keeping the more extreme one.
fn merge_same_type_neighbors(ex: &mut Vec<Extremum>, v: &[f64]) {
    let mut j = 0;
    while j + 1 < ex.len() {
        if ex[j].is_peak == ex[j + 1].is_peak {
            let keep_first = if ex[j].is_peak {
                v[ex[j].idx] >= v[ex[j + 1].idx]
            } else {
                v[ex[j].idx] <= v[ex[j + 1].idx]
            };
            ex.remove(if keep_first { j + 1 } else { j });
            j = j.saturating_sub(1);
        } else {
            j += 1;
        }
    }
}

/// Derive amplitude and interval series from the filtered extrema.
///
/// Amplitude is peak value minus the preceding trough value. The first
/// peak, when no trough precedes it, measures against the lower of the
/// signal-start value and the first following trough (a movement can
/// begin mid-swing or right on a peak); it is skipped if that difference
/// is not positive. Intervals are peak-to-peak times. Both series are
/// truncated to the first [`MAX_CYCLES`] movements.
pub fn cycles(s: &SmoothedSeries, e: &ExtremaSet) -> Result<CycleSeries, SignalError> {
    if e.peaks.len() < 2 {
        return Err(SignalError::NoCyclesDetected);
    }
    let v = &s.values;
    let mut kept_peaks: Vec<usize> = Vec::new();
    let mut amplitudes = Vec::new();
    for &p in &e.peaks {
        let trough_before = e.troughs.iter().rev().find(|&&t| t < p);
        let base = match trough_before {
            Some(&t) => v[t],
            None => match e.troughs.iter().find(|&&t| t > p) {
                Some(&t) => v[0].min(v[t]),
                None => v[0],
            },
        };
        let amp = v[p] - base;
        if amp <= 0.0 {
            // Only possible for the signal-start fallback; drop the peak.
            continue;
        }
        kept_peaks.push(p);
        amplitudes.push(amp);
        if amplitudes.len() == MAX_CYCLES {
            break;
        }
    }
    let intervals: Vec<f64> = kept_peaks
        .windows(2)
        .map(|w| (w[1] - w[0]) as f64 / s.fps)
        .collect();
    Ok(CycleSeries {
        amplitudes,
        intervals,
    })
}
