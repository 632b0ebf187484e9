//! Severity-parameterized synthetic motion generator.
//!
//! A profile describes the clinically rated phenomena directly: how many
//! arrests, whether one is a freeze, how strongly the movement slows, and
//! when amplitude decrement sets in. The rating rules then label the
//! profile (the OR-gate over the arrest, slowing, and decrement
//! channels), and `generate` renders it as an actual landmark recording:
//! raised-cosine opening cycles with flat holds at trough level for
//! arrests, mapped onto a template hand pose per movement. Synthetic
//! recordings use the standard JSONL format, so the rest of the pipeline
//! cannot tell them from ingested data.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::landmark::{LandmarkFrame, MovementKind, Recording, Side, LANDMARK_COUNT};
use crate::rng::{derive_seed, normal, seeded_rng, uniform};

/// When the amplitude decrement begins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecrementOnset {
    #[default]
    None,
    /// Toward the end of the ten movements.
    End,
    /// Around the middle.
    Middle,
    /// Starting right after the first movement.
    AfterFirst,
}

/// Generator inputs, in clinical terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityProfile {
    /// Peak opening as a fraction of the full template opening.
    pub base_amplitude: f64,
    /// Nominal movement period in seconds.
    pub base_interval: f64,
    pub n_arrests: usize,
    /// Hold lengths in seconds; empty means draw defaults from the seed.
    pub arrest_durations: Vec<f64>,
    /// One arrest lasting at least twice the base interval.
    pub has_freeze: bool,
    pub decrement_onset: DecrementOnset,
    /// Amplitude lost per cycle once decrement sets in.
    pub decrement_rate: f64,
    /// Terminal slowdown factor (>= 1); the period ramps up to
    /// `base_interval * slowing_factor` over the recording.
    pub slowing_factor: f64,
    /// Cycle-to-cycle period variability (sd of a multiplicative
    /// factor). Irregular but continuous performances have high values
    /// without any arrest.
    pub interval_jitter: f64,
    /// Cycle-to-cycle amplitude variability, same convention. High
    /// volatility is not decrement: the swings carry no sustained trend.
    pub amplitude_jitter: f64,
    /// Gaussian noise on the opening scalar, as a fraction of amplitude.
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SeverityProfile {
    fn default() -> Self {
        SeverityProfile {
            base_amplitude: 0.9,
            // an integral number of frames at 30 fps keeps clean cycles
            // phase-aligned, so noise-free amplitudes extract identically
            base_interval: 1.0 / 3.0,
            n_arrests: 0,
            arrest_durations: Vec::new(),
            has_freeze: false,
            decrement_onset: DecrementOnset::None,
            decrement_rate: DEFAULT_DECAY_RATE,
            slowing_factor: 1.0,
            interval_jitter: 0.0,
            amplitude_jitter: 0.0,
            noise_sd: 0.0,
            seed: 0,
        }
    }
}

/// A rendered profile: the recording plus its rule-derived labels.
#[derive(Debug, Clone)]
pub struct SynthRecording {
    pub recording: Recording,
    pub profile: SeverityProfile,
    pub score: u8,
    pub arrest_category: u8,
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("could not draw a profile labeled {want} within {tries} attempts")]
    LabelMismatch { want: u8, tries: usize },
}

/// Default amplitude decay per cycle once decrement sets in.
pub const DEFAULT_DECAY_RATE: f64 = 0.07;
/// Decay floor: even severe decrement keeps some visible movement.
const MIN_ENVELOPE: f64 = 0.3;

/// Cycle where decrement begins; jittered within the band the clinical
/// wording describes ("towards the end", "around the middle", "after the
/// first action").
fn draw_onset_cycle<R: Rng>(onset: DecrementOnset, rng: &mut R) -> Option<usize> {
    match onset {
        DecrementOnset::None => None,
        DecrementOnset::End => Some(rng.random_range(7..=8)),
        DecrementOnset::Middle => Some(rng.random_range(4..=5)),
        DecrementOnset::AfterFirst => Some(1),
    }
}

/// Apply the rating rules to a profile: the score is the worst of the
/// arrest, slowing, and decrement channels; the arrest category counts
/// interruptions (0: none, 1: one or two, 2: three to five, 3: more than
/// five or any freeze).
pub fn label_from_rules(p: &SeverityProfile) -> (u8, u8) {
    let arrest_cat: u8 = if p.n_arrests == 0 && !p.has_freeze {
        0
    } else if p.n_arrests > 5 || p.has_freeze {
        3
    } else if p.n_arrests >= 3 {
        2
    } else {
        1
    };
    let slowing: u8 = if p.slowing_factor >= 1.6 {
        3
    } else if p.slowing_factor >= 1.35 {
        2
    } else if p.slowing_factor >= 1.15 {
        1
    } else {
        0
    };
    let decrement: u8 = match p.decrement_onset {
        DecrementOnset::None => 0,
        DecrementOnset::End => 1,
        DecrementOnset::Middle => 2,
        DecrementOnset::AfterFirst => 3,
    };
    (arrest_cat.max(slowing).max(decrement).min(3), arrest_cat)
}

fn validate_profile(p: &SeverityProfile, n_cycles: usize) -> Result<(), SynthError> {
    if !(p.base_interval > 0.0 && p.base_interval.is_finite()) {
        return Err(SynthError::InvalidProfile("base_interval must be positive".into()));
    }
    if !(0.0 < p.base_amplitude && p.base_amplitude <= 1.0) {
        return Err(SynthError::InvalidProfile("base_amplitude must be in (0, 1]".into()));
    }
    if !(0.0..=0.2).contains(&p.noise_sd) {
        return Err(SynthError::InvalidProfile("noise_sd must be in [0, 0.2]".into()));
    }
    if p.slowing_factor < 1.0 {
        return Err(SynthError::InvalidProfile("slowing_factor must be >= 1".into()));
    }
    if !(0.0 < p.decrement_rate && p.decrement_rate <= 0.2) {
        return Err(SynthError::InvalidProfile("decrement_rate must be in (0, 0.2]".into()));
    }
    if !(0.0..=0.5).contains(&p.interval_jitter) || !(0.0..=0.5).contains(&p.amplitude_jitter) {
        return Err(SynthError::InvalidProfile("jitter must be in [0, 0.5]".into()));
    }
    if p.has_freeze && p.n_arrests == 0 {
        return Err(SynthError::InvalidProfile("a freeze requires at least one arrest".into()));
    }
    let candidates = arrest_slots(n_cycles);
    if p.n_arrests > candidates {
        return Err(SynthError::InvalidProfile(format!(
            "{} arrests do not fit in {candidates} cycle boundaries",
            p.n_arrests
        )));
    }
    if !p.arrest_durations.is_empty() {
        if p.arrest_durations.len() != p.n_arrests {
            return Err(SynthError::InvalidProfile(
                "arrest_durations must be empty or match n_arrests".into(),
            ));
        }
        if p.arrest_durations.iter().any(|&d| d.is_nan() || d <= 0.0) {
            return Err(SynthError::InvalidProfile("arrest durations must be positive".into()));
        }
        let has_long = p
            .arrest_durations
            .iter()
            .any(|&d| d >= 2.0 * p.base_interval);
        if has_long != p.has_freeze {
            return Err(SynthError::InvalidProfile(
                "has_freeze must match whether any hold reaches twice the base interval".into(),
            ));
        }
    }
    Ok(())
}

/// Boundaries where holds may be inserted: after each of the analyzed
/// cycles except the last (all within the first ten movements).
fn arrest_slots(n_cycles: usize) -> usize {
    n_cycles.min(crate::signal::MAX_CYCLES).saturating_sub(1)
}

fn draw_durations<R: Rng>(p: &SeverityProfile, rng: &mut R) -> Vec<f64> {
    if !p.arrest_durations.is_empty() {
        return p.arrest_durations.clone();
    }
    // wide spread, capped just below the freeze threshold so the flag
    // stays truthful; total arrested time overlaps across counts (two
    // long stops last about as long as three brief ones)
    let t = p.base_interval;
    let spread = if p.n_arrests >= 5 { (1.05, 1.5) } else { (1.05, 1.95) };
    let mut durations: Vec<f64> = (0..p.n_arrests)
        .map(|_| uniform(rng, spread.0, spread.1) * t)
        .collect();
    if p.has_freeze {
        durations[0] = uniform(rng, 2.2, 2.6) * t;
    }
    // once arrests dominate the intervals, one clearly longer hold keeps
    // the worst interval separated from the (arrested) median interval
    if p.n_arrests >= 5 {
        let last = durations.len() - 1;
        durations[last] = uniform(rng, 4.2, 4.6) * t;
    }
    durations
}

enum Segment {
    Cycle { period: f64, amp: f64 },
    Hold { duration: f64 },
}

/// Render a profile into landmark frames.
pub fn generate(
    p: &SeverityProfile,
    movement: MovementKind,
    side: Side,
    fps: f64,
    n_cycles: usize,
) -> Result<SynthRecording, SynthError> {
    if fps.is_nan() || fps <= 0.0 || n_cycles < 2 {
        return Err(SynthError::InvalidProfile("need fps > 0 and >= 2 cycles".into()));
    }
    validate_profile(p, n_cycles)?;
    let mut rng = seeded_rng(p.seed);
    let durations = draw_durations(p, &mut rng);

    // which cycle boundaries carry a hold
    let slots = arrest_slots(n_cycles);
    let mut slot_order: Vec<usize> = (0..slots).collect();
    for i in (1..slot_order.len()).rev() {
        let j = rng.random_range(0..=i);
        slot_order.swap(i, j);
    }
    let mut hold_after: Vec<Option<f64>> = vec![None; n_cycles];
    for (slot, duration) in slot_order.iter().take(p.n_arrests).zip(&durations) {
        hold_after[*slot] = Some(*duration);
    }

    let onset = draw_onset_cycle(p.decrement_onset, &mut rng);
    let denom = (n_cycles - 1) as f64;
    let mut segments = Vec::new();
    #[allow(clippy::needless_range_loop)] // k is the cycle number, used both ways
    for k in 0..n_cycles {
        let slow = 1.0 + (p.slowing_factor - 1.0) * k as f64 / denom;
        let envelope = match onset {
            Some(onset) if k >= onset => {
                (1.0 - p.decrement_rate * (k - onset + 1) as f64).max(MIN_ENVELOPE)
            }
            _ => 1.0,
        };
        let period_mult = (1.0 + p.interval_jitter * normal(&mut rng)).clamp(0.6, 1.7);
        let amp_mult = (1.0 + p.amplitude_jitter * normal(&mut rng)).clamp(0.55, 1.6);
        segments.push(Segment::Cycle {
            period: p.base_interval * slow * period_mult,
            amp: (p.base_amplitude * envelope * amp_mult).min(1.1),
        });
        if let Some(duration) = hold_after[k] {
            segments.push(Segment::Hold { duration });
        }
    }

    let total: f64 = segments
        .iter()
        .map(|s| match s {
            Segment::Cycle { period, .. } => *period,
            Segment::Hold { duration } => *duration,
        })
        .sum();
    let n_frames = (total * fps).floor() as usize + 1;

    let mut frames = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let t = i as f64 / fps;
        // opening scalar at time t
        let mut elapsed = 0.0;
        let mut s = 0.0;
        for seg in &segments {
            match seg {
                Segment::Cycle { period, amp } => {
                    if t < elapsed + period {
                        let phase = (t - elapsed) / period;
                        s = amp * 0.5 * (1.0 - (std::f64::consts::TAU * phase).cos());
                        break;
                    }
                    elapsed += period;
                }
                Segment::Hold { duration } => {
                    if t < elapsed + duration {
                        s = 0.0;
                        break;
                    }
                    elapsed += duration;
                }
            }
        }
        if p.noise_sd > 0.0 {
            s += p.noise_sd * p.base_amplitude * normal(&mut rng);
        }
        frames.push(LandmarkFrame {
            t: i as f64 / fps,
            points: render_hand(movement, side, s),
        });
    }

    let (score, arrest_category) = label_from_rules(p);
    Ok(SynthRecording {
        recording: Recording {
            movement,
            side,
            fps,
            subject_id: format!("synth-{}", p.seed),
            score: Some(score),
            arrest: Some(arrest_category),
            frames,
        },
        profile: p.clone(),
        score,
        arrest_category,
    })
}

/// Static template pose (right hand, pixels in a nominal 640 x 480
/// image). Only the points the distance formulas touch move; the rest
/// keep the hand plausibly shaped.
const TEMPLATE: [[f64; 3]; LANDMARK_COUNT] = [
    [320.0, 320.0, 0.0],  // 0 wrist
    [290.0, 290.0, 5.0],  // 1 thumb_cmc
    [280.0, 270.0, 8.0],  // 2
    [272.0, 252.0, 10.0], // 3
    [266.0, 240.0, 12.0], // 4 thumb_tip
    [302.0, 212.0, 0.0],  // 5 index_mcp
    [300.0, 190.0, 2.0],  // 6
    [298.0, 175.0, 3.0],  // 7
    [296.0, 165.0, 4.0],  // 8 index_tip (finger tapping moves it)
    [320.0, 210.0, 0.0],  // 9 middle_mcp
    [320.0, 185.0, 2.0],  // 10
    [320.0, 168.0, 3.0],  // 11
    [320.0, 150.0, 4.0],  // 12 middle_tip (hand movement moves it)
    [338.0, 214.0, 0.0],  // 13 ring_mcp
    [340.0, 192.0, 2.0],  // 14
    [342.0, 176.0, 3.0],  // 15
    [344.0, 160.0, 4.0],  // 16
    [352.0, 220.0, 0.0],  // 17 pinky_mcp
    [356.0, 200.0, 2.0],  // 18
    [358.0, 186.0, 3.0],  // 19
    [360.0, 172.0, 4.0],  // 20
];

const IMAGE_WIDTH: f64 = 640.0;
/// Rapid-AM signed opening is scaled by this fraction of the palm.
const RA_SPREAD: f64 = 0.8;

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Place the 21 landmarks for opening scalar `s` (see module docs).
fn render_hand(movement: MovementKind, side: Side, s: f64) -> [[f64; 3]; LANDMARK_COUNT] {
    let mut pts = TEMPLATE;
    let palm = dist3(TEMPLATE[1], TEMPLATE[9]);
    match movement {
        MovementKind::FingerTapping => {
            // thumb tip fixed, index tip at distance (0.05 + 0.9 s) palm
            let d = (0.05 + 0.9 * s.max(-0.05)) * palm;
            let dir = [0.6, -0.8, 0.0];
            for c in 0..3 {
                pts[8][c] = pts[4][c] + dir[c] * d;
            }
        }
        MovementKind::HandMovement => {
            // middle tip opens away from thumb_cmc
            let d = (0.1 + 1.4 * s.max(-0.06)) * palm;
            let dir: [f64; 3] = [0.287, -0.862, 0.287]; // photo-plausible open direction
            let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
            for c in 0..3 {
                pts[12][c] = pts[1][c] + dir[c] / norm * d;
            }
        }
        MovementKind::RapidAm => {
            // signed opening: pronation flips which side index/pinky
            // project to, engaging the orientation sign rule
            let signed = RA_SPREAD * (2.0 * s - 1.0);
            let center = [
                0.5 * (TEMPLATE[5][0] + TEMPLATE[17][0]),
                0.5 * (TEMPLATE[5][1] + TEMPLATE[17][1]),
            ];
            let axis = {
                let dx = TEMPLATE[17][0] - TEMPLATE[5][0];
                let dy = TEMPLATE[17][1] - TEMPLATE[5][1];
                let n = (dx * dx + dy * dy).sqrt();
                [dx / n, dy / n]
            };
            let half = 0.5 * signed.abs() * palm;
            let sgn = if signed >= 0.0 { 1.0 } else { -1.0 };
            for c in 0..2 {
                pts[5][c] = center[c] - sgn * axis[c] * half;
                pts[17][c] = center[c] + sgn * axis[c] * half;
            }
            pts[5][2] = 0.0;
            pts[17][2] = 0.0;
        }
    }
    if side == Side::Left {
        for pt in pts.iter_mut() {
            pt[0] = IMAGE_WIDTH - pt[0];
        }
    }
    pts
}

/// Per-score profile ranges. One channel (arrest, slowing, or decrement)
/// is drawn at the target severity and carries the rating; the others
/// stay mild (at most slight), mirroring the OR-gate logic where any
/// single criterion suffices for a score.
fn draw_profile<R: Rng>(target: u8, rng: &mut R, seed: u64) -> SeverityProfile {
    let mut severities = [0u8; 3];
    if target > 0 {
        let cap = 1u32.min(target as u32 - 1);
        for s in severities.iter_mut() {
            *s = (rng.random_range(0..=cap)) as u8;
        }
    }
    severities[rng.random_range(0..3)] = target;

    let (n_arrests, has_freeze) = match severities[0] {
        0 => (0, false),
        1 => (rng.random_range(1..=2), false),
        2 => (rng.random_range(3..=5), false),
        _ => {
            // freezing is the common severe presentation; a pure freeze
            // leaves interval summaries looking like one or two stops
            if rng.random::<f64>() < 0.7 {
                (rng.random_range(1..=2), true)
            } else {
                (rng.random_range(6..=8), false)
            }
        }
    };
    let slowing_factor = match severities[1] {
        0 => uniform(rng, 1.0, 1.06),
        1 => uniform(rng, 1.16, 1.30),
        2 => uniform(rng, 1.36, 1.55),
        _ => uniform(rng, 1.62, 1.90),
    };
    // the decay rate band is shared across onsets: amplitude summaries
    // then overlap between a late steep decrement and an early shallow
    // one, while the onset-weighted fatigue feature tells them apart
    let decrement_onset = match severities[2] {
        0 => DecrementOnset::None,
        1 => DecrementOnset::End,
        2 => DecrementOnset::Middle,
        _ => DecrementOnset::AfterFirst,
    };
    let decrement_rate = uniform(rng, 0.06, 0.09);
    // a share of the mild recordings are irregular performers: high
    // amplitude/interval volatility with no arrest and no sustained
    // decrement, which raw summary statistics cannot tell from severity
    let irregular = (target == 0 && rng.random::<f64>() < 0.25)
        || (target == 1 && severities[0] == 1 && rng.random::<f64>() < 0.4);
    let (interval_jitter, amplitude_jitter) = if irregular {
        (uniform(rng, 0.18, 0.30), uniform(rng, 0.12, 0.22))
    } else {
        (uniform(rng, 0.02, 0.06), uniform(rng, 0.01, 0.04))
    };
    SeverityProfile {
        base_amplitude: uniform(rng, 0.8, 1.0),
        base_interval: uniform(rng, 0.30, 0.36),
        n_arrests,
        arrest_durations: Vec::new(),
        has_freeze,
        decrement_onset,
        decrement_rate,
        slowing_factor,
        interval_jitter,
        amplitude_jitter,
        noise_sd: uniform(rng, 0.005, 0.03),
        seed,
    }
}

/// Generate a labeled dataset with the requested per-score counts.
/// Profiles are rejection-sampled until the rule label matches the
/// requested score; movements rotate and sides are drawn at random.
pub fn generate_dataset(
    counts: &[usize; 4],
    fps: f64,
    n_cycles: usize,
    seed: u64,
) -> Result<Vec<SynthRecording>, SynthError> {
    let mut out = Vec::with_capacity(counts.iter().sum());
    let mut item: u64 = 0;
    for (score, &count) in counts.iter().enumerate() {
        for i in 0..count {
            let mut rng = seeded_rng(derive_seed(seed, 0x5E_0000 + item));
            let mut found = None;
            for _try in 0..1000 {
                let profile = draw_profile(score as u8, &mut rng, derive_seed(seed, item));
                if label_from_rules(&profile).0 == score as u8 {
                    found = Some(profile);
                    break;
                }
            }
            let profile = found.ok_or(SynthError::LabelMismatch {
                want: score as u8,
                tries: 1000,
            })?;
            let movement = MovementKind::ALL[item as usize % 3];
            let side = if rng.random::<bool>() {
                Side::Left
            } else {
                Side::Right
            };
            let mut rec = generate(&profile, movement, side, fps, n_cycles)?;
            rec.recording.subject_id = format!("synth-{score}-{i:03}");
            out.push(rec);
            item += 1;
        }
    }
    Ok(out)
}
