//! Hand-landmark recordings: the documented JSONL/CSV input formats,
//! validation, and pixel rescaling.
//!
//! A recording is a per-frame trajectory of the standard 21-point hand
//! layout (0 = wrist, 1 = thumb_cmc, 4 = thumb_tip, 5 = index_mcp,
//! 8 = index_tip, 9 = middle_mcp, 12 = middle_tip, 17 = pinky_mcp).
//! Coordinates are stored in pixel units; inputs that declare an image
//! size are treated as normalized and rescaled on load (x by width,
//! y by height, z by width).
//!
//! JSONL layout: a header line `{"meta": {...}}` followed by one object
//! per frame `{"frame": n, "t": seconds?, "landmarks": [[x,y,z]; 21]}`.
//! The CSV alternative has columns `frame,t,p0_x,p0_y,p0_z,...,p20_z`
//! and takes its metadata from a `.meta.json` sidecar with the same
//! `meta` object.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of points in the hand layout.
pub const LANDMARK_COUNT: usize = 21;

pub const WRIST: usize = 0;
pub const THUMB_CMC: usize = 1;
pub const THUMB_TIP: usize = 4;
pub const INDEX_MCP: usize = 5;
pub const INDEX_TIP: usize = 8;
pub const MIDDLE_MCP: usize = 9;
pub const MIDDLE_TIP: usize = 12;
pub const PINKY_MCP: usize = 17;

/// The three upper-limb tasks rated for bradykinesia.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MovementKind {
    FingerTapping,
    HandMovement,
    RapidAm,
}

impl MovementKind {
    pub const ALL: [MovementKind; 3] = [
        MovementKind::FingerTapping,
        MovementKind::HandMovement,
        MovementKind::RapidAm,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MovementKind::FingerTapping => "finger_tapping",
            MovementKind::HandMovement => "hand_movement",
            MovementKind::RapidAm => "rapid_am",
        }
    }
}

impl std::fmt::Display for MovementKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MovementKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "finger_tapping" => Ok(MovementKind::FingerTapping),
            "hand_movement" => Ok(MovementKind::HandMovement),
            "rapid_am" => Ok(MovementKind::RapidAm),
            other => Err(format!("unknown movement kind: {other}")),
        }
    }
}

/// Hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Side {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            other => Err(format!("unknown side: {other}")),
        }
    }
}

/// One video frame: a timestamp plus 21 (x, y, z) points in pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkFrame {
    pub t: f64,
    pub points: [[f64; 3]; LANDMARK_COUNT],
}

impl LandmarkFrame {
    pub fn point(&self, i: usize) -> [f64; 3] {
        self.points[i]
    }
}

/// A validated landmark trajectory for a single task performance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub movement: MovementKind,
    pub side: Side,
    pub fps: f64,
    pub subject_id: String,
    /// Expert severity label (0-3) when available.
    pub score: Option<u8>,
    /// Arrest sub-label (0-3) when available (synthetic data carries it).
    pub arrest: Option<u8>,
    pub frames: Vec<LandmarkFrame>,
}

/// Metadata header shared by the JSONL format and the CSV sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub movement: MovementKind,
    pub side: Side,
    pub fps: f64,
    pub subject_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrest: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_height: Option<u32>,
}

/// Input format selector for [`parse_recording`].
#[derive(Debug, Clone)]
pub enum InputFormat {
    Jsonl,
    /// CSV body plus the metadata from its sidecar.
    Csv(RecordingMeta),
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error("frame {frame}: expected {LANDMARK_COUNT} landmarks, found {found}")]
    LandmarkCount { frame: usize, found: usize },
    #[error("non-monotone or irregular timestamp at frame {frame}")]
    Timestamp { frame: usize },
    #[error("missing metadata field: {0}")]
    MissingMetadata(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One failed validation rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Offending frame, when the rule is per-frame.
    pub frame: Option<usize>,
    pub rule: &'static str,
}

#[derive(Deserialize)]
struct JsonHeader {
    meta: MetaIn,
}

// Raw meta with optional fields so we can report which one is missing.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaIn {
    movement: Option<MovementKind>,
    side: Option<Side>,
    fps: Option<f64>,
    subject_id: Option<String>,
    #[serde(default)]
    score: Option<u8>,
    #[serde(default)]
    arrest: Option<u8>,
    #[serde(default)]
    image_width: Option<u32>,
    #[serde(default)]
    image_height: Option<u32>,
}

#[derive(Deserialize)]
struct JsonFrame {
    #[allow(dead_code)]
    frame: u64,
    #[serde(default)]
    t: Option<f64>,
    landmarks: Vec<Vec<f64>>,
}

impl MetaIn {
    fn validate(self) -> Result<RecordingMeta, ParseError> {
        Ok(RecordingMeta {
            movement: self.movement.ok_or(ParseError::MissingMetadata("movement"))?,
            side: self.side.ok_or(ParseError::MissingMetadata("side"))?,
            fps: self.fps.ok_or(ParseError::MissingMetadata("fps"))?,
            subject_id: self
                .subject_id
                .ok_or(ParseError::MissingMetadata("subject_id"))?,
            score: self.score,
            arrest: self.arrest,
            image_width: self.image_width,
            image_height: self.image_height,
        })
    }
}

/// Parse a recording from a byte stream in the declared format.
pub fn parse_recording<R: BufRead>(reader: R, format: InputFormat) -> Result<Recording, ParseError> {
    match format {
        InputFormat::Jsonl => parse_jsonl(reader),
        InputFormat::Csv(meta) => parse_csv(reader, meta),
    }
}

/// Parse the JSONL format: meta header line, then one frame per line.
pub fn parse_jsonl<R: BufRead>(reader: R) -> Result<Recording, ParseError> {
    let mut lines = reader.lines();
    let header_line = loop {
        match lines.next() {
            Some(line) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
            None => return Err(ParseError::MalformedInput("empty stream".into())),
        }
    };
    let header: JsonHeader = serde_json::from_str(&header_line)
        .map_err(|e| ParseError::MalformedInput(format!("header: {e}")))?;
    let meta = header.meta.validate()?;

    let mut raw_frames = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let idx = raw_frames.len();
        let frame: JsonFrame = serde_json::from_str(&line)
            .map_err(|e| ParseError::MalformedInput(format!("frame {idx}: {e}")))?;
        raw_frames.push(frame);
    }
    build_recording(meta, raw_frames)
}

/// Parse the CSV body (`frame,t,p0_x,...,p20_z`) with sidecar metadata.
pub fn parse_csv<R: BufRead>(reader: R, meta: RecordingMeta) -> Result<Recording, ParseError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| ParseError::MalformedInput(format!("csv header: {e}")))?
        .clone();
    if headers.len() != 2 + 3 * LANDMARK_COUNT {
        return Err(ParseError::MalformedInput(format!(
            "csv header has {} columns, expected {}",
            headers.len(),
            2 + 3 * LANDMARK_COUNT
        )));
    }
    let mut raw_frames = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ParseError::MalformedInput(format!("row {idx}: {e}")))?;
        if rec.len() != 2 + 3 * LANDMARK_COUNT {
            return Err(ParseError::LandmarkCount {
                frame: idx,
                found: (rec.len().saturating_sub(2)) / 3,
            });
        }
        let parse_field = |i: usize| -> Result<f64, ParseError> {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| ParseError::MalformedInput(format!("row {idx} col {i}: {e}")))
        };
        let frame_no = rec[0]
            .trim()
            .parse::<u64>()
            .map_err(|e| ParseError::MalformedInput(format!("row {idx} frame: {e}")))?;
        let t_field = rec[1].trim();
        let t = if t_field.is_empty() {
            None
        } else {
            Some(parse_field(1)?)
        };
        let mut landmarks = Vec::with_capacity(LANDMARK_COUNT);
        for p in 0..LANDMARK_COUNT {
            landmarks.push(vec![
                parse_field(2 + 3 * p)?,
                parse_field(3 + 3 * p)?,
                parse_field(4 + 3 * p)?,
            ]);
        }
        raw_frames.push(JsonFrame {
            frame: frame_no,
            t,
            landmarks,
        });
    }
    build_recording(meta, raw_frames)
}

fn build_recording(meta: RecordingMeta, raw: Vec<JsonFrame>) -> Result<Recording, ParseError> {
    if raw.is_empty() {
        return Err(ParseError::MalformedInput("no frames".into()));
    }
    if !(meta.fps.is_finite() && meta.fps > 0.0) {
        return Err(ParseError::MissingMetadata("fps"));
    }
    let scale = match (meta.image_width, meta.image_height) {
        (Some(w), Some(h)) => Some((w as f64, h as f64)),
        (None, None) => None,
        _ => return Err(ParseError::MissingMetadata("image_width/image_height")),
    };
    let timed = raw[0].t.is_some();
    let mut frames = Vec::with_capacity(raw.len());
    for (idx, rf) in raw.into_iter().enumerate() {
        if rf.landmarks.len() != LANDMARK_COUNT {
            return Err(ParseError::LandmarkCount {
                frame: idx,
                found: rf.landmarks.len(),
            });
        }
        if rf.t.is_some() != timed {
            return Err(ParseError::MalformedInput(format!(
                "frame {idx}: inconsistent presence of timestamps"
            )));
        }
        let t = rf.t.unwrap_or(idx as f64 / meta.fps);
        let mut points = [[0.0; 3]; LANDMARK_COUNT];
        for (p, lm) in rf.landmarks.iter().enumerate() {
            if lm.len() != 3 {
                return Err(ParseError::MalformedInput(format!(
                    "frame {idx} point {p}: expected 3 coordinates, found {}",
                    lm.len()
                )));
            }
            let (x, y, z) = (lm[0], lm[1], lm[2]);
            if !(x.is_finite() && y.is_finite() && z.is_finite()) {
                return Err(ParseError::MalformedInput(format!(
                    "frame {idx} point {p}: non-finite coordinate"
                )));
            }
            points[p] = match scale {
                Some((w, h)) => [x * w, y * h, z * w],
                None => [x, y, z],
            };
        }
        if !t.is_finite() || t < 0.0 {
            return Err(ParseError::Timestamp { frame: idx });
        }
        frames.push(LandmarkFrame { t, points });
    }
    let rec = Recording {
        movement: meta.movement,
        side: meta.side,
        fps: meta.fps,
        subject_id: meta.subject_id,
        score: meta.score,
        arrest: meta.arrest,
        frames,
    };
    // Timestamp checks need the whole sequence.
    for i in 1..rec.frames.len() {
        let dt = rec.frames[i].t - rec.frames[i - 1].t;
        if dt <= 0.0 || (dt - 1.0 / rec.fps).abs() > 0.5 / rec.fps {
            return Err(ParseError::Timestamp { frame: i });
        }
    }
    debug_assert!(validate_recording(&rec).is_empty());
    Ok(rec)
}

/// Check every recording invariant; an empty list means the recording is
/// valid. Validation never fails, it only reports.
pub fn validate_recording(r: &Recording) -> Vec<Violation> {
    let mut out = Vec::new();
    if r.frames.is_empty() {
        out.push(Violation {
            frame: None,
            rule: "nonempty_frames",
        });
    }
    if !(r.fps.is_finite() && r.fps > 0.0) {
        out.push(Violation {
            frame: None,
            rule: "positive_fps",
        });
    }
    if let Some(s) = r.score {
        if s > 3 {
            out.push(Violation {
                frame: None,
                rule: "score_range",
            });
        }
    }
    if let Some(a) = r.arrest {
        if a > 3 {
            out.push(Violation {
                frame: None,
                rule: "arrest_range",
            });
        }
    }
    for (i, f) in r.frames.iter().enumerate() {
        if !f.t.is_finite() || f.t < 0.0 {
            out.push(Violation {
                frame: Some(i),
                rule: "nonnegative_time",
            });
        }
        if f.points.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
            out.push(Violation {
                frame: Some(i),
                rule: "finite_coords",
            });
        }
    }
    if r.fps > 0.0 {
        for i in 1..r.frames.len() {
            let dt = r.frames[i].t - r.frames[i - 1].t;
            if dt <= 0.0 {
                out.push(Violation {
                    frame: Some(i),
                    rule: "monotone_time",
                });
            } else if (dt - 1.0 / r.fps).abs() > 0.5 / r.fps {
                out.push(Violation {
                    frame: Some(i),
                    rule: "frame_spacing",
                });
            }
        }
    }
    out
}

/// Serialize a recording to the JSONL format. Output coordinates are the
/// stored pixel values, so `parse_jsonl(write_jsonl(r)) == r` bit-exactly.
pub fn write_jsonl<W: Write>(r: &Recording, w: &mut W) -> std::io::Result<()> {
    let meta = RecordingMeta {
        movement: r.movement,
        side: r.side,
        fps: r.fps,
        subject_id: r.subject_id.clone(),
        score: r.score,
        arrest: r.arrest,
        image_width: None,
        image_height: None,
    };
    writeln!(w, "{}", serde_json::json!({ "meta": meta }))?;
    for (i, f) in r.frames.iter().enumerate() {
        let obj = serde_json::json!({
            "frame": i,
            "t": f.t,
            "landmarks": f.points,
        });
        writeln!(w, "{obj}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn frame_json(idx: usize, t: Option<f64>, n_points: usize) -> String {
        let pts: Vec<[f64; 3]> = (0..n_points)
            .map(|p| [p as f64, 2.0 * p as f64, 0.5])
            .collect();
        match t {
            Some(t) => serde_json::json!({"frame": idx, "t": t, "landmarks": pts}).to_string(),
            None => serde_json::json!({"frame": idx, "landmarks": pts}).to_string(),
        }
    }

    fn header(extra: &str) -> String {
        format!(
            "{{\"meta\":{{\"movement\":\"finger_tapping\",\"side\":\"left\",\"fps\":30.0,\"subject_id\":\"s1\"{extra}}}}}"
        )
    }

    #[test]
    fn parses_minimal_two_frame_jsonl() {
        let text = format!(
            "{}\n{}\n{}\n",
            header(""),
            frame_json(0, None, 21),
            frame_json(1, None, 21)
        );
        let rec = parse_jsonl(Cursor::new(text)).unwrap();
        assert_eq!(rec.frames.len(), 2);
        assert_eq!(rec.movement, MovementKind::FingerTapping);
        assert!((rec.frames[1].t - rec.frames[0].t - 1.0 / 30.0).abs() < 1e-12);
        assert!(validate_recording(&rec).is_empty());
    }

    #[test]
    fn landmark_count_error_names_the_frame() {
        let text = format!(
            "{}\n{}\n{}\n",
            header(""),
            frame_json(0, None, 21),
            frame_json(1, None, 20)
        );
        match parse_jsonl(Cursor::new(text)) {
            Err(ParseError::LandmarkCount { frame, found }) => {
                assert_eq!(frame, 1);
                assert_eq!(found, 20);
            }
            other => panic!("expected LandmarkCount, got {other:?}"),
        }
    }

    #[test]
    fn non_monotone_timestamps_rejected() {
        let text = format!(
            "{}\n{}\n{}\n{}\n",
            header(""),
            frame_json(0, Some(0.0), 21),
            frame_json(1, Some(0.0333), 21),
            frame_json(2, Some(0.0300), 21)
        );
        match parse_jsonl(Cursor::new(text)) {
            Err(ParseError::Timestamp { frame }) => assert_eq!(frame, 2),
            other => panic!("expected Timestamp, got {other:?}"),
        }
    }

    #[test]
    fn missing_metadata_is_reported_by_name() {
        let text = format!(
            "{{\"meta\":{{\"movement\":\"finger_tapping\",\"side\":\"left\",\"subject_id\":\"s\"}}}}\n{}\n",
            frame_json(0, None, 21)
        );
        match parse_jsonl(Cursor::new(text)) {
            Err(ParseError::MissingMetadata(name)) => assert_eq!(name, "fps"),
            other => panic!("expected MissingMetadata, got {other:?}"),
        }
    }

    #[test]
    fn normalized_inputs_are_rescaled_exactly() {
        let pts: Vec<[f64; 3]> = (0..21).map(|p| [0.25, 0.5, 0.125 + p as f64 * 0.0]).collect();
        let frame = serde_json::json!({"frame": 0, "landmarks": pts}).to_string();
        let text = format!(
            "{}\n{}\n",
            header(",\"image_width\":640,\"image_height\":480"),
            frame
        );
        let rec = parse_jsonl(Cursor::new(text)).unwrap();
        let p = rec.frames[0].points[0];
        assert_eq!(p[0], 0.25 * 640.0);
        assert_eq!(p[1], 0.5 * 480.0);
        assert_eq!(p[2], 0.125 * 640.0);
    }

    #[test]
    fn validate_reports_nan_and_bad_fps() {
        let mut rec = small_recording();
        rec.frames[0].points[3][1] = f64::NAN;
        rec.fps = 0.0;
        let v = validate_recording(&rec);
        assert!(v.contains(&Violation {
            frame: Some(0),
            rule: "finite_coords"
        }));
        assert!(v.contains(&Violation {
            frame: None,
            rule: "positive_fps"
        }));
    }

    #[test]
    fn csv_round_trips_against_jsonl() {
        let rec = small_recording();
        let mut csv_text = String::from("frame,t");
        for p in 0..21 {
            csv_text.push_str(&format!(",p{p}_x,p{p}_y,p{p}_z"));
        }
        csv_text.push('\n');
        for (i, f) in rec.frames.iter().enumerate() {
            csv_text.push_str(&format!("{i},{}", f.t));
            for p in f.points.iter() {
                csv_text.push_str(&format!(",{},{},{}", p[0], p[1], p[2]));
            }
            csv_text.push('\n');
        }
        let meta = RecordingMeta {
            movement: rec.movement,
            side: rec.side,
            fps: rec.fps,
            subject_id: rec.subject_id.clone(),
            score: rec.score,
            arrest: rec.arrest,
            image_width: None,
            image_height: None,
        };
        let parsed = parse_csv(Cursor::new(csv_text), meta).unwrap();
        assert_eq!(parsed, rec);
    }

    #[test]
    fn jsonl_round_trip_is_bit_exact() {
        let rec = small_recording();
        let mut buf = Vec::new();
        write_jsonl(&rec, &mut buf).unwrap();
        let back = parse_jsonl(Cursor::new(buf)).unwrap();
        assert_eq!(back, rec);
    }

    fn small_recording() -> Recording {
        let mk_frame = |i: usize| {
            let mut points = [[0.0; 3]; 21];
            for (p, pt) in points.iter_mut().enumerate() {
                *pt = [
                    100.0 + p as f64 * 3.1 + i as f64 * 0.37,
                    50.0 + p as f64 * 1.7,
                    0.25 * p as f64,
                ];
            }
            LandmarkFrame {
                t: i as f64 / 30.0,
                points,
            }
        };
        Recording {
            movement: MovementKind::HandMovement,
            side: Side::Right,
            fps: 30.0,
            subject_id: "subj-7".into(),
            score: Some(2),
            arrest: Some(1),
            frames: (0..4).map(mk_frame).collect(),
        }
    }
}
