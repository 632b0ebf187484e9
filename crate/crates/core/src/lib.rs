//! Quantification of Parkinsonian bradykinesia severity (MDS-UPDRS 0-3)
//! from 21-point hand-landmark time series.
//!
//! The pipeline mirrors the clinical rating procedure: a movement-specific
//! distance signal is built from the landmarks and normalized by palm
//! length, smoothed, and segmented into movement cycles. Per-cycle
//! amplitude and interval sequences feed two classifiers arranged
//! hierarchically: a small LSTM-FCN network scores occasional arrests,
//! and a gradient-boosted tree ensemble combines amplitude, interval,
//! fatigue, and arrest features into the final 0-3 score. Statistical
//! validation (semiparametric ordinal regression with bootstrap
//! inference, a random-intercept model, ROC/confusion metrics) and a
//! severity-parameterized synthetic motion generator round out the crate.
//!
//! See the `examples/` directory for one runnable program per capability;
//! the `bradyscore` binary wires the same stages into a CLI.

// index loops mirror the matrix math throughout the numerical code
#![allow(clippy::needless_range_loop)]

pub mod arrest;
pub mod boost;
pub mod cli;
pub mod config;
pub mod dist;
pub mod features;
pub mod landmark;
pub mod linalg;
pub mod pipeline;
pub mod rng;
pub mod signal;
pub mod stats;
pub mod synth;

pub use config::PipelineConfig;
pub use features::FeatureVector;
pub use landmark::{LandmarkFrame, MovementKind, Recording, Side};
pub use signal::{CycleSeries, DistanceSeries, ExtremaConfig, ExtremaSet, SmoothedSeries};
