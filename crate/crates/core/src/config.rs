//! Pipeline configuration: one JSON tree covering every stage, fully
//! defaulted, with unknown keys rejected. `--dump-config` on the CLI
//! prints the effective tree; a file passed with `--config` replaces it.

use serde::{Deserialize, Serialize};

use crate::arrest::{NetConfig, TrainConfig};
use crate::boost::BoostConfig;
use crate::landmark::MovementKind;
use crate::signal::ExtremaConfig;
use crate::stats::PlamConfig;

/// Savitzky-Golay window and polynomial order for one movement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSetting {
    pub window: usize,
    pub polyorder: usize,
}

/// Per-movement smoothing settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub finger_tapping: FilterSetting,
    pub hand_movement: FilterSetting,
    pub rapid_am: FilterSetting,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            finger_tapping: FilterSetting {
                window: 7,
                polyorder: 3,
            },
            hand_movement: FilterSetting {
                window: 7,
                polyorder: 3,
            },
            rapid_am: FilterSetting {
                window: 5,
                polyorder: 4,
            },
        }
    }
}

/// Fatigue-feature settings: sliding-window width and significance gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FatigueConfig {
    pub window: usize,
    pub gate: f64,
}

impl Default for FatigueConfig {
    fn default() -> Self {
        FatigueConfig {
            window: crate::features::FATIGUE_WINDOW,
            gate: crate::features::FATIGUE_GATE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub filters: FilterConfig,
    pub extrema: ExtremaConfig,
    pub fatigue: FatigueConfig,
    pub net: NetConfig,
    pub train: TrainConfig,
    pub boost: BoostConfig,
    pub plam: PlamConfig,
    /// Invert the palm-orientation convention of the rapid-AM sign rule.
    pub rapid_am_flip_orientation: bool,
}

impl PipelineConfig {
    pub fn filter_for(&self, movement: MovementKind) -> FilterSetting {
        match movement {
            MovementKind::FingerTapping => self.filters.finger_tapping,
            MovementKind::HandMovement => self.filters.hand_movement,
            MovementKind::RapidAm => self.filters.rapid_am,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, f) in [
            ("finger_tapping", self.filters.finger_tapping),
            ("hand_movement", self.filters.hand_movement),
            ("rapid_am", self.filters.rapid_am),
        ] {
            if f.window % 2 == 0 || f.polyorder >= f.window {
                return Err(format!(
                    "filter {name}: window must be odd and > polyorder (got {}, {})",
                    f.window, f.polyorder
                ));
            }
        }
        if self.fatigue.window < 3 || self.fatigue.window > crate::signal::MAX_CYCLES {
            return Err("fatigue window must be in 3..=10".into());
        }
        if !(0.0 < self.fatigue.gate && self.fatigue.gate < 1.0) {
            return Err("fatigue gate must be in (0, 1)".into());
        }
        if !(0.0 < self.extrema.prominence_frac && self.extrema.prominence_frac < 1.0) {
            return Err("prominence_frac must be in (0, 1)".into());
        }
        self.net.validate().map_err(|e| e.to_string())?;
        Ok(())
    }
}

/// Override every stage seed from one master seed (the CLI `--seed`).
/// Each stage gets an independent derived stream.
pub fn reseed(cfg: &mut PipelineConfig, master: u64) {
    cfg.net.seed = crate::rng::derive_seed(master, 1);
    cfg.train.seed = crate::rng::derive_seed(master, 2);
    cfg.boost.seed = crate::rng::derive_seed(master, 3);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: PipelineConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"no_such_setting": 1}"#;
        assert!(serde_json::from_str::<PipelineConfig>(text).is_err());
        let nested = r#"{"filters": {"finger_tapping": {"window": 7, "polyorder": 3, "bogus": 2}}}"#;
        assert!(serde_json::from_str::<PipelineConfig>(nested).is_err());
    }

    #[test]
    fn partial_configs_fill_from_defaults() {
        let text = r#"{"boost": {"n_rounds": 7}}"#;
        let cfg: PipelineConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.boost.n_rounds, 7);
        assert_eq!(cfg.boost.max_depth, BoostConfig::default().max_depth);
        assert_eq!(cfg.filters, FilterConfig::default());
    }

    #[test]
    fn default_filters_match_the_movement_table() {
        let cfg = PipelineConfig::default();
        let ft = cfg.filter_for(MovementKind::FingerTapping);
        assert_eq!((ft.window, ft.polyorder), (7, 3));
        let hm = cfg.filter_for(MovementKind::HandMovement);
        assert_eq!((hm.window, hm.polyorder), (7, 3));
        let ra = cfg.filter_for(MovementKind::RapidAm);
        assert_eq!((ra.window, ra.polyorder), (5, 4));
    }

    #[test]
    fn bad_settings_fail_validation() {
        let mut cfg = PipelineConfig::default();
        cfg.filters.rapid_am.window = 4;
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::default();
        cfg.fatigue.gate = 1.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn reseed_diverges_stage_seeds() {
        let mut cfg = PipelineConfig::default();
        reseed(&mut cfg, 7);
        assert_ne!(cfg.net.seed, cfg.train.seed);
        assert_ne!(cfg.train.seed, cfg.boost.seed);
        let mut again = PipelineConfig::default();
        reseed(&mut again, 7);
        assert_eq!(cfg, again);
    }
}
