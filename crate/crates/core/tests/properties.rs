//! Property tests for the contracts that must hold on arbitrary valid
//! inputs, not just the hand-picked cases.

use bradyscore::features::fatigue_feature;
use bradyscore::landmark::{
    parse_jsonl, validate_recording, write_jsonl, LandmarkFrame, MovementKind, Recording, Side,
};
use bradyscore::signal::{savgol_filter, savgol_weights};
use bradyscore::stats::binary_auc;
use proptest::prelude::*;

fn movement_strategy() -> impl Strategy<Value = MovementKind> {
    prop_oneof![
        Just(MovementKind::FingerTapping),
        Just(MovementKind::HandMovement),
        Just(MovementKind::RapidAm),
    ]
}

fn recording_strategy() -> impl Strategy<Value = Recording> {
    (
        movement_strategy(),
        prop_oneof![Just(Side::Left), Just(Side::Right)],
        10.0f64..240.0,
        prop::collection::vec(prop::collection::vec(-1e4f64..1e4, 63), 1..40),
        prop::option::of(0u8..=3),
        prop::option::of(0u8..=3),
        "[a-z0-9-]{1,12}",
    )
        .prop_map(|(movement, side, fps, frames, score, arrest, subject_id)| {
            let frames = frames
                .into_iter()
                .enumerate()
                .map(|(i, coords)| {
                    let mut points = [[0.0; 3]; 21];
                    for p in 0..21 {
                        points[p] = [coords[3 * p], coords[3 * p + 1], coords[3 * p + 2]];
                    }
                    LandmarkFrame {
                        t: i as f64 / fps,
                        points,
                    }
                })
                .collect();
            Recording {
                movement,
                side,
                fps,
                subject_id,
                score,
                arrest,
                frames,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Serialization then parsing returns the identical recording, and
    /// every parsed recording validates clean.
    #[test]
    fn jsonl_round_trip_is_identity(rec in recording_strategy()) {
        prop_assert!(validate_recording(&rec).is_empty());
        let mut buf = Vec::new();
        write_jsonl(&rec, &mut buf).unwrap();
        let back = parse_jsonl(&buf[..]).unwrap();
        prop_assert_eq!(back, rec);
    }

    /// Filter weights sum to one with zero first moment, and filtering
    /// is linear, for arbitrary admissible configurations.
    #[test]
    fn savgol_moments_and_linearity(
        half in 1usize..6,
        order_off in 0usize..3,
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        signal in prop::collection::vec(-10.0f64..10.0, 16..80),
    ) {
        let window = 2 * half + 1;
        let polyorder = (window - 1).saturating_sub(order_off).max(1).min(window - 1);
        let weights = savgol_weights(window, polyorder).unwrap();
        let sum: f64 = weights.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        let m1: f64 = weights
            .iter()
            .zip(-(half as i64)..=half as i64)
            .map(|(w, off)| w * off as f64)
            .sum();
        prop_assert!(m1.abs() < 1e-12);

        if signal.len() >= window {
            let s2: Vec<f64> = signal.iter().rev().cloned().collect();
            let combined: Vec<f64> = signal.iter().zip(&s2).map(|(x, y)| a * x + b * y).collect();
            let f_comb = savgol_filter(&combined, window, polyorder).unwrap();
            let f1 = savgol_filter(&signal, window, polyorder).unwrap();
            let f2 = savgol_filter(&s2, window, polyorder).unwrap();
            for i in 0..signal.len() {
                let want = a * f1[i] + b * f2[i];
                prop_assert!((f_comb[i] - want).abs() <= 1e-9 * want.abs().max(1.0));
            }
        }
    }

    /// Rank-based AUC equals the quadratic pairwise count with half
    /// credit for ties, on arbitrary label/score vectors.
    #[test]
    fn auc_matches_pairwise_counting(
        rows in prop::collection::vec((0u8..=3, 0u32..12), 4..120),
    ) {
        let truth: Vec<u8> = rows.iter().map(|(t, _)| *t).collect();
        let score: Vec<f64> = rows.iter().map(|(_, q)| *q as f64 / 11.0).collect();
        let has_pos = truth.iter().any(|&t| t >= 2);
        let has_neg = truth.iter().any(|&t| t < 2);
        prop_assume!(has_pos && has_neg);
        let (_, auc) = binary_auc(&truth, &score).unwrap();
        let mut concordant = 0.0;
        let mut pairs = 0.0;
        for i in 0..truth.len() {
            for j in 0..truth.len() {
                if truth[i] >= 2 && truth[j] < 2 {
                    pairs += 1.0;
                    if score[i] > score[j] {
                        concordant += 1.0;
                    } else if score[i] == score[j] {
                        concordant += 0.5;
                    }
                }
            }
        }
        prop_assert_eq!(auc, concordant / pairs);
    }

    /// Scaling every amplitude by c scales fatigue by c^3 exactly (the
    /// significance gate is scale-free, the slope is linear in c, and
    /// the weight ratio is invariant).
    #[test]
    fn fatigue_cubic_scaling(
        amps in prop::collection::vec(0.05f64..3.0, 5..10),
        c in 0.05f64..8.0,
    ) {
        let base = fatigue_feature(&amps).value;
        let scaled: Vec<f64> = amps.iter().map(|a| a * c).collect();
        let got = fatigue_feature(&scaled).value;
        let want = base * c * c * c;
        prop_assert!(
            (got - want).abs() <= 1e-9 * want.abs().max(1e-12),
            "base {base}, c {c}: {got} vs {want}"
        );
    }
}
