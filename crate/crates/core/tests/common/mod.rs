//! Shared fixtures for integration tests: a simulator drawing ordinal
//! responses from a purely parametric cumulative-logit truth, used to
//! check that the additive-model fitter recovers known coefficients.

use bradyscore::rng::{seeded_rng, uniform};
use bradyscore::FeatureVector;
use rand::Rng;

pub const SIM_THRESHOLDS: [f64; 3] = [-1.5, 0.3, 2.0];

/// Draw `n` rows with `eta = beta1 * fatigue + gamma[arrest - 1]`; the
/// smooth-term covariates are present but carry no effect.
pub fn simulate_ordinal(
    n: usize,
    beta1: f64,
    gamma: [f64; 3],
    seed: u64,
) -> Vec<(FeatureVector, u8)> {
    let mut rng = seeded_rng(seed);
    (0..n)
        .map(|_| {
            let fatigue = uniform(&mut rng, -1.0, 1.0);
            let arrest = (rng.random::<u32>() % 4) as u8;
            let eta = beta1 * fatigue
                + if arrest >= 1 {
                    gamma[arrest as usize - 1]
                } else {
                    0.0
                };
            let u: f64 = rng.random();
            let mut y = 3u8;
            for (c, &theta) in SIM_THRESHOLDS.iter().enumerate() {
                if u <= 1.0 / (1.0 + (-(theta - eta)).exp()) {
                    y = c as u8;
                    break;
                }
            }
            let f = FeatureVector {
                mean_amp: uniform(&mut rng, 0.5, 1.5),
                rsd_amp: uniform(&mut rng, 0.0, 0.2),
                mean_int: uniform(&mut rng, 0.2, 0.6),
                rsd_int: uniform(&mut rng, 0.0, 0.2),
                fatigue,
                arrest,
            };
            (f, y)
        })
        .collect()
}
