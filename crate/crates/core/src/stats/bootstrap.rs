//! Bootstrap standard errors and Wald p-values for the parametric
//! coefficients (beta1, gamma1..gamma3) of the additive ordinal model.
//!
//! Resampling is nonparametric and stratified by score so every
//! replicate keeps all four ordinal levels. Replicate seeds derive from a
//! counter, so results do not depend on evaluation order.

use rand::Rng;
use serde::Serialize;

use super::plam::{fit_plam, PlamConfig, PlamModel};
use super::StatsError;
use crate::features::FeatureVector;
use crate::rng::{derive_seed, seeded_rng};

/// Replicate coefficient draws with the derived inference quantities.
#[derive(Debug, Clone, Serialize)]
pub struct BootstrapResult {
    /// Full-data estimates of (beta1, gamma1, gamma2, gamma3).
    pub estimates: [f64; 4],
    /// Bootstrap standard errors (replicate standard deviation).
    pub se: [f64; 4],
    /// Two-sided normal Wald p-values.
    pub p_values: [f64; 4],
    /// 2.5% / 97.5% percentile intervals.
    pub percentile_ci: [[f64; 2]; 4],
    pub n_replicates: usize,
    pub n_skipped: usize,
    /// Flags coefficients whose replicates carried no variation.
    pub degenerate: [bool; 4],
    #[serde(skip)]
    pub replicates: Vec<[f64; 4]>,
}

fn coefs_of(m: &PlamModel) -> [f64; 4] {
    [m.beta_fatigue, m.gamma[0], m.gamma[1], m.gamma[2]]
}

/// Draw a score-stratified resample (each class resampled with
/// replacement onto its own count).
fn stratified_resample<R: Rng>(
    rows: &[(FeatureVector, u8)],
    rng: &mut R,
) -> Vec<(FeatureVector, u8)> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); 4];
    for (i, (_, y)) in rows.iter().enumerate() {
        by_class[*y as usize].push(i);
    }
    let mut out = Vec::with_capacity(rows.len());
    for members in by_class.iter().filter(|m| !m.is_empty()) {
        for _ in 0..members.len() {
            let pick = members[rng.random_range(0..members.len())];
            out.push(rows[pick]);
        }
    }
    out
}

/// Fit on the full data, then refit `b` stratified resamples. Fails when
/// more than 10% of replicates do not converge.
pub fn bootstrap_inference(
    rows: &[(FeatureVector, u8)],
    cfg: &PlamConfig,
    b: usize,
    seed: u64,
) -> Result<(PlamModel, BootstrapResult), StatsError> {
    assert!(b >= 10, "bootstrap needs a sensible replicate count");
    let full = fit_plam(rows, cfg)?;
    let estimates = coefs_of(&full);

    let mut replicates = Vec::with_capacity(b);
    let mut skipped = 0usize;
    for r in 0..b {
        let mut rng = seeded_rng(derive_seed(seed, r as u64));
        let sample = stratified_resample(rows, &mut rng);
        match fit_plam(&sample, cfg) {
            Ok(m) => replicates.push(coefs_of(&m)),
            Err(_) => skipped += 1,
        }
    }
    if skipped * 10 > b {
        return Err(StatsError::BootstrapUnstable { skipped, total: b });
    }

    let nrep = replicates.len();
    let mut se = [0.0; 4];
    let mut p_values = [1.0; 4];
    let mut degenerate = [false; 4];
    let mut percentile_ci = [[0.0; 2]; 4];
    for k in 0..4 {
        let mean: f64 = replicates.iter().map(|r| r[k]).sum::<f64>() / nrep as f64;
        let var: f64 = replicates
            .iter()
            .map(|r| (r[k] - mean) * (r[k] - mean))
            .sum::<f64>()
            / (nrep - 1) as f64;
        se[k] = var.sqrt();
        if se[k] > 0.0 {
            p_values[k] = crate::dist::normal_p_two_sided(estimates[k] / se[k]);
        } else {
            degenerate[k] = true;
            p_values[k] = 1.0;
        }
        let mut sorted: Vec<f64> = replicates.iter().map(|r| r[k]).collect();
        sorted.sort_by(f64::total_cmp);
        let idx = |q: f64| {
            let pos = (q * (nrep - 1) as f64).round() as usize;
            sorted[pos.min(nrep - 1)]
        };
        percentile_ci[k] = [idx(0.025), idx(0.975)];
    }

    Ok((
        full,
        BootstrapResult {
            estimates,
            se,
            p_values,
            percentile_ci,
            n_replicates: nrep,
            n_skipped: skipped,
            degenerate,
            replicates,
        },
    ))
}
