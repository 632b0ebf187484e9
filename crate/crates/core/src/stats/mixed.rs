//! One-way random-intercept model for prediction-versus-expert score
//! differences: `Y_ij = beta0 + u_j + e_ij`, with tasks as groups.
//!
//! REML estimation profiles the variance ratio `psi = sigma2_u /
//! sigma2_e`: for fixed psi the GLS mean and residual variance have
//! closed forms, so a scalar grid plus golden-section refinement finds
//! the optimum deterministically.

use serde::Serialize;

use super::StatsError;
use crate::dist::normal_p_two_sided;
use crate::landmark::MovementKind;

#[derive(Debug, Clone, Serialize)]
pub struct MixedModel {
    /// Fixed intercept: the overall mean difference.
    pub beta0: f64,
    /// Task-group random-intercept variance.
    pub sigma2_group: f64,
    /// Residual variance.
    pub sigma2_resid: f64,
    pub se_beta0: f64,
    /// Two-sided Wald p-value for beta0 = 0.
    pub p_value: f64,
    pub n_groups: usize,
    pub n_obs: usize,
    /// Set when the data carry no variance at all (p reported as 1).
    pub degenerate: bool,
}

struct GroupStats {
    n: f64,
    sum: f64,
    sum_sq: f64,
}

struct Profile<'a> {
    groups: &'a [GroupStats],
    n_total: f64,
}

impl Profile<'_> {
    /// (REML criterion, beta0, sigma2_resid, info denominator) at psi.
    fn eval(&self, psi: f64) -> (f64, f64, f64, f64) {
        let mut log_det = 0.0;
        let mut denom = 0.0;
        let mut s_w = 0.0;
        let mut quad_all = 0.0;
        for g in self.groups {
            let w = 1.0 / (1.0 + psi * g.n);
            log_det += (1.0 + psi * g.n).ln();
            denom += g.n * w;
            s_w += g.sum * w;
            quad_all += g.sum_sq - psi * w * g.sum * g.sum;
        }
        let beta0 = s_w / denom;
        let ypy = (quad_all - s_w * s_w / denom).max(0.0);
        let df = self.n_total - 1.0;
        let sigma2 = ypy / df;
        let criterion = if sigma2 > 0.0 {
            -0.5 * (log_det + df * sigma2.ln() + denom.ln())
        } else {
            f64::NEG_INFINITY
        };
        (criterion, beta0, sigma2, denom)
    }
}

/// Fit the random-intercept model on (difference, task) pairs. Every
/// group present needs at least two observations.
pub fn fit_mixed(values: &[(f64, MovementKind)]) -> Result<MixedModel, StatsError> {
    let mut by_group: Vec<Vec<f64>> = vec![Vec::new(); 3];
    for (v, m) in values {
        if !v.is_finite() {
            return Err(StatsError::BadInput("non-finite difference".into()));
        }
        let gi = MovementKind::ALL.iter().position(|k| k == m).unwrap();
        by_group[gi].push(*v);
    }
    let groups: Vec<GroupStats> = by_group
        .iter()
        .filter(|g| !g.is_empty())
        .map(|g| GroupStats {
            n: g.len() as f64,
            sum: g.iter().sum(),
            sum_sq: g.iter().map(|v| v * v).sum(),
        })
        .collect();
    if groups.is_empty() || groups.iter().any(|g| g.n < 2.0) {
        return Err(StatsError::DegenerateGroups);
    }
    let n_total: f64 = groups.iter().map(|g| g.n).sum();
    let n_obs = n_total as usize;
    let n_groups = groups.len();

    let grand_mean: f64 = groups.iter().map(|g| g.sum).sum::<f64>() / n_total;
    let total_ss: f64 = groups
        .iter()
        .map(|g| g.sum_sq - 2.0 * grand_mean * g.sum + g.n * grand_mean * grand_mean)
        .sum();
    if total_ss <= 1e-12 * n_total * (1.0 + grand_mean * grand_mean) {
        // no variance anywhere: the conventional degenerate report
        return Ok(MixedModel {
            beta0: grand_mean,
            sigma2_group: 0.0,
            sigma2_resid: 0.0,
            se_beta0: 0.0,
            p_value: 1.0,
            n_groups,
            n_obs,
            degenerate: true,
        });
    }

    let profile = Profile {
        groups: &groups,
        n_total,
    };

    // psi grid (0 included). Improvements must clear a tolerance so a
    // flat profile (one group) keeps the smallest psi instead of letting
    // rounding noise pick one arbitrarily.
    let improves = |v: f64, best: f64| v > best + 1e-9 * (1.0 + best.abs());
    let mut best_psi = 0.0;
    let mut best_val = profile.eval(0.0).0;
    let mut grid = vec![0.0];
    for i in 0..=120 {
        grid.push(10f64.powf(-8.0 + 12.0 * i as f64 / 120.0));
    }
    for &psi in &grid {
        let v = profile.eval(psi).0;
        if improves(v, best_val) {
            best_val = v;
            best_psi = psi;
        }
    }
    // golden-section refinement around the best grid point
    if best_psi > 0.0 {
        let idx = grid.iter().position(|&p| p == best_psi).unwrap();
        let lo = if idx > 1 { grid[idx - 1] } else { 0.0 };
        let hi = grid.get(idx + 1).copied().unwrap_or(best_psi * 10.0);
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (lo, hi);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        for _ in 0..80 {
            if profile.eval(c).0 >= profile.eval(d).0 {
                b = d;
            } else {
                a = c;
            }
            c = b - phi * (b - a);
            d = a + phi * (b - a);
        }
        let refined = 0.5 * (a + b);
        if improves(profile.eval(refined).0, best_val) {
            best_psi = refined;
        }
    }

    let (_, beta0, sigma2, denom) = profile.eval(best_psi);
    let se = (sigma2 / denom).sqrt();
    let p_value = if se > 0.0 {
        normal_p_two_sided(beta0 / se)
    } else {
        1.0
    };
    Ok(MixedModel {
        beta0,
        sigma2_group: best_psi * sigma2,
        sigma2_resid: sigma2,
        se_beta0: se,
        p_value,
        n_groups,
        n_obs,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal, seeded_rng};

    fn kind(i: usize) -> MovementKind {
        MovementKind::ALL[i % 3]
    }

    #[test]
    fn all_zero_differences_report_p_one() {
        let values: Vec<(f64, MovementKind)> = (0..30).map(|i| (0.0, kind(i))).collect();
        let m = fit_mixed(&values).unwrap();
        assert_eq!(m.beta0, 0.0);
        assert_eq!(m.sigma2_group, 0.0);
        assert_eq!(m.p_value, 1.0);
        assert!(m.degenerate);
    }

    #[test]
    fn single_group_reduces_to_classical_mean_test() {
        let mut rng = seeded_rng(2);
        let values: Vec<(f64, MovementKind)> = (0..40)
            .map(|_| (0.3 + 0.8 * normal(&mut rng), MovementKind::FingerTapping))
            .collect();
        let m = fit_mixed(&values).unwrap();
        let n = values.len() as f64;
        let mean: f64 = values.iter().map(|(v, _)| v).sum::<f64>() / n;
        let s2: f64 = values
            .iter()
            .map(|(v, _)| (v - mean) * (v - mean))
            .sum::<f64>()
            / (n - 1.0);
        let se = (s2 / n).sqrt();
        assert!((m.beta0 - mean).abs() < 1e-9, "{} vs {mean}", m.beta0);
        assert!((m.se_beta0 - se).abs() < 1e-9, "{} vs {se}", m.se_beta0);
        let p_classical = normal_p_two_sided(mean / se);
        assert!((m.p_value - p_classical).abs() < 1e-9);
        assert_eq!(m.n_groups, 1);
    }

    #[test]
    fn groups_with_single_observation_are_rejected() {
        let values = vec![
            (0.1, MovementKind::FingerTapping),
            (0.2, MovementKind::FingerTapping),
            (0.3, MovementKind::HandMovement),
        ];
        assert!(matches!(
            fit_mixed(&values),
            Err(StatsError::DegenerateGroups)
        ));
    }

    #[test]
    fn recovers_variance_components_roughly() {
        let mut rng = seeded_rng(7);
        // strong group effects so psi is clearly positive
        let u = [1.0, -0.8, 0.4];
        let mut values = Vec::new();
        for (g, &ug) in u.iter().enumerate() {
            for _ in 0..200 {
                values.push((ug + 0.3 * normal(&mut rng), MovementKind::ALL[g]));
            }
        }
        let m = fit_mixed(&values).unwrap();
        assert!(m.sigma2_group > 0.1, "sigma2_group {}", m.sigma2_group);
        assert!((m.sigma2_resid - 0.09).abs() < 0.03, "resid {}", m.sigma2_resid);
    }

    #[test]
    fn calibrated_under_the_null() {
        // beta0 = 0, sigma_u = 0.1, sigma_e = 0.5, three balanced groups of
        // six: across 20 seeds at least 17 non-rejections at alpha = 0.05.
        let mut rejections = 0;
        for seed in 0..20 {
            let mut rng = seeded_rng(1000 + seed);
            let mut values = Vec::new();
            for g in 0..3 {
                let ug = 0.1 * normal(&mut rng);
                for _ in 0..6 {
                    values.push((ug + 0.5 * normal(&mut rng), MovementKind::ALL[g]));
                }
            }
            let m = fit_mixed(&values).unwrap();
            assert!((m.beta0).abs() < 3.0 * m.se_beta0.max(1e-9) + 1.0);
            if m.p_value < 0.05 {
                rejections += 1;
            }
        }
        assert!(rejections <= 3, "{rejections} rejections out of 20");
    }
}
