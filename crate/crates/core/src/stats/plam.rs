//! Partially linear additive cumulative-logit regression, the
//! significance-testing model for the fatigue and arrest features.
//!
//! The ordinal response (score 0-3) is modeled through
//! `logit P(Y <= c) = theta_c - eta` with
//! `eta = s1(mean_amp) + s2(rsd_amp) + s3(mean_int) + s4(rsd_int)
//!        + beta1 * fatigue + sum_k gamma_k I(arrest = k)`,
//! the smooths being penalized cubic B-splines (10 basis functions,
//! second-difference penalty). Fitting is cyclic backfitting on the
//! penalized likelihood: a Newton step for the parametric block
//! (thresholds, beta1, gamma) holding the smooths fixed, then a penalized
//! Newton step per smooth, every step halved until the objective does not
//! decrease. Each smooth is centered after its update (sample mean zero)
//! with the mean absorbed into the thresholds.

use serde::{Deserialize, Serialize};

use super::bspline::{penalty_quadform, second_difference_gram, Basis};
use super::StatsError;
use crate::features::FeatureVector;
use crate::linalg::{solve, Mat};

/// Number of smooth terms (the four summary statistics).
pub const N_SMOOTH: usize = 4;
/// Parametric coefficients: fatigue plus three arrest contrasts
/// (category 0 is the reference).
pub const N_PARAM: usize = 4;
const N_THETA: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlamConfig {
    pub n_basis: usize,
    pub lambda: f64,
    pub max_cycles: usize,
    pub tol: f64,
    /// Pick lambda from {0.01, 0.1, 1, 10, 100} by 5-fold deviance
    /// instead of using `lambda` directly.
    pub select_lambda: bool,
    /// Coefficients diverging past this magnitude are clamped and the
    /// model flagged (quasi-separation).
    pub coef_clamp: f64,
    /// Bootstrap replicates used by the significance report.
    pub bootstrap_b: usize,
}

impl Default for PlamConfig {
    fn default() -> Self {
        PlamConfig {
            n_basis: 10,
            lambda: 1.0,
            max_cycles: 200,
            tol: 1e-6,
            select_lambda: false,
            coef_clamp: 1e3,
            bootstrap_b: 200,
        }
    }
}

/// One fitted smooth term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Smooth {
    pub basis: Basis,
    pub coefs: Vec<f64>,
}

impl Smooth {
    pub fn eval(&self, x: f64) -> f64 {
        self.basis
            .eval(x)
            .iter()
            .zip(&self.coefs)
            .map(|(b, c)| b * c)
            .sum()
    }
}

/// Fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlamModel {
    /// Ordered cumulative-logit cutpoints.
    pub thresholds: [f64; N_THETA],
    pub smooths: Vec<Smooth>,
    pub beta_fatigue: f64,
    pub gamma: [f64; 3],
    pub lambda: f64,
    /// Penalized objective after each backfitting cycle.
    pub objective_history: Vec<f64>,
    pub cycles_run: usize,
    pub separation_detected: bool,
}

impl PlamModel {
    /// Linear predictor for one feature vector.
    pub fn eta(&self, f: &FeatureVector) -> f64 {
        let u = smooth_inputs(f);
        let mut eta: f64 = self
            .smooths
            .iter()
            .zip(u.iter())
            .map(|(s, &x)| s.eval(x))
            .sum();
        eta += self.beta_fatigue * f.fatigue;
        if f.arrest >= 1 {
            eta += self.gamma[f.arrest as usize - 1];
        }
        eta
    }

    /// P(Y <= c) for c = 0, 1, 2 (P(Y <= 3) = 1).
    pub fn cumulative_probs(&self, f: &FeatureVector) -> [f64; N_THETA] {
        let eta = self.eta(f);
        let mut out = [0.0; N_THETA];
        for (c, o) in out.iter_mut().enumerate() {
            *o = logistic(self.thresholds[c] - eta);
        }
        out
    }

    /// Class probabilities.
    pub fn class_probs(&self, f: &FeatureVector) -> [f64; 4] {
        let cum = self.cumulative_probs(f);
        [
            cum[0],
            (cum[1] - cum[0]).max(0.0),
            (cum[2] - cum[1]).max(0.0),
            (1.0 - cum[2]).max(0.0),
        ]
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub(crate) fn smooth_inputs(f: &FeatureVector) -> [f64; N_SMOOTH] {
    [f.mean_amp, f.rsd_amp, f.mean_int, f.rsd_int]
}

fn parametric_inputs(f: &FeatureVector) -> [f64; N_PARAM] {
    let mut z = [0.0; N_PARAM];
    z[0] = f.fatigue;
    if f.arrest >= 1 {
        z[f.arrest as usize] = 1.0;
    }
    z
}

/// Per-observation first and second derivatives of the log-likelihood
/// with respect to (theta_0..theta_2, eta).
struct ObsDerivs {
    loglik: f64,
    grad: [f64; 4],
    hess: [[f64; 4]; 4],
}

fn obs_derivs(theta: &[f64; N_THETA], eta: f64, y: u8) -> ObsDerivs {
    let c = y as usize;
    // F_c and F_{c-1}, their densities, and density derivatives
    let (f_hi, d_hi, dd_hi) = if c < N_THETA {
        let big_f = logistic(theta[c] - eta);
        let dens = big_f * (1.0 - big_f);
        (big_f, dens, dens * (1.0 - 2.0 * big_f))
    } else {
        (1.0, 0.0, 0.0)
    };
    let (f_lo, d_lo, dd_lo) = if c > 0 {
        let big_f = logistic(theta[c - 1] - eta);
        let dens = big_f * (1.0 - big_f);
        (big_f, dens, dens * (1.0 - 2.0 * big_f))
    } else {
        (0.0, 0.0, 0.0)
    };
    let pi = (f_hi - f_lo).max(1e-300);

    // dpi/dtheta_a is d_hi at a = c, -d_lo at a = c-1, zero elsewhere;
    // dpi/deta = -d_hi + d_lo. Work with the index set {theta0..2, eta}.
    let mut dpi = [0.0; 4];
    let mut ddpi = [[0.0; 4]; 4]; // second derivatives of pi
    if c < N_THETA {
        dpi[c] = d_hi;
        ddpi[c][c] += dd_hi;
        ddpi[c][3] -= dd_hi;
        ddpi[3][c] -= dd_hi;
    }
    if c > 0 {
        dpi[c - 1] -= d_lo;
        ddpi[c - 1][c - 1] -= dd_lo;
        ddpi[c - 1][3] += dd_lo;
        ddpi[3][c - 1] += dd_lo;
    }
    dpi[3] = -d_hi + d_lo;
    ddpi[3][3] = dd_hi - dd_lo;

    // l = ln pi: dl = dpi/pi, d2l = ddpi/pi - dpi dpi^T / pi^2
    let mut grad = [0.0; 4];
    let mut hess = [[0.0; 4]; 4];
    for a in 0..4 {
        grad[a] = dpi[a] / pi;
        for b in 0..4 {
            hess[a][b] = ddpi[a][b] / pi - dpi[a] * dpi[b] / (pi * pi);
        }
    }
    ObsDerivs {
        loglik: pi.ln(),
        grad,
        hess,
    }
}

struct Workspace<'a> {
    rows: &'a [(FeatureVector, u8)],
    z: Vec<[f64; N_PARAM]>,
    /// basis rows per smooth: b[j][i] is the basis vector of obs i
    b: Vec<Vec<Vec<f64>>>,
    dtd: Vec<f64>,
    lambda: f64,
    frozen: [bool; N_PARAM],
    k: usize,
    /// coefficient box: candidate steps are projected into it, so
    /// quasi-separated fits saturate at the bound instead of diverging
    clamp: f64,
}

struct State {
    theta: [f64; N_THETA],
    delta: [f64; N_PARAM],
    alpha: Vec<Vec<f64>>,
    eta: Vec<f64>,
}

impl Workspace<'_> {
    fn eta_of(&self, state: &State, i: usize) -> f64 {
        let mut eta = 0.0;
        for j in 0..N_SMOOTH {
            for (bk, ak) in self.b[j][i].iter().zip(&state.alpha[j]) {
                eta += bk * ak;
            }
        }
        for (zk, dk) in self.z[i].iter().zip(&state.delta) {
            eta += zk * dk;
        }
        eta
    }

    fn refresh_eta(&self, state: &mut State) {
        for i in 0..self.rows.len() {
            state.eta[i] = self.eta_of(state, i);
        }
    }

    fn penalty(&self, state: &State) -> f64 {
        state
            .alpha
            .iter()
            .map(|a| penalty_quadform(&self.dtd, a))
            .sum::<f64>()
            * 0.5
            * self.lambda
    }

    fn loglik(&self, state: &State) -> f64 {
        self.rows
            .iter()
            .zip(&state.eta)
            .map(|((_, y), &eta)| obs_derivs(&state.theta, eta, *y).loglik)
            .sum()
    }

    fn objective(&self, state: &State) -> f64 {
        self.loglik(state) - self.penalty(state)
    }

    /// One Newton step with halving on the parametric block. Candidate
    /// coefficients are projected into the clamp box. Returns the largest
    /// realized coefficient change.
    fn update_parametric(&self, state: &mut State, q_current: &mut f64) -> f64 {
        let dim = N_THETA + N_PARAM;
        let mut grad = vec![0.0; dim];
        let mut hess = Mat::zeros(dim, dim);
        for (i, (_, y)) in self.rows.iter().enumerate() {
            let d = obs_derivs(&state.theta, state.eta[i], *y);
            for a in 0..N_THETA {
                grad[a] += d.grad[a];
                for b in 0..N_THETA {
                    hess[(a, b)] += d.hess[a][b];
                }
                for (kz, &zk) in self.z[i].iter().enumerate() {
                    hess[(a, N_THETA + kz)] += d.hess[a][3] * zk;
                    hess[(N_THETA + kz, a)] += d.hess[3][a] * zk;
                }
            }
            for (kz, &zk) in self.z[i].iter().enumerate() {
                grad[N_THETA + kz] += d.grad[3] * zk;
                for (lz, &zl) in self.z[i].iter().enumerate() {
                    hess[(N_THETA + kz, N_THETA + lz)] += d.hess[3][3] * zk * zl;
                }
            }
        }
        // constant columns keep coefficient zero
        for kz in 0..N_PARAM {
            if self.frozen[kz] {
                let a = N_THETA + kz;
                grad[a] = 0.0;
                for b in 0..dim {
                    hess[(a, b)] = 0.0;
                    hess[(b, a)] = 0.0;
                }
                hess[(a, a)] = -1.0;
            }
        }
        // solve (-H + ridge) step = grad
        let mut sys = Mat::zeros(dim, dim);
        for a in 0..dim {
            for b in 0..dim {
                sys[(a, b)] = -hess[(a, b)];
            }
            sys[(a, a)] += 1e-9;
        }
        let Some(step) = solve(&sys, &grad) else {
            return 0.0;
        };

        let mut scale = 1.0;
        for _ in 0..40 {
            let mut cand = State {
                theta: state.theta,
                delta: state.delta,
                alpha: state.alpha.clone(),
                eta: state.eta.clone(),
            };
            for a in 0..N_THETA {
                cand.theta[a] += scale * step[a];
            }
            for kz in 0..N_PARAM {
                cand.delta[kz] =
                    (cand.delta[kz] + scale * step[N_THETA + kz]).clamp(-self.clamp, self.clamp);
            }
            let ordered = cand.theta[0] < cand.theta[1] && cand.theta[1] < cand.theta[2];
            if ordered {
                self.refresh_eta(&mut cand);
                let q = self.objective(&cand);
                if q.is_finite() && q >= *q_current - 1e-12 {
                    let mut change = 0.0f64;
                    for a in 0..N_THETA {
                        change = change.max((cand.theta[a] - state.theta[a]).abs());
                    }
                    for kz in 0..N_PARAM {
                        change = change.max((cand.delta[kz] - state.delta[kz]).abs());
                    }
                    *state = cand;
                    *q_current = q;
                    return change;
                }
            }
            scale *= 0.5;
        }
        0.0
    }

    /// Penalized Newton step for smooth `j`, then center it.
    fn update_smooth(&self, j: usize, state: &mut State, q_current: &mut f64) -> f64 {
        let k = self.k;
        let n = self.rows.len();
        let mut grad = vec![0.0; k];
        let mut info = Mat::zeros(k, k); // negative Hessian
        for i in 0..n {
            let d = obs_derivs(&state.theta, state.eta[i], self.rows[i].1);
            let w = (-d.hess[3][3]).max(0.0);
            let g = d.grad[3];
            let bi = &self.b[j][i];
            for a in 0..k {
                grad[a] += g * bi[a];
                if w > 0.0 {
                    for bb in 0..k {
                        info[(a, bb)] += w * bi[a] * bi[bb];
                    }
                }
            }
        }
        // penalty contribution: grad -= lambda D'D alpha; info += lambda D'D
        for a in 0..k {
            for bb in 0..k {
                let p = self.lambda * self.dtd[a * k + bb];
                grad[a] -= p * state.alpha[j][bb];
                info[(a, bb)] += p;
            }
            info[(a, a)] += 1e-9;
        }
        let Some(step) = solve(&info, &grad) else {
            return 0.0;
        };

        let mut scale = 1.0;
        for _ in 0..40 {
            let mut cand = State {
                theta: state.theta,
                delta: state.delta,
                alpha: state.alpha.clone(),
                eta: state.eta.clone(),
            };
            for a in 0..k {
                cand.alpha[j][a] =
                    (cand.alpha[j][a] + scale * step[a]).clamp(-self.clamp, self.clamp);
            }
            // center: mean of the fitted smooth moves into the thresholds
            let mean: f64 = (0..n)
                .map(|i| {
                    self.b[j][i]
                        .iter()
                        .zip(&cand.alpha[j])
                        .map(|(b, a)| b * a)
                        .sum::<f64>()
                })
                .sum::<f64>()
                / n as f64;
            for a in cand.alpha[j].iter_mut() {
                *a -= mean;
            }
            for t in cand.theta.iter_mut() {
                *t -= mean;
            }
            self.refresh_eta(&mut cand);
            let q = self.objective(&cand);
            if q.is_finite() && q >= *q_current - 1e-12 {
                let mut change = mean.abs();
                for a in 0..k {
                    change = change.max((cand.alpha[j][a] - state.alpha[j][a]).abs());
                }
                *state = cand;
                *q_current = q;
                return change;
            }
            scale *= 0.5;
        }
        0.0
    }
}

/// Empirical-cumulative-frequency thresholds: the exact intercept-only
/// maximum likelihood solution.
fn empirical_thresholds(rows: &[(FeatureVector, u8)]) -> [f64; N_THETA] {
    let n = rows.len() as f64;
    let mut counts = [0usize; 4];
    for (_, y) in rows {
        counts[*y as usize] += 1;
    }
    let mut theta = [0.0; N_THETA];
    let mut cum = 0.0;
    for c in 0..N_THETA {
        cum += counts[c] as f64;
        let p = (cum / n).clamp(1e-9, 1.0 - 1e-9);
        theta[c] = (p / (1.0 - p)).ln();
    }
    // enforce strict ordering for empty categories
    for c in 1..N_THETA {
        if theta[c] <= theta[c - 1] {
            theta[c] = theta[c - 1] + 1e-6;
        }
    }
    theta
}

fn validate_rows(rows: &[(FeatureVector, u8)]) -> Result<(), StatsError> {
    if rows.len() < 30 {
        return Err(StatsError::TooFewRows {
            n: rows.len(),
            need: 30,
        });
    }
    let mut seen = [false; 4];
    for (f, y) in rows {
        if !f.is_finite() || *y > 3 {
            return Err(StatsError::BadInput("non-finite features or label out of range".into()));
        }
        seen[*y as usize] = true;
    }
    if seen.iter().any(|&s| !s) {
        return Err(StatsError::MissingLevels);
    }
    Ok(())
}

/// Fit the model by cyclic backfitting on the penalized likelihood.
pub fn fit_plam(rows: &[(FeatureVector, u8)], cfg: &PlamConfig) -> Result<PlamModel, StatsError> {
    validate_rows(rows)?;
    let lambda = if cfg.select_lambda {
        select_lambda(rows, cfg)?
    } else {
        cfg.lambda
    };
    fit_plam_fixed_lambda(rows, cfg, lambda)
}

fn fit_plam_fixed_lambda(
    rows: &[(FeatureVector, u8)],
    cfg: &PlamConfig,
    lambda: f64,
) -> Result<PlamModel, StatsError> {
    let n = rows.len();
    let k = cfg.n_basis;

    // column ranges and basis rows
    let mut bases = Vec::with_capacity(N_SMOOTH);
    let mut b_rows = Vec::with_capacity(N_SMOOTH);
    for j in 0..N_SMOOTH {
        let xs: Vec<f64> = rows.iter().map(|(f, _)| smooth_inputs(f)[j]).collect();
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let basis = Basis::new(lo, hi, k);
        b_rows.push(xs.iter().map(|&x| basis.eval(x)).collect::<Vec<_>>());
        bases.push(basis);
    }

    // parametric columns are standardized internally (the fatigue scale
    // is orders of magnitude below the indicators, which wrecks Newton
    // conditioning); coefficients are mapped back afterwards
    let raw_z: Vec<[f64; N_PARAM]> = rows.iter().map(|(f, _)| parametric_inputs(f)).collect();
    let mut frozen = [false; N_PARAM];
    let mut mu = [0.0; N_PARAM];
    let mut sd = [1.0; N_PARAM];
    for kz in 0..N_PARAM {
        let first = raw_z[0][kz];
        frozen[kz] = raw_z.iter().all(|zi| (zi[kz] - first).abs() < 1e-12);
        if !frozen[kz] {
            mu[kz] = raw_z.iter().map(|zi| zi[kz]).sum::<f64>() / n as f64;
            let var =
                raw_z.iter().map(|zi| (zi[kz] - mu[kz]).powi(2)).sum::<f64>() / n as f64;
            sd[kz] = var.sqrt().max(1e-12);
        }
    }
    let z: Vec<[f64; N_PARAM]> = raw_z
        .iter()
        .map(|zi| {
            let mut out = [0.0; N_PARAM];
            for kz in 0..N_PARAM {
                if !frozen[kz] {
                    out[kz] = (zi[kz] - mu[kz]) / sd[kz];
                }
            }
            out
        })
        .collect();

    let ws = Workspace {
        rows,
        z,
        b: b_rows,
        dtd: second_difference_gram(k),
        lambda,
        frozen,
        k,
        clamp: cfg.coef_clamp,
    };

    let mut state = State {
        theta: empirical_thresholds(rows),
        delta: [0.0; N_PARAM],
        alpha: vec![vec![0.0; k]; N_SMOOTH],
        eta: vec![0.0; n],
    };
    ws.refresh_eta(&mut state);
    let mut q = ws.objective(&state);

    let mut history = Vec::with_capacity(cfg.max_cycles);
    let mut last_change = f64::INFINITY;
    let mut cycles = 0;
    for _cycle in 0..cfg.max_cycles {
        cycles += 1;
        let mut change = ws.update_parametric(&mut state, &mut q);
        for j in 0..N_SMOOTH {
            change = change.max(ws.update_smooth(j, &mut state, &mut q));
        }
        history.push(q);
        last_change = change;
        if change < cfg.tol {
            break;
        }
    }
    // standardized coefficients this large mean (quasi-)separated data;
    // the hard box at `coef_clamp` additionally caps true runaways
    let big = |v: f64| v.abs() >= 50.0;
    let separation = state.delta.iter().cloned().any(big)
        || state.alpha.iter().flatten().cloned().any(big);
    // a flat-lined objective with drifting coefficients is a likelihood
    // ridge (saturated fit), not a failure; only runs still gaining
    // meaningful likelihood per observation count as non-convergent
    let flat_gain = 1e-6 * n as f64;
    let improving = history
        .windows(2)
        .next_back()
        .map(|w| w[1] - w[0] > flat_gain)
        .unwrap_or(false);
    if last_change >= cfg.tol && last_change > 1e-3 && improving && !separation {
        return Err(StatsError::NonConvergence {
            history: history.clone(),
        });
    }

    // undo the standardization: delta/sd on the original scale, the
    // centering constant absorbed into the thresholds
    let mut delta = [0.0; N_PARAM];
    let mut shift = 0.0;
    for kz in 0..N_PARAM {
        if !frozen[kz] {
            delta[kz] = state.delta[kz] / sd[kz];
            shift += state.delta[kz] * mu[kz] / sd[kz];
        }
    }
    let mut thresholds = state.theta;
    for t in thresholds.iter_mut() {
        *t += shift;
    }

    Ok(PlamModel {
        thresholds,
        smooths: bases
            .into_iter()
            .zip(state.alpha)
            .map(|(basis, coefs)| Smooth { basis, coefs })
            .collect(),
        beta_fatigue: delta[0],
        gamma: [delta[1], delta[2], delta[3]],
        lambda,
        objective_history: history,
        cycles_run: cycles,
        separation_detected: separation,
    })
}

/// Deviance of the fitted model on `rows`.
pub fn deviance(m: &PlamModel, rows: &[(FeatureVector, u8)]) -> f64 {
    -2.0 * rows
        .iter()
        .map(|(f, y)| m.class_probs(f)[*y as usize].max(1e-300).ln())
        .sum::<f64>()
}

/// Deviance of the intercept-only ordinal model (class frequencies).
pub fn null_deviance(rows: &[(FeatureVector, u8)]) -> f64 {
    let n = rows.len() as f64;
    let mut counts = [0usize; 4];
    for (_, y) in rows {
        counts[*y as usize] += 1;
    }
    -2.0 * counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| c as f64 * (c as f64 / n).ln())
        .sum::<f64>()
}

/// Fraction of the null deviance explained by the model.
pub fn deviance_explained(m: &PlamModel, rows: &[(FeatureVector, u8)]) -> f64 {
    1.0 - deviance(m, rows) / null_deviance(rows)
}

/// 5-fold deviance-based lambda selection over a fixed grid.
fn select_lambda(rows: &[(FeatureVector, u8)], cfg: &PlamConfig) -> Result<f64, StatsError> {
    const GRID: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];
    let folds = crate::boost::stratified_kfold(rows, 5, 17)
        .map_err(|e| StatsError::BadInput(format!("lambda selection folds: {e}")))?;
    let mut best = (f64::INFINITY, cfg.lambda);
    for &lam in &GRID {
        let mut total = 0.0;
        let mut ok = true;
        for held in &folds {
            let held_set: std::collections::HashSet<usize> = held.iter().cloned().collect();
            let train: Vec<(FeatureVector, u8)> = rows
                .iter()
                .enumerate()
                .filter(|(i, _)| !held_set.contains(i))
                .map(|(_, r)| *r)
                .collect();
            let test: Vec<(FeatureVector, u8)> = held.iter().map(|&i| rows[i]).collect();
            match fit_plam_fixed_lambda(&train, cfg, lam) {
                Ok(m) => total += deviance(&m, &test),
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if ok && total < best.0 {
            best = (total, lam);
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded_rng, uniform};
    use rand::Rng;

    fn fv(mean_amp: f64, fatigue: f64, arrest: u8) -> FeatureVector {
        FeatureVector {
            mean_amp,
            rsd_amp: 0.1,
            mean_int: 0.3,
            rsd_int: 0.05,
            fatigue,
            arrest,
        }
    }

    // draw an ordinal response from the model's own probability law
    fn draw_y<R: Rng>(rng: &mut R, theta: &[f64; 3], eta: f64) -> u8 {
        let u: f64 = rng.random();
        for c in 0..3 {
            if u <= logistic(theta[c] - eta) {
                return c as u8;
            }
        }
        3
    }

    fn simulate_parametric(n: usize, beta1: f64, gamma: [f64; 3], seed: u64) -> Vec<(FeatureVector, u8)> {
        let mut rng = seeded_rng(seed);
        let theta = [-1.5, 0.3, 2.0];
        (0..n)
            .map(|_| {
                let fatigue = uniform(&mut rng, -1.0, 1.0);
                let arrest = (rng.random::<u32>() % 4) as u8;
                let eta = beta1 * fatigue
                    + if arrest >= 1 { gamma[arrest as usize - 1] } else { 0.0 };
                let f = fv(uniform(&mut rng, 0.5, 1.5), fatigue, arrest);
                (f, draw_y(&mut rng, &theta, eta))
            })
            .collect()
    }

    #[test]
    fn intercept_only_data_recovers_class_frequencies() {
        let mut rng = seeded_rng(3);
        // all predictors constant
        let rows: Vec<(FeatureVector, u8)> = (0..200)
            .map(|_| {
                let y = match rng.random::<u32>() % 10 {
                    0..=1 => 0u8,
                    2..=4 => 1,
                    5..=7 => 2,
                    _ => 3,
                };
                (fv(1.0, 0.0, 0), y)
            })
            .collect();
        let m = fit_plam(&rows, &PlamConfig::default()).unwrap();
        let mut counts = [0usize; 4];
        for (_, y) in &rows {
            counts[*y as usize] += 1;
        }
        let n = rows.len() as f64;
        let probs = m.class_probs(&rows[0].0);
        for c in 0..4 {
            let want = counts[c] as f64 / n;
            assert!(
                (probs[c] - want).abs() < 1e-6,
                "class {c}: {} vs {want}",
                probs[c]
            );
        }
    }

    #[test]
    fn row_order_does_not_change_the_fit() {
        let rows = simulate_parametric(120, 1.0, [0.0, 0.4, 0.8], 5);
        let mut shuffled = rows.clone();
        shuffled.reverse();
        shuffled.swap(10, 90);
        let cfg = PlamConfig::default();
        let a = fit_plam(&rows, &cfg).unwrap();
        let b = fit_plam(&shuffled, &cfg).unwrap();
        assert!((a.beta_fatigue - b.beta_fatigue).abs() < 1e-9);
        for c in 0..3 {
            assert!((a.gamma[c] - b.gamma[c]).abs() < 1e-9);
            assert!((a.thresholds[c] - b.thresholds[c]).abs() < 1e-9);
        }
    }

    #[test]
    fn recovers_parametric_truth_roughly() {
        let rows = simulate_parametric(500, 2.0, [0.5, 1.0, 1.5], 11);
        let m = fit_plam(&rows, &PlamConfig::default()).unwrap();
        assert!(
            (m.beta_fatigue - 2.0).abs() < 0.5,
            "beta1 {} not near 2.0",
            m.beta_fatigue
        );
        assert!(m.gamma[2] > m.gamma[0], "gamma ordering lost: {:?}", m.gamma);
        assert!(!m.separation_detected);
    }

    #[test]
    fn objective_is_monotone_nondecreasing() {
        let rows = simulate_parametric(150, 1.5, [0.2, 0.6, 1.2], 21);
        let m = fit_plam(&rows, &PlamConfig::default()).unwrap();
        for w in m.objective_history.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-10,
                "objective decreased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn thresholds_stay_ordered_and_cumulative_probs_monotone() {
        let rows = simulate_parametric(200, 1.0, [0.3, 0.6, 0.9], 31);
        let m = fit_plam(&rows, &PlamConfig::default()).unwrap();
        assert!(m.thresholds[0] < m.thresholds[1] && m.thresholds[1] < m.thresholds[2]);
        for (f, _) in rows.iter().take(50) {
            let cum = m.cumulative_probs(f);
            assert!(cum[0] <= cum[1] + 1e-12 && cum[1] <= cum[2] + 1e-12);
        }
    }

    #[test]
    fn fitted_smooths_have_zero_sample_mean() {
        let rows = simulate_parametric(200, 1.0, [0.3, 0.6, 0.9], 41);
        let m = fit_plam(&rows, &PlamConfig::default()).unwrap();
        for j in 0..N_SMOOTH {
            let mean: f64 = rows
                .iter()
                .map(|(f, _)| m.smooths[j].eval(smooth_inputs(f)[j]))
                .sum::<f64>()
                / rows.len() as f64;
            assert!(mean.abs() < 1e-8, "smooth {j} mean {mean}");
        }
    }

    #[test]
    fn separable_data_is_clamped_and_flagged() {
        let mut rng = seeded_rng(51);
        let rows: Vec<(FeatureVector, u8)> = (0..200)
            .map(|_| {
                let fatigue = uniform(&mut rng, -1.0, 1.0);
                let y = match fatigue {
                    x if x < -0.5 => 0u8,
                    x if x < 0.0 => 1,
                    x if x < 0.5 => 2,
                    _ => 3,
                };
                (fv(uniform(&mut rng, 0.8, 1.2), fatigue, 0), y)
            })
            .collect();
        let m = fit_plam(&rows, &PlamConfig::default()).unwrap();
        assert!(m.separation_detected);
        // the clamp bounds the standardized coefficient
        assert!(m.beta_fatigue.is_finite() && m.beta_fatigue > 0.0);
        let de = deviance_explained(&m, &rows);
        assert!(de > 0.95, "deviance explained {de}");
    }

    #[test]
    fn null_model_explains_nothing() {
        let rows = simulate_parametric(100, 0.0, [0.0, 0.0, 0.0], 61);
        let d_null = null_deviance(&rows);
        // a saturated-thresholds-only fit has the same deviance
        let constant_rows: Vec<(FeatureVector, u8)> =
            rows.iter().map(|(_, y)| (fv(1.0, 0.0, 0), *y)).collect();
        let m = fit_plam(&constant_rows, &PlamConfig::default()).unwrap();
        let de = deviance_explained(&m, &constant_rows);
        assert!(de.abs() < 1e-6, "deviance explained should be ~0, got {de}");
        assert!((deviance(&m, &constant_rows) - d_null).abs() < 1e-4);
    }

    #[test]
    fn lambda_grid_selection_runs() {
        let rows = simulate_parametric(200, 1.5, [0.3, 0.6, 0.9], 81);
        let cfg = PlamConfig {
            select_lambda: true,
            ..PlamConfig::default()
        };
        let m = fit_plam(&rows, &cfg).unwrap();
        assert!(
            [0.01, 0.1, 1.0, 10.0, 100.0].contains(&m.lambda),
            "lambda {} not on the grid",
            m.lambda
        );
        assert!((m.beta_fatigue - 1.5).abs() < 0.6);
    }

    #[test]
    fn preconditions_are_enforced() {
        let rows = simulate_parametric(20, 1.0, [0.2, 0.4, 0.6], 71);
        assert!(matches!(
            fit_plam(&rows, &PlamConfig::default()),
            Err(StatsError::TooFewRows { .. })
        ));
        let mut rows = simulate_parametric(100, 1.0, [0.2, 0.4, 0.6], 72);
        for (_, y) in rows.iter_mut() {
            if *y == 3 {
                *y = 2;
            }
        }
        assert!(matches!(
            fit_plam(&rows, &PlamConfig::default()),
            Err(StatsError::MissingLevels)
        ));
    }
}
