//! Greedy choice of the next measurement setting.
//!
//! Each candidate is scored by the posterior variance expected after
//! measuring it, averaged over the predictive distribution of outcome counts.
//! Under the Gaussian belief the estimated probability `P = g·c + f_M` is
//! itself Gaussian, so the predictive distribution reduces to a
//! one-dimensional Gaussian mixture of binomials and the post-update trace
//! has a closed form for every outcome.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bank::PatternBank;
use crate::error::{Error, Result};
use crate::posterior::{pattern_direction, sigma2_table, GaussianPosterior, SigmaMode};
use crate::special::{ln_factorials, GaussHermite};

const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub setting_index: usize,
    pub predicted_variance: f64,
    /// `Σ_n p(n)` before renormalization.
    pub outcome_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoppingConfig {
    pub eta: f64,
    pub consecutive_required: usize,
}

impl Default for StoppingConfig {
    fn default() -> Self {
        StoppingConfig {
            eta: 0.01,
            consecutive_required: 3,
        }
    }
}

impl StoppingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0) || self.consecutive_required == 0 {
            return Err(Error::Config(format!(
                "stopping rule needs 0 < eta < 1 and at least one step (got {}, {})",
                self.eta, self.consecutive_required
            )));
        }
        Ok(())
    }
}

/// Per-`N` tables shared by all candidates in a scoring pass.
#[derive(Debug, Clone)]
pub struct OutcomeTables {
    copies: u64,
    ln_choose: Vec<f64>,
    sigma2: Vec<f64>,
}

impl OutcomeTables {
    pub fn new(copies: u64, mode: SigmaMode) -> Self {
        let n = copies as usize;
        let lf = ln_factorials(n);
        OutcomeTables {
            copies,
            ln_choose: (0..=n).map(|k| lf[n] - lf[k] - lf[n - k]).collect(),
            sigma2: sigma2_table(copies, mode),
        }
    }

    pub fn copies(&self) -> u64 {
        self.copies
    }

    fn binomial_accumulate(&self, prob: f64, weight: f64, out: &mut [f64]) {
        let p = prob.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let (lp, lq) = (p.ln(), (-p).ln_1p());
        let n = self.copies as usize;
        for (k, slot) in out.iter_mut().enumerate() {
            let ln = self.ln_choose[k] + k as f64 * lp + (n - k) as f64 * lq;
            if ln > -745.0 {
                *slot += weight * ln.exp();
            }
        }
    }
}

/// Gaussian law of `P = g·c + f_M` under the posterior.
fn probability_law(post: &GaussianPosterior, row: &[f64]) -> Result<(nalgebra::DVector<f64>, f64, f64, nalgebra::DVector<f64>)> {
    if row.len() != post.dim() + 1 {
        return Err(Error::Dimension {
            what: "pattern row",
            expected: post.dim() + 1,
            found: row.len(),
        });
    }
    let (g, last) = pattern_direction(row);
    let cov_g = post.covariance() * &g;
    let mean_p = g.dot(post.mean()) + last;
    let var_p = g.dot(&cov_g).max(0.0);
    Ok((g, mean_p, var_p, cov_g))
}

fn mixture(tables: &OutcomeTables, mean_p: f64, var_p: f64) -> (Vec<f64>, f64) {
    let mut dist = vec![0.0; tables.copies as usize + 1];
    if var_p == 0.0 {
        tables.binomial_accumulate(mean_p, 1.0, &mut dist);
    } else {
        let rule = GaussHermite::order32();
        let spread = (2.0 * var_p).sqrt();
        let norm = std::f64::consts::PI.sqrt();
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            tables.binomial_accumulate(mean_p + spread * x, w / norm, &mut dist);
        }
    }
    let mass: f64 = dist.iter().sum();
    for d in dist.iter_mut() {
        *d /= mass;
    }
    (dist, mass)
}

/// Predictive probability of `n = 0..=N` positive outcomes at a setting.
pub fn predictive_outcome_dist(post: &GaussianPosterior, row: &[f64], tables: &OutcomeTables) -> Result<Vec<f64>> {
    let (_, mean_p, var_p, _) = probability_law(post, row)?;
    Ok(mixture(tables, mean_p, var_p).0)
}

fn score(post: &GaussianPosterior, row: &[f64], tables: &OutcomeTables) -> Result<(f64, f64)> {
    let (g, mean_p, var_p, cov_g) = probability_law(post, row)?;
    let current = post.total_variance();
    if g.iter().all(|x| *x == 0.0) {
        return Ok((current, 1.0));
    }
    let (dist, mass) = mixture(tables, mean_p, var_p);
    let gain = cov_g.norm_squared();
    let expected_inverse: f64 = dist
        .iter()
        .zip(&tables.sigma2)
        .map(|(p, s2)| p / (s2 + var_p))
        .sum();
    Ok((current - gain * expected_inverse, mass))
}

/// Expected total posterior variance after measuring the setting with pattern `row`.
pub fn predicted_variance(post: &GaussianPosterior, row: &[f64], tables: &OutcomeTables) -> Result<f64> {
    score(post, row, tables).map(|s| s.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub setting_index: usize,
    pub delta: f64,
    pub scores: Vec<CandidateScore>,
}

/// Scores every setting not in `used` and returns the minimizer.
///
/// Ties go to the lowest index.
pub fn select_next(
    post: &GaussianPosterior,
    bank: &PatternBank,
    used: &BTreeSet<usize>,
    tables: &OutcomeTables,
) -> Result<Selection> {
    let candidates: Vec<usize> = (0..bank.settings()).filter(|k| !used.contains(k)).collect();
    if candidates.is_empty() {
        return Err(Error::SettingsExhausted(bank.settings()));
    }
    let scores: Vec<CandidateScore> = candidates
        .par_iter()
        .map(|&k| {
            let row = bank.row(k);
            score(post, &row, tables).map(|(predicted_variance, outcome_mass)| CandidateScore {
                setting_index: k,
                predicted_variance,
                outcome_mass,
            })
        })
        .collect::<Result<_>>()?;
    let mut best = scores[0];
    for s in &scores[1..] {
        if s.predicted_variance < best.predicted_variance {
            best = *s;
        }
    }
    Ok(Selection {
        setting_index: best.setting_index,
        delta: best.predicted_variance,
        scores,
    })
}

/// True once `|Δ - Var| < eta·Var` has held for the last `consecutive_required` proposals.
///
/// `history` holds `(Δ_{k+1}, Var_k)` pairs in step order.
pub fn stopping_check(history: &[(f64, f64)], config: &StoppingConfig) -> bool {
    let r = config.consecutive_required;
    history.len() >= r
        && history[history.len() - r..]
            .iter()
            .all(|&(delta, var)| (delta - var).abs() < config.eta * var)
}
