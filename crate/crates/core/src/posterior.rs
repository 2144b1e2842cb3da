//! Gaussian belief over the free expansion coefficients.
//!
//! The density is kept in quadratic form, `w(c) ∝ exp(-cᵀAc + bᵀc)`, so the
//! covariance is `(2A)⁻¹` and the mean is `(2A)⁻¹ b`. `A` and `b` are the
//! source of truth; the covariance and mean are cached and kept in step with
//! Sherman-Morrison updates, then periodically recomputed from scratch.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frequency `count / copies` of the positive outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frequency {
    pub count: u64,
    pub copies: u64,
}

impl Frequency {
    pub fn new(count: u64, copies: u64) -> Result<Self> {
        if copies == 0 || count > copies {
            return Err(Error::Config(format!(
                "frequency {count}/{copies} is not a valid outcome count"
            )));
        }
        Ok(Frequency { count, copies })
    }

    /// Accepts a float only if it is (to 1e-9) an integer multiple of `1/copies`.
    pub fn from_value(value: f64, copies: u64) -> Result<Self> {
        let scaled = value * copies as f64;
        let count = scaled.round();
        if !(0.0..=copies as f64).contains(&count) || (scaled - count).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "frequency {value} is not a multiple of 1/{copies}"
            )));
        }
        Self::new(count as u64, copies)
    }

    pub fn value(&self) -> f64 {
        self.count as f64 / self.copies as f64
    }
}

/// How the per-measurement variance of the Gaussian likelihood is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    /// Variance of the Beta(NF+1, N(1-F)+1) posterior.
    #[default]
    Beta,
    /// `NF (N(1-F)+1) / ((N+2)²(N+3))`, floored at [`STRICT_SIGMA_FLOOR`].
    StrictPaper,
}

pub const STRICT_SIGMA_FLOOR: f64 = 1e-12;
pub const SIGMA_GUARD: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaMoments {
    pub mu: f64,
    pub sigma2: f64,
}

pub fn beta_moments(freq: Frequency, mode: SigmaMode) -> BetaMoments {
    let n = freq.copies as f64;
    let succ = freq.count as f64;
    let fail = n - succ;
    let denom = (n + 2.0) * (n + 2.0) * (n + 3.0);
    let mu = (succ + 1.0) / (n + 2.0);
    let sigma2 = match mode {
        SigmaMode::Beta => (succ + 1.0) * (fail + 1.0) / denom,
        SigmaMode::StrictPaper => (succ * (fail + 1.0) / denom).max(STRICT_SIGMA_FLOOR),
    };
    BetaMoments { mu, sigma2 }
}

/// `σ²(n)` for every outcome count `n = 0..=copies`.
pub fn sigma2_table(copies: u64, mode: SigmaMode) -> Vec<f64> {
    (0..=copies)
        .map(|n| beta_moments(Frequency { count: n, copies }, mode).sigma2)
        .collect()
}

/// Difference vector `g_m = f_m - f_M` and the reference entry `f_M`.
pub fn pattern_direction(row: &[f64]) -> (DVector<f64>, f64) {
    let last = *row.last().expect("empty pattern row");
    let g = DVector::from_iterator(row.len() - 1, row[..row.len() - 1].iter().map(|f| f - last));
    (g, last)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub total_variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPosterior {
    a: DMatrix<f64>,
    b: DVector<f64>,
    covariance: DMatrix<f64>,
    mean: DVector<f64>,
    pending_updates: usize,
}

/// Incremental updates applied before the cached moments are rebuilt.
const REFRESH_INTERVAL: usize = 64;

impl GaussianPosterior {
    /// Builds the posterior from `A`, `b`; fails unless `A` is positive definite.
    pub fn from_quadratic(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if !a.is_square() || a.nrows() != b.len() {
            return Err(Error::Dimension {
                what: "quadratic form",
                expected: a.nrows(),
                found: b.len(),
            });
        }
        let a = (&a + a.transpose()) * 0.5;
        let (covariance, mean) = solve_moments(&a, &b)?;
        Ok(GaussianPosterior {
            a,
            b,
            covariance,
            mean,
            pending_updates: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn quadratic(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn total_variance(&self) -> f64 {
        self.covariance.trace()
    }

    pub fn moments(&self) -> Moments {
        Moments {
            mean: self.mean.clone(),
            covariance: self.covariance.clone(),
            total_variance: self.total_variance(),
        }
    }

    /// `A ← A + weight·u uᵀ`, `b ← b + delta_b`.
    ///
    /// The cached covariance follows by Sherman-Morrison; `weight` must keep
    /// `A` positive definite.
    pub fn add_rank_one(&mut self, u: &DVector<f64>, weight: f64, delta_b: &DVector<f64>) -> Result<()> {
        if u.len() != self.dim() || delta_b.len() != self.dim() {
            return Err(Error::Dimension {
                what: "rank-one update",
                expected: self.dim(),
                found: u.len(),
            });
        }
        let h = &self.covariance * u;
        let quad = u.dot(&h);
        let denom = 1.0 + 2.0 * weight * quad;
        if !(denom > 0.0) || !weight.is_finite() {
            return Err(Error::NotPositiveDefinite("rank-one update"));
        }
        self.a.ger(weight, u, u, 1.0);
        self.b += delta_b;
        self.covariance.ger(-2.0 * weight / denom, &h, &h, 1.0);
        self.pending_updates += 1;
        if self.pending_updates >= REFRESH_INTERVAL {
            self.refresh()?;
        } else {
            self.mean = &self.covariance * &self.b;
        }
        Ok(())
    }

    /// Recomputes covariance and mean from `A`, `b`.
    pub fn refresh(&mut self) -> Result<()> {
        let (covariance, mean) = solve_moments(&self.a, &self.b)?;
        self.covariance = covariance;
        self.mean = mean;
        self.pending_updates = 0;
        Ok(())
    }
}

fn solve_moments(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let chol = (a * 2.0)
        .cholesky()
        .ok_or(Error::NotPositiveDefinite("posterior precision"))?;
    let diag = chol.l_dirty().diagonal();
    let top = diag.iter().copied().fold(0.0, f64::max);
    if diag.iter().any(|&d| !(d * d > top * top * 1e-15)) {
        return Err(Error::NotPositiveDefinite("posterior precision"));
    }
    let mut covariance = chol.inverse();
    covariance = (&covariance + covariance.transpose()) * 0.5;
    let mean = chol.solve(b);
    Ok((covariance, mean))
}

/// ε-regularized stand-in for the uniform prior, centered at the uniform mixture.
pub fn init_prior(probes: usize, epsilon_reg: f64) -> Result<GaussianPosterior> {
    if probes < 2 {
        return Err(Error::Config(format!("need at least two probes, got {probes}")));
    }
    if !(epsilon_reg > 0.0 && epsilon_reg.is_finite()) {
        return Err(Error::Config(format!(
            "prior regularization must be positive, got {epsilon_reg}"
        )));
    }
    let dim = probes - 1;
    let a = DMatrix::identity(dim, dim) * epsilon_reg;
    let b = DVector::from_element(dim, 2.0 * epsilon_reg / probes as f64);
    GaussianPosterior::from_quadratic(a, b)
}

/// Folds in one signal frequency measured at a setting with pattern row `row`.
pub fn bayes_update(
    post: &GaussianPosterior,
    row: &[f64],
    freq: Frequency,
    mode: SigmaMode,
) -> Result<GaussianPosterior> {
    if row.len() != post.dim() + 1 {
        return Err(Error::Dimension {
            what: "pattern row",
            expected: post.dim() + 1,
            found: row.len(),
        });
    }
    let BetaMoments { mu, sigma2 } = beta_moments(freq, mode);
    if sigma2 < SIGMA_GUARD {
        return Err(Error::Numerical(format!("outcome variance {sigma2:e} below floor")));
    }
    let (g, last) = pattern_direction(row);
    let mut next = post.clone();
    if g.iter().all(|x| *x == 0.0) {
        return Ok(next);
    }
    let delta_b = &g * ((mu - last) / sigma2);
    next.add_rank_one(&g, 1.0 / (2.0 * sigma2), &delta_b)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn prior_examples() {
        let p = init_prior(2, 1e-6).unwrap();
        assert_relative_eq!(p.mean()[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(p.covariance()[(0, 0)], 5e5, max_relative = 1e-12);
        let p = init_prior(121, 1e-6).unwrap();
        assert!(p.mean().iter().all(|&m| (m - 1.0 / 121.0).abs() < 1e-12));
        assert!(p.quadratic().diagonal().iter().all(|&a| a == 1e-6));
        let p = init_prior(2, 0.5).unwrap();
        assert_relative_eq!(p.total_variance(), 1.0, epsilon = 1e-14);
        assert!(init_prior(3, 0.0).is_err());
        assert!(init_prior(1, 1.0).is_err());
    }

    #[test]
    fn beta_moment_examples() {
        let half = beta_moments(Frequency::new(500, 1000).unwrap(), SigmaMode::Beta);
        assert_relative_eq!(half.mu, 0.5, epsilon = 1e-15);
        let full = Frequency::new(1000, 1000).unwrap();
        let d = 1002.0 * 1002.0 * 1003.0;
        assert_relative_eq!(beta_moments(full, SigmaMode::StrictPaper).sigma2, 1000.0 / d, max_relative = 1e-14);
        assert_relative_eq!(beta_moments(full, SigmaMode::Beta).sigma2, 1001.0 / d, max_relative = 1e-14);
        let zero = Frequency::new(0, 1000).unwrap();
        assert_relative_eq!(beta_moments(zero, SigmaMode::Beta).sigma2, 1001.0 / d, max_relative = 1e-14);
        assert_eq!(beta_moments(zero, SigmaMode::StrictPaper).sigma2, STRICT_SIGMA_FLOOR);
    }

    #[test]
    fn beta_moment_shape() {
        let table = sigma2_table(1000, SigmaMode::Beta);
        let peak = table
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(peak, 500);
        let mus: Vec<f64> = (0..=1000)
            .map(|n| beta_moments(Frequency::new(n, 1000).unwrap(), SigmaMode::Beta).mu)
            .collect();
        assert!(mus.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn frequency_rejects_non_multiples() {
        assert!(Frequency::from_value(0.1234567, 1000).is_err());
        assert_eq!(Frequency::from_value(0.25, 1000).unwrap().count, 250);
        assert!(Frequency::new(11, 10).is_err());
    }

    #[test]
    fn flat_pattern_leaves_posterior_unchanged() {
        let p = init_prior(4, 1e-3).unwrap();
        let q = bayes_update(&p, &[0.3, 0.3, 0.3, 0.3], Frequency::new(300, 1000).unwrap(), SigmaMode::Beta).unwrap();
        assert_eq!(p.quadratic(), q.quadratic());
        assert_eq!(p.linear(), q.linear());
    }

    #[test]
    fn update_matches_dense_recomputation() {
        let p = init_prior(5, 1e-2).unwrap();
        let row = [0.9, 0.4, 0.2, 0.05, 0.6];
        let f = Frequency::new(412, 1000).unwrap();
        let q = bayes_update(&p, &row, f, SigmaMode::Beta).unwrap();
        let dense = GaussianPosterior::from_quadratic(q.quadratic().clone(), q.linear().clone()).unwrap();
        assert!((q.covariance() - dense.covariance()).norm() < 1e-10 * dense.covariance().norm());
        assert!((q.mean() - dense.mean()).norm() < 1e-10 * dense.mean().norm().max(1.0));
        assert!(q.total_variance() < p.total_variance());
    }

    #[test]
    fn update_rejects_wrong_row_length() {
        let p = init_prior(3, 1.0).unwrap();
        assert!(bayes_update(&p, &[0.1, 0.2], Frequency::new(1, 2).unwrap(), SigmaMode::Beta).is_err());
    }

    #[test]
    fn singular_quadratic_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(GaussianPosterior::from_quadratic(a, DVector::zeros(2)).is_err());
    }
}
