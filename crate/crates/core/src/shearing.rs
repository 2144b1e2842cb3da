//! Distribution shearing against linear positivity constraints.
//!
//! Along one constraint direction the standardized marginal `exp(-x²)` is
//! replaced by `exp(-(1+a)x² + bx)` so that the mass outside the constraint
//! drops to a target while the mean of the physical part (`x ≥ x0`) is kept.
//! The refit is folded back into the quadratic form as a rank-one update.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posterior::GaussianPosterior;
use crate::special::{lower_tail, lower_tail_inv, upper_truncated_mean};

/// Constraints `v_i · c ≥ u_i`. Rows with `v_i = 0` are dropped on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraintSet {
    vectors: DMatrix<f64>,
    offsets: Vec<f64>,
    labels: Vec<String>,
}

impl LinearConstraintSet {
    pub fn from_rows(dim: usize, rows: Vec<Vec<f64>>, offsets: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if rows.len() != offsets.len() || rows.len() != labels.len() {
            return Err(Error::Dimension {
                what: "constraint offsets",
                expected: rows.len(),
                found: offsets.len(),
            });
        }
        let mut kept = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Dimension {
                    what: "constraint vector",
                    expected: dim,
                    found: row.len(),
                });
            }
            if row.iter().any(|x| *x != 0.0) {
                kept.push(i);
            }
        }
        let vectors = DMatrix::from_fn(kept.len(), dim, |r, c| rows[kept[r]][c]);
        Ok(LinearConstraintSet {
            vectors,
            offsets: kept.iter().map(|&i| offsets[i]).collect(),
            labels: kept.iter().map(|&i| labels[i].clone()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn vector(&self, i: usize) -> DVector<f64> {
        self.vectors.row(i).transpose()
    }

    pub fn offset(&self, i: usize) -> f64 {
        self.offsets[i]
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// True if `c` satisfies every constraint to within `tol`.
    pub fn contains(&self, c: &DVector<f64>, tol: f64) -> bool {
        let lhs = &self.vectors * c;
        lhs.iter().zip(&self.offsets).all(|(l, u)| *l >= u - tol)
    }
}

/// Which constraint the shearing loop works on next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationRule {
    /// Largest signed `x0` among the constraints above threshold.
    #[default]
    Signed,
    /// Largest `|x0|` among the constraints above threshold.
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShearingConfig {
    pub p_threshold: f64,
    pub p_step: f64,
    pub epsilon_total: f64,
    pub max_iterations: usize,
    pub deviation: DeviationRule,
}

impl Default for ShearingConfig {
    fn default() -> Self {
        ShearingConfig {
            p_threshold: 0.01,
            p_step: 0.0025,
            epsilon_total: 0.01,
            // the default 121-probe prior needs about 4e4 steps
            max_iterations: 100_000,
            deviation: DeviationRule::Signed,
        }
    }
}

impl ShearingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.p_step && self.p_step < self.p_threshold && self.p_threshold < 1.0) {
            return Err(Error::Config(format!(
                "shearing needs 0 < p_step < p_threshold < 1 (got {} and {})",
                self.p_step, self.p_threshold
            )));
        }
        if !(self.epsilon_total > 0.0 && self.epsilon_total < 1.0) {
            return Err(Error::Config("epsilon_total must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// One constraint in standardized coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViolationStats {
    pub x0: f64,
    pub p: f64,
    /// `|A^{-1/2} v|`
    pub scale: f64,
    /// `u - v·A⁻¹b / 2`
    pub shifted_offset: f64,
}

impl ViolationStats {
    fn from_parts(u: f64, v_dot_mean: f64, v_cov_v: f64) -> Result<Self> {
        if !(v_cov_v > 0.0) {
            return Err(Error::NotPositiveDefinite("constraint variance"));
        }
        let scale = (2.0 * v_cov_v).sqrt();
        let shifted_offset = u - v_dot_mean;
        let x0 = shifted_offset / scale;
        Ok(ViolationStats {
            x0,
            p: lower_tail(x0),
            scale,
            shifted_offset,
        })
    }
}

pub fn standardize_constraint(post: &GaussianPosterior, v: &DVector<f64>, u: f64) -> Result<ViolationStats> {
    let h = post.covariance() * v;
    ViolationStats::from_parts(u, v.dot(post.mean()), v.dot(&h))
}

/// Parameters of the sheared marginal `exp(-(1+a)x² + bx)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShearCoefficients {
    pub a: f64,
    pub b: f64,
}

impl ShearCoefficients {
    pub const IDENTITY: ShearCoefficients = ShearCoefficients { a: 0.0, b: 0.0 };
}

/// Solves for the shear that moves the violation probability at `x0` to `p_target`.
///
/// With `y0 = erf⁻¹(2p - 1)`, the first equation gives
/// `b/(2(1+a)) = x0 - y0/sqrt(1+a)`; substituting into the mean condition
/// leaves `1/sqrt(1+a) = (R(x0) - x0) / (R(y0) - y0)` where `R` is the mean
/// of the unit-width Gaussian truncated below at its argument.
pub fn solve_shear_coefficients(x0: f64, p_target: f64) -> Result<ShearCoefficients> {
    let p_now = lower_tail(x0);
    if !(x0.is_finite() && p_target > 0.0 && p_now < 1.0) {
        return Err(Error::Numerical(format!(
            "shear target {p_target} at x0 = {x0} is out of range"
        )));
    }
    if p_target > p_now * (1.0 + 1e-12) {
        return Err(Error::Numerical(format!(
            "shear target {p_target} exceeds current violation {p_now}"
        )));
    }
    if p_target >= p_now {
        return Ok(ShearCoefficients::IDENTITY);
    }
    let y0 = lower_tail_inv(p_target);
    let ratio = (upper_truncated_mean(x0) - x0) / (upper_truncated_mean(y0) - y0);
    let one_plus_a = 1.0 / (ratio * ratio);
    let a = one_plus_a - 1.0;
    let b = 2.0 * one_plus_a * x0 - 2.0 * one_plus_a.sqrt() * y0;
    if !(a.is_finite() && b.is_finite() && one_plus_a > 0.0) {
        return Err(Error::Numerical(format!(
            "no finite shear for x0 = {x0}, p = {p_target}"
        )));
    }
    Ok(ShearCoefficients { a, b })
}

/// Residuals of the two coefficient equations at `(a, b)`.
pub fn shear_residuals(x0: f64, p_target: f64, coeffs: ShearCoefficients) -> [f64; 2] {
    let ShearCoefficients { a, b } = coeffs;
    let s = (1.0 + a).sqrt();
    let y0 = lower_tail_inv(p_target);
    let first = b - (2.0 * (1.0 + a) * x0 - 2.0 * s * y0);
    let lhs = upper_truncated_mean(x0);
    let rhs = b / (2.0 * (1.0 + a))
        + (-y0 * y0).exp() / (2.0 * std::f64::consts::PI.sqrt() * s * (1.0 - p_target));
    [first, lhs - rhs]
}

/// Folds a one-dimensional shear along `v` back into `(A, b)`.
pub fn apply_shear(post: &GaussianPosterior, v: &DVector<f64>, coeffs: ShearCoefficients) -> Result<GaussianPosterior> {
    let mut next = post.clone();
    shear_in_place(&mut next, v, coeffs)?;
    Ok(next)
}

fn shear_in_place(post: &mut GaussianPosterior, v: &DVector<f64>, coeffs: ShearCoefficients) -> Result<()> {
    let ShearCoefficients { a, b } = coeffs;
    if !(1.0 + a > 0.0) {
        return Err(Error::NotPositiveDefinite("shear with 1 + a <= 0"));
    }
    if a == 0.0 && b == 0.0 {
        return Ok(());
    }
    let v_cov_v = v.dot(&(post.covariance() * v));
    if !(v_cov_v > 0.0) {
        return Err(Error::NotPositiveDefinite("constraint variance"));
    }
    let scale2 = 2.0 * v_cov_v;
    let scale = scale2.sqrt();
    // v·A⁻¹b = 2 v·mean
    let v_ainv_b = 2.0 * v.dot(post.mean());
    let delta_b = v * (b / scale + a * v_ainv_b / scale2);
    post.add_rank_one(v, a / scale2, &delta_b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShearReport {
    pub iterations: usize,
    pub max_iterations_hit: bool,
    pub initial_max_violation: f64,
    pub final_max_violation: f64,
    /// `Σ_i p_i`, an upper bound on the total mass outside the region.
    pub violation_union_bound: f64,
    pub within_epsilon_total: bool,
    pub final_violation: Vec<f64>,
}

const TARGET_TOLERANCE: f64 = 1e-9;
const RESYNC_INTERVAL: usize = 32;

/// Repeatedly shears the most violated constraint until all are below threshold.
pub fn shear_until_physical(
    post: &GaussianPosterior,
    constraints: &LinearConstraintSet,
    config: &ShearingConfig,
) -> Result<(GaussianPosterior, ShearReport)> {
    config.validate()?;
    if constraints.dim() != post.dim() {
        return Err(Error::Dimension {
            what: "constraint dimension",
            expected: post.dim(),
            found: constraints.dim(),
        });
    }
    let mut post = post.clone();
    let vmat = constraints.matrix();
    let count = constraints.len();
    let mut v_cov_v = DVector::zeros(count);
    let mut iterations = 0;
    let mut hit_limit = false;
    let mut initial_max = None;
    let mut stats: Vec<ViolationStats>;

    loop {
        if iterations % RESYNC_INTERVAL == 0 {
            let vs = vmat * post.covariance();
            for i in 0..count {
                v_cov_v[i] = vs.row(i).dot(&vmat.row(i));
            }
        }
        let v_mean = vmat * post.mean();
        stats = (0..count)
            .map(|i| ViolationStats::from_parts(constraints.offset(i), v_mean[i], v_cov_v[i]))
            .collect::<Result<_>>()?;
        let max_p = stats.iter().map(|s| s.p).fold(0.0, f64::max);
        initial_max.get_or_insert(max_p);

        let chosen = match config.deviation {
            DeviationRule::Signed => stats
                .iter()
                .enumerate()
                .filter(|(_, s)| s.p > config.p_threshold + TARGET_TOLERANCE)
                .max_by(|a, b| a.1.x0.total_cmp(&b.1.x0))
                .map(|(i, _)| i),
            DeviationRule::Absolute => stats
                .iter()
                .enumerate()
                .filter(|(_, s)| s.p > config.p_threshold + TARGET_TOLERANCE)
                .max_by(|a, b| a.1.x0.abs().total_cmp(&b.1.x0.abs()))
                .map(|(i, _)| i),
        };
        let Some(j) = chosen else { break };
        if iterations >= config.max_iterations {
            hit_limit = true;
            break;
        }

        let target = stats[j].p - config.p_step;
        let coeffs = solve_shear_coefficients(stats[j].x0, target)?;
        let vj = constraints.vector(j);
        let h = post.covariance() * &vj;
        let vh = vmat * &h;
        shear_in_place(&mut post, &vj, coeffs)?;
        iterations += 1;
        // v_iᵀΣv_i shrinks by a/(1+a) (v_i·h)² / v_jᵀΣv_j
        let factor = coeffs.a / (1.0 + coeffs.a) / v_cov_v[j];
        for i in 0..count {
            v_cov_v[i] -= factor * vh[i] * vh[i];
        }
    }

    post.refresh()?;
    let v_mean = vmat * post.mean();
    let vs = vmat * post.covariance();
    let final_violation: Vec<f64> = (0..count)
        .map(|i| {
            ViolationStats::from_parts(constraints.offset(i), v_mean[i], vs.row(i).dot(&vmat.row(i)))
                .map(|s| s.p)
        })
        .collect::<Result<_>>()?;
    let union: f64 = final_violation.iter().sum();
    let report = ShearReport {
        iterations,
        max_iterations_hit: hit_limit,
        initial_max_violation: initial_max.unwrap_or(0.0),
        final_max_violation: final_violation.iter().copied().fold(0.0, f64::max),
        violation_union_bound: union,
        within_epsilon_total: union <= config.epsilon_total,
        final_violation,
    };
    Ok((post, report))
}
