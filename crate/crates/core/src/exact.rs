//! Brute-force Bayesian posterior on a dense grid, for one or two free coefficients.
//!
//! Integrates the product of binomial likelihoods against a flat prior over
//! a box, optionally cut down by linear constraints. Used to check the
//! Gaussian approximation; it is far too slow for real problem sizes.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::posterior::{pattern_direction, Frequency};
use crate::shearing::LinearConstraintSet;

pub const MIN_GRID_POINTS: usize = 2001;

/// Integration domain: a box, optionally intersected with half-spaces.
#[derive(Debug, Clone)]
pub struct OracleRegion<'a> {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub constraints: Option<&'a LinearConstraintSet>,
    /// Grid points per axis (odd, at least [`MIN_GRID_POINTS`]).
    pub points: usize,
}

impl<'a> OracleRegion<'a> {
    pub fn interval(lower: f64, upper: f64) -> Self {
        OracleRegion {
            lower: vec![lower],
            upper: vec![upper],
            constraints: None,
            points: MIN_GRID_POINTS,
        }
    }
}

/// One recorded measurement: pattern row, observed frequency.
#[derive(Debug, Clone)]
pub struct Observation {
    pub row: Vec<f64>,
    pub frequency: Frequency,
}

#[derive(Debug, Clone)]
pub struct ExactMoments {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    /// `ln ∫_region Π_k P_k^{n_k} (1-P_k)^{N-n_k} dc` (binomial coefficients omitted).
    pub log_evidence: f64,
}

fn simpson_weight(i: usize, n: usize) -> f64 {
    if i == 0 || i == n - 1 {
        1.0
    } else if i % 2 == 1 {
        4.0
    } else {
        2.0
    }
}

fn log_likelihood(c: &[f64], obs: &[(DVector<f64>, f64, f64, f64)]) -> f64 {
    let mut total = 0.0;
    for (g, last, succ, fail) in obs {
        let p: f64 = g.iter().zip(c).map(|(gi, ci)| gi * ci).sum::<f64>() + last;
        if !(0.0..=1.0).contains(&p) {
            return f64::NEG_INFINITY;
        }
        if *succ > 0.0 {
            total += succ * p.ln();
        }
        if *fail > 0.0 {
            total += fail * (1.0 - p).ln();
        }
    }
    total
}

pub fn exact_moments_oracle(region: &OracleRegion<'_>, updates: &[Observation]) -> Result<ExactMoments> {
    let dim = region.lower.len();
    if dim == 0 || dim > 2 || region.upper.len() != dim {
        return Err(Error::Config(format!(
            "exact oracle supports one or two coefficients, got {dim}"
        )));
    }
    if region.points < MIN_GRID_POINTS || region.points.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "oracle grid needs an odd count of at least {MIN_GRID_POINTS} points"
        )));
    }
    let obs: Vec<(DVector<f64>, f64, f64, f64)> = updates
        .iter()
        .map(|u| {
            if u.row.len() != dim + 1 {
                return Err(Error::Dimension {
                    what: "oracle pattern row",
                    expected: dim + 1,
                    found: u.row.len(),
                });
            }
            let (g, last) = pattern_direction(&u.row);
            let n = u.frequency.copies as f64;
            let s = u.frequency.count as f64;
            Ok((g, last, s, n - s))
        })
        .collect::<Result<_>>()?;

    let n = region.points;
    let axes: Vec<Vec<f64>> = (0..dim)
        .map(|d| {
            let h = (region.upper[d] - region.lower[d]) / (n - 1) as f64;
            (0..n).map(|i| region.lower[d] + h * i as f64).collect()
        })
        .collect();
    let cell: f64 = (0..dim)
        .map(|d| (region.upper[d] - region.lower[d]) / (n - 1) as f64 / 3.0)
        .product();

    // (coords, quadrature weight, log-likelihood)
    let mut nodes: Vec<([f64; 2], f64, f64)> = Vec::new();
    let inner = if dim == 2 { n } else { 1 };
    for i in 0..n {
        for j in 0..inner {
            let coords = if dim == 2 { [axes[0][i], axes[1][j]] } else { [axes[0][i], 0.0] };
            let c = &coords[..dim];
            if let Some(cons) = region.constraints {
                if !cons.contains(&DVector::from_column_slice(c), 0.0) {
                    continue;
                }
            }
            let ll = log_likelihood(c, &obs);
            if ll.is_finite() {
                let w = simpson_weight(i, n) * if dim == 2 { simpson_weight(j, n) } else { 1.0 };
                nodes.push((coords, w, ll));
            }
        }
    }
    let peak = nodes
        .iter()
        .map(|n| n.2)
        .fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return Err(Error::Numerical("likelihood vanishes on the whole region".into()));
    }
    let mut z = 0.0;
    let mut first = [0.0; 2];
    let mut second = [[0.0; 2]; 2];
    for (c, w, ll) in &nodes {
        let mass = w * (ll - peak).exp();
        z += mass;
        for a in 0..dim {
            first[a] += mass * c[a];
            for b in 0..dim {
                second[a][b] += mass * c[a] * c[b];
            }
        }
    }
    let mean = DVector::from_fn(dim, |a, _| first[a] / z);
    let covariance = DMatrix::from_fn(dim, dim, |a, b| second[a][b] / z - mean[a] * mean[b]);
    Ok(ExactMoments {
        mean,
        covariance,
        log_evidence: peak + (z * cell).ln(),
    })
}
