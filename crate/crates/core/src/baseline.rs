//! Unconstrained least-squares data-pattern fit.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::bank::PatternBank;
use crate::error::{Error, Result};

pub const BASELINE_RIDGE: f64 = 1e-10;
const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineFit {
    /// Free coefficients `c_1 .. c_{M-1}`.
    pub coefficients: Vec<f64>,
    pub rank_deficient: bool,
    /// `Σ_k (F_k - Σ_m c_m f_km)²` at the solution.
    pub squared_distance: f64,
}

/// Minimizes `Σ_k (F_k - Σ_m c_m f_km)²` with `c_M = 1 - Σ c_m`.
///
/// Solved through ridge-regularized normal equations; positivity is not imposed.
pub fn lsq_baseline(bank: &PatternBank, signal: &[f64]) -> Result<BaselineFit> {
    let k_total = bank.settings();
    if signal.len() != k_total {
        return Err(Error::Dimension {
            what: "signal frequencies",
            expected: k_total,
            found: signal.len(),
        });
    }
    let free = bank.probes() - 1;
    let rows: Vec<Vec<f64>> = (0..k_total).map(|k| bank.row(k)).collect();
    let design = DMatrix::from_fn(k_total, free, |k, m| rows[k][m] - rows[k][free]);
    let target = DVector::from_fn(k_total, |k, _| signal[k] - rows[k][free]);

    let normal = design.transpose() * &design;
    let eig = SymmetricEigen::new(normal.clone()).eigenvalues;
    let top = eig.iter().copied().fold(0.0, f64::max);
    let bottom = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let rank_deficient = free > k_total || bottom <= RANK_TOLERANCE * top;

    let ridge = normal + DMatrix::identity(free, free) * BASELINE_RIDGE;
    let chol = ridge
        .cholesky()
        .ok_or(Error::NotPositiveDefinite("least-squares normal equations"))?;
    let c = chol.solve(&(design.transpose() * &target));
    let resid = &target - &design * &c;
    Ok(BaselineFit {
        coefficients: c.iter().copied().collect(),
        rank_deficient,
        squared_distance: resid.norm_squared(),
    })
}
