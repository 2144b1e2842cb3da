//! Hilbert-Schmidt distances between probe-expanded estimators and the signal.
//!
//! With `ρ(c) = ρ_M + Σ_{m<M} c_m (ρ_m - ρ_M)` every squared distance is a
//! quadratic form in `c` built from the probe Gram matrix and the signal's
//! Born probabilities at the probe amplitudes, so no Fock truncation enters.

use nalgebra::{DMatrix, DVector};

use crate::posterior::GaussianPosterior;
use crate::quantum::{probe_gram, signal_born_probability, ProbeLattice, SignalState};

const PINV_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct TruthGeometry {
    /// Gram form on the free coefficients, `tr((ρ_m - ρ_M)(ρ_n - ρ_M))`.
    reduced_gram: DMatrix<f64>,
    /// `tr((ρ_m - ρ_M)(ρ_M - ρ_true))`
    linear: DVector<f64>,
    /// `‖ρ_M - ρ_true‖²`
    constant: f64,
    best_fit: DVector<f64>,
    residual: f64,
}

impl TruthGeometry {
    pub fn new(lattice: &ProbeLattice, signal: &SignalState) -> Self {
        let gram = probe_gram(lattice);
        let m = lattice.len();
        let last = m - 1;
        let overlaps: Vec<f64> = lattice
            .amplitudes
            .iter()
            .map(|&a| signal_born_probability(signal, a))
            .collect();
        let reduced_gram = DMatrix::from_fn(last, last, |i, j| {
            gram[(i, j)] - gram[(i, last)] - gram[(last, j)] + gram[(last, last)]
        });
        let linear = DVector::from_fn(last, |i, _| {
            gram[(i, last)] - gram[(last, last)] - overlaps[i] + overlaps[last]
        });
        // pure signal: tr ρ_true² = 1
        let constant = 2.0 - 2.0 * overlaps[last];
        let pinv = reduced_gram
            .clone()
            .pseudo_inverse(PINV_CUTOFF)
            .expect("cutoff is non-negative");
        let best_fit = -(&pinv * &linear);
        let mut geom = TruthGeometry {
            reduced_gram,
            linear,
            constant,
            best_fit,
            residual: 0.0,
        };
        geom.residual = geom.distance(&geom.best_fit.clone());
        geom
    }

    /// `‖ρ(c) - ρ_true‖²`, clamped at zero.
    pub fn distance(&self, c: &DVector<f64>) -> f64 {
        let quad = c.dot(&(&self.reduced_gram * c));
        (quad + 2.0 * self.linear.dot(c) + self.constant).max(0.0)
    }

    /// Posterior average of `‖ρ(c) - ρ_true‖²`: distance of the mean plus `tr(S̃Σ)`.
    pub fn posterior_distance(&self, post: &GaussianPosterior) -> f64 {
        let spread = self.reduced_gram.component_mul(post.covariance()).sum();
        (self.distance(post.mean()) + spread).max(0.0)
    }

    /// `‖ρ(c₁) - ρ(c₂)‖²`.
    pub fn step_distance(&self, from: &DVector<f64>, to: &DVector<f64>) -> f64 {
        let d = to - from;
        d.dot(&(&self.reduced_gram * &d)).max(0.0)
    }

    /// Gram-projected representation of the signal on the free coefficients.
    pub fn best_fit(&self) -> &DVector<f64> {
        &self.best_fit
    }

    /// `‖ρ_true - ρ(c*)‖²`: how well the probe span represents the signal.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn reduced_gram(&self) -> &DMatrix<f64> {
        &self.reduced_gram
    }
}

pub fn hs_distance_to_truth(post: &GaussianPosterior, lattice: &ProbeLattice, signal: &SignalState) -> f64 {
    TruthGeometry::new(lattice, signal).posterior_distance(post)
}
