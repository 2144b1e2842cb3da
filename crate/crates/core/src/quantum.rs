//! Phase-space physics of coherent-state probes.
//!
//! Probes are coherent states `|α_m⟩` on a square lattice, measurements are
//! projections onto coherent states `|β_k⟩`, and every quantity here is an
//! analytic overlap, except for [`assemble_estimator`], which works in a
//! truncated Fock basis.

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shearing::LinearConstraintSet;
use crate::special::ln_factorials;

/// Complex amplitude of a coherent state.
pub type ComplexAmplitude = Complex64;

/// Photon-number cutoff used throughout (photon numbers `0..=40`).
pub const DEFAULT_FOCK_CUTOFF: usize = 41;

/// Tail weight above which [`assemble_estimator`] warns.
pub const TRUNCATION_WARN_LEVEL: f64 = 1e-6;

/// `|⟨β|α⟩|² = exp(-|α - β|²)`.
pub fn coherent_overlap_prob(alpha: ComplexAmplitude, beta: ComplexAmplitude) -> f64 {
    (-(alpha - beta).norm_sqr()).exp()
}

/// Complex overlap `⟨β|α⟩ = exp(-|β|²/2 - |α|²/2 + β̄α)`.
pub fn coherent_inner(beta: ComplexAmplitude, alpha: ComplexAmplitude) -> Complex64 {
    (-0.5 * beta.norm_sqr() - 0.5 * alpha.norm_sqr() + beta.conj() * alpha).exp()
}

/// `|⟨n|α⟩|² = exp(-|α|²) |α|^{2n} / n!`.
pub fn fock_population(alpha: ComplexAmplitude, n: usize) -> f64 {
    let r2 = alpha.norm_sqr();
    if r2 == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let ln_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    (-r2 + n as f64 * r2.ln() - ln_fact).exp()
}

/// Fock amplitudes `⟨n|α⟩` for `n < cutoff`.
pub fn coherent_fock_amplitudes(alpha: ComplexAmplitude, cutoff: usize) -> DVector<Complex64> {
    let mut out = DVector::from_element(cutoff, Complex64::new(0.0, 0.0));
    if cutoff == 0 {
        return out;
    }
    out[0] = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 1..cutoff {
        out[n] = out[n - 1] * alpha / (n as f64).sqrt();
    }
    out
}

/// Square lattice of probe amplitudes.
///
/// Index `m = j * side_count + i`, where `i` runs along the real axis and
/// `j` along the imaginary axis, both starting from the lower-left corner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeLattice {
    pub side_count: usize,
    pub spacing: f64,
    pub center: ComplexAmplitude,
    pub amplitudes: Vec<ComplexAmplitude>,
}

impl ProbeLattice {
    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// Lattice index `(i, j)` of probe `m`.
    pub fn grid_position(&self, m: usize) -> (usize, usize) {
        (m % self.side_count, m / self.side_count)
    }

    /// Index of the probe closest to `alpha`.
    pub fn nearest(&self, alpha: ComplexAmplitude) -> usize {
        self.amplitudes
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - alpha).norm_sqr().total_cmp(&(b.1 - alpha).norm_sqr()))
            .map(|(m, _)| m)
            .unwrap_or(0)
    }
}

pub fn build_probe_lattice(
    side_count: usize,
    spacing: f64,
    center: ComplexAmplitude,
) -> Result<ProbeLattice> {
    if side_count < 3 || side_count.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "lattice side count must be odd and at least 3, got {side_count}"
        )));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::Config(format!(
            "lattice spacing must be positive, got {spacing}"
        )));
    }
    if !(center.re.is_finite() && center.im.is_finite()) {
        return Err(Error::Config("lattice center must be finite".into()));
    }
    let half = (side_count / 2) as f64;
    let mut amplitudes = Vec::with_capacity(side_count * side_count);
    for j in 0..side_count {
        for i in 0..side_count {
            let re = (i as f64 - half) * spacing;
            let im = (j as f64 - half) * spacing;
            amplitudes.push(center + Complex64::new(re, im));
        }
    }
    Ok(ProbeLattice {
        side_count,
        spacing,
        center,
        amplitudes,
    })
}

/// The unknown signal in the simulated experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalState {
    Coherent { alpha: ComplexAmplitude },
    SinglePhoton,
    /// `(|α⟩ + |-α⟩) / sqrt(2 + 2 exp(-2|α|²))`.
    EvenCat { alpha: ComplexAmplitude },
}

impl SignalState {
    pub fn coherent(re: f64, im: f64) -> Self {
        SignalState::Coherent {
            alpha: Complex64::new(re, im),
        }
    }

    pub fn even_cat(re: f64, im: f64) -> Self {
        SignalState::EvenCat {
            alpha: Complex64::new(re, im),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SignalState::Coherent { .. } => "coherent",
            SignalState::SinglePhoton => "single_photon",
            SignalState::EvenCat { .. } => "even_cat",
        }
    }

    /// State vector in the Fock basis `n < cutoff`.
    pub fn fock_amplitudes(&self, cutoff: usize) -> DVector<Complex64> {
        match *self {
            SignalState::Coherent { alpha } => coherent_fock_amplitudes(alpha, cutoff),
            SignalState::SinglePhoton => {
                let mut v = DVector::from_element(cutoff, Complex64::new(0.0, 0.0));
                if cutoff > 1 {
                    v[1] = Complex64::new(1.0, 0.0);
                }
                v
            }
            SignalState::EvenCat { alpha } => {
                let norm = cat_normalization(alpha).sqrt();
                (coherent_fock_amplitudes(alpha, cutoff) + coherent_fock_amplitudes(-alpha, cutoff))
                    / Complex64::new(norm, 0.0)
            }
        }
    }
}

/// `2 (1 + exp(-2|α|²))`, the squared norm of `|α⟩ + |-α⟩`.
pub fn cat_normalization(alpha: ComplexAmplitude) -> f64 {
    2.0 * (1.0 + (-2.0 * alpha.norm_sqr()).exp())
}

/// Born probability `⟨β|ρ_signal|β⟩` of the coherent-projection outcome.
pub fn signal_born_probability(signal: &SignalState, beta: ComplexAmplitude) -> f64 {
    match *signal {
        SignalState::Coherent { alpha } => coherent_overlap_prob(alpha, beta),
        SignalState::SinglePhoton => {
            let r2 = beta.norm_sqr();
            r2 * (-r2).exp()
        }
        SignalState::EvenCat { alpha } => {
            let amp = coherent_inner(beta, alpha) + coherent_inner(beta, -alpha);
            amp.norm_sqr() / cat_normalization(alpha)
        }
    }
}

/// A test ket used to linearize the positivity constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestKet {
    Fock { n: usize },
    Coherent { alpha: ComplexAmplitude },
}

impl TestKet {
    /// `⟨Ψ|α⟩⟨α|Ψ⟩` for a coherent probe `α`.
    pub fn probe_expectation(&self, alpha: ComplexAmplitude) -> f64 {
        match *self {
            TestKet::Fock { n } => fock_population(alpha, n),
            TestKet::Coherent { alpha: psi } => coherent_overlap_prob(alpha, psi),
        }
    }

    pub fn label(&self) -> String {
        match self {
            TestKet::Fock { n } => format!("fock:{n}"),
            TestKet::Coherent { alpha } => format!("coherent:{:+.4}{:+.4}i", alpha.re, alpha.im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestKetSet {
    kets: Vec<TestKet>,
}

impl TestKetSet {
    pub fn new(kets: Vec<TestKet>) -> Result<Self> {
        if kets.is_empty() {
            return Err(Error::Config("test-ket set is empty".into()));
        }
        for (i, a) in kets.iter().enumerate() {
            if kets[..i].contains(a) {
                return Err(Error::Config(format!("duplicate test ket {}", a.label())));
            }
        }
        Ok(TestKetSet { kets })
    }

    /// Fock states `|0⟩ .. |cutoff-1⟩` followed by every probe coherent state.
    pub fn standard(cutoff: usize, lattice: &ProbeLattice) -> Result<Self> {
        let kets = (0..cutoff)
            .map(|n| TestKet::Fock { n })
            .chain(lattice.amplitudes.iter().map(|&alpha| TestKet::Coherent { alpha }))
            .collect();
        Self::new(kets)
    }

    pub fn kets(&self) -> &[TestKet] {
        &self.kets
    }

    pub fn len(&self) -> usize {
        self.kets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kets.is_empty()
    }
}

/// Linear constraints `Σ_m c_m v_{m,i} ≥ u_i` on the free coefficients
/// `c_1 .. c_{M-1}` implied by `⟨Ψ_i|ρ|Ψ_i⟩ ≥ 0`.
pub fn constraint_coefficients(kets: &TestKetSet, lattice: &ProbeLattice) -> Result<LinearConstraintSet> {
    let m_total = lattice.len();
    if m_total < 2 {
        return Err(Error::Config("need at least two probes".into()));
    }
    let free = m_total - 1;
    let reference = lattice.amplitudes[free];
    let mut rows = Vec::with_capacity(kets.len());
    let mut offsets = Vec::with_capacity(kets.len());
    let mut labels = Vec::with_capacity(kets.len());
    for ket in kets.kets() {
        let last = ket.probe_expectation(reference);
        let row: Vec<f64> = lattice.amplitudes[..free]
            .iter()
            .map(|&a| ket.probe_expectation(a) - last)
            .collect();
        rows.push(row);
        offsets.push(-last);
        labels.push(ket.label());
    }
    LinearConstraintSet::from_rows(free, rows, offsets, labels)
}

/// Truncated Fock-basis density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn cutoff(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.entries.diagonal().iter().map(|z| z.re).sum()
    }

    /// Largest `|ρ_ij - conj(ρ_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.cutoff();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.entries.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// `⟨ψ|ρ|ψ⟩` for a column vector `ψ`.
    pub fn expectation(&self, psi: &DVector<Complex64>) -> f64 {
        (psi.adjoint() * &self.entries * psi)[(0, 0)].re
    }

    pub fn projector(psi: &DVector<Complex64>) -> Self {
        DensityMatrix {
            entries: psi * psi.adjoint(),
        }
    }
}

/// Expand the free coefficients into the full weight vector, `c_M = 1 - Σ c_m`.
pub fn full_weights(free: &[f64]) -> Vec<f64> {
    let mut out = free.to_vec();
    out.push(1.0 - free.iter().sum::<f64>());
    out
}

/// `Σ_m |c_m| (1 - Σ_{n<cutoff} |⟨n|α_m⟩|²)`.
pub fn truncation_leakage(weights: &[f64], lattice: &ProbeLattice, cutoff: usize) -> f64 {
    let ln_fact = ln_factorials(cutoff);
    weights
        .iter()
        .zip(&lattice.amplitudes)
        .map(|(c, a)| {
            let r2 = a.norm_sqr();
            let kept: f64 = if r2 == 0.0 {
                1.0
            } else {
                (0..cutoff)
                    .map(|n| (-r2 + n as f64 * r2.ln() - ln_fact[n]).exp())
                    .sum()
            };
            c.abs() * (1.0 - kept).max(0.0)
        })
        .sum()
}

/// `ρ_est = Σ_m c_m |α_m⟩⟨α_m|` with `c_M = 1 - Σ_{m<M} c_m`.
pub fn assemble_estimator(free: &[f64], lattice: &ProbeLattice, cutoff: usize) -> Result<DensityMatrix> {
    if free.len() + 1 != lattice.len() {
        return Err(Error::Dimension {
            what: "estimator coefficients",
            expected: lattice.len() - 1,
            found: free.len(),
        });
    }
    if free.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("non-finite estimator coefficient".into()));
    }
    let weights = full_weights(free);
    let leakage = truncation_leakage(&weights, lattice, cutoff);
    if leakage > TRUNCATION_WARN_LEVEL {
        warn!("Fock truncation at {cutoff} leaks {leakage:.3e} of the estimator weight");
    }
    let mut entries = DMatrix::from_element(cutoff, cutoff, Complex64::new(0.0, 0.0));
    for (c, &alpha) in weights.iter().zip(&lattice.amplitudes) {
        if *c == 0.0 {
            continue;
        }
        let psi = coherent_fock_amplitudes(alpha, cutoff);
        entries.ger(Complex64::new(*c, 0.0), &psi, &psi.conjugate(), Complex64::new(1.0, 0.0));
    }
    Ok(DensityMatrix { entries })
}

/// Probe Gram matrix `S_mn = tr(ρ_m ρ_n) = exp(-|α_m - α_n|²)`.
pub fn probe_gram(lattice: &ProbeLattice) -> DMatrix<f64> {
    let m = lattice.len();
    DMatrix::from_fn(m, m, |i, j| {
        coherent_overlap_prob(lattice.amplitudes[i], lattice.amplitudes[j])
    })
}

/// Fidelity `⟨ψ|ρ|ψ⟩` of an estimator with a pure signal.
pub fn fidelity(rho: &DensityMatrix, signal: &SignalState) -> Result<f64> {
    let defect = rho.hermiticity_defect();
    let scale = rho.entries.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if defect > 1e-10 * scale {
        return Err(Error::NotHermitian(defect));
    }
    Ok(rho.expectation(&signal.fock_amplitudes(rho.cutoff())))
}

/// `⟨ψ|ρ(c)|ψ⟩` evaluated from closed-form probe overlaps, without truncation.
pub fn fidelity_from_weights(free: &[f64], lattice: &ProbeLattice, signal: &SignalState) -> f64 {
    full_weights(free)
        .iter()
        .zip(&lattice.amplitudes)
        .map(|(c, &a)| c * signal_born_probability(signal, a))
        .sum()
}
