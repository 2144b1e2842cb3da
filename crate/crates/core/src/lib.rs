//! Recursive Bayesian data-pattern tomography.
//!
//! An unknown optical state is expanded over a lattice of coherent probe
//! states. Probe responses ("data patterns") for every measurement setting
//! are measured up front into a [`bank::PatternBank`]; the signal is then
//! measured one setting at a time, each time choosing the setting whose
//! outcome is expected to shrink the posterior variance of the expansion
//! coefficients the most, until further measurements stop paying off.
//!
//! The belief over coefficients is Gaussian ([`posterior`]), kept close to
//! the physical region by shearing against linearized positivity constraints
//! ([`shearing`]), and scored by [`selector`]. [`experiment`] runs the whole
//! loop on simulated data.

// `!(x > 0.0)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bank;
pub mod baseline;
pub mod distance;
pub mod error;
pub mod exact;
pub mod experiment;
pub mod posterior;
pub mod quantum;
pub mod report;
pub mod selector;
pub mod shearing;
pub mod special;

pub use error::{BankError, Error, Result};
pub use experiment::{run_baseline, run_reconstruction, RunConfig, RunOutcome};
pub use quantum::{ComplexAmplitude, SignalState};
