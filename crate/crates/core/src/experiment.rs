//! End-to-end adaptive reconstruction runs.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use log::{debug, info};
use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::baseline::{lsq_baseline, BaselineFit};
use crate::bank::{load_bank, simulate_probe_bank, PatternBank, SignalMeter};
use crate::distance::TruthGeometry;
use crate::error::{Error, Result};
use crate::posterior::{bayes_update, init_prior, pattern_direction, GaussianPosterior, SigmaMode};
use crate::quantum::{
    assemble_estimator, build_probe_lattice, constraint_coefficients, fidelity, fidelity_from_weights,
    full_weights, ComplexAmplitude, ProbeLattice, SignalState, TestKetSet, DEFAULT_FOCK_CUTOFF,
};
use crate::selector::{select_next, stopping_check, OutcomeTables, StoppingConfig};
use crate::shearing::{shear_until_physical, LinearConstraintSet, ShearReport, ShearingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSpec {
    pub side_count: usize,
    pub spacing: f64,
    pub center: ComplexAmplitude,
}

impl Default for LatticeSpec {
    fn default() -> Self {
        LatticeSpec {
            side_count: 11,
            spacing: 0.15,
            center: Complex64::new(0.0, 0.0),
        }
    }
}

impl LatticeSpec {
    pub fn build(&self) -> Result<ProbeLattice> {
        build_probe_lattice(self.side_count, self.spacing, self.center)
    }
}

/// Everything that determines a run. Serialized verbatim into `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub lattice: LatticeSpec,
    pub signal: SignalState,
    pub probe_copies: u64,
    pub signal_copies: u64,
    pub bank_seed: u64,
    pub signal_seed: u64,
    /// Load the probe bank from this file instead of simulating it.
    pub bank_path: Option<PathBuf>,
    pub epsilon_reg: f64,
    pub sigma_mode: SigmaMode,
    pub fock_cutoff: usize,
    pub shearing: ShearingConfig,
    pub stopping: StoppingConfig,
    /// Defaults to the number of settings in the bank.
    pub max_settings: Option<usize>,
    pub continue_past_stop: bool,
    /// Allow a setting to be chosen again; its cached frequency is reused.
    pub with_replacement: bool,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            lattice: LatticeSpec::default(),
            signal: SignalState::coherent(0.5, 0.0),
            probe_copies: 1000,
            signal_copies: 1000,
            bank_seed: 1,
            signal_seed: 2,
            bank_path: None,
            epsilon_reg: 1e-6,
            sigma_mode: SigmaMode::Beta,
            fock_cutoff: DEFAULT_FOCK_CUTOFF,
            shearing: ShearingConfig::default(),
            stopping: StoppingConfig::default(),
            max_settings: None,
            continue_past_stop: false,
            with_replacement: false,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn with_signal(signal: SignalState) -> Self {
        RunConfig {
            signal,
            ..RunConfig::default()
        }
    }

    /// Sets both the bank and the signal seed.
    pub fn seeded(mut self, seed: u64) -> Self {
        self.bank_seed = seed;
        self.signal_seed = seed;
        self
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice.build()?;
        if self.probe_copies == 0 || self.signal_copies == 0 {
            return Err(Error::Config("copy counts must be positive".into()));
        }
        if !(self.epsilon_reg > 0.0 && self.epsilon_reg.is_finite()) {
            return Err(Error::Config("epsilon_reg must be positive".into()));
        }
        if self.fock_cutoff < 2 {
            return Err(Error::Config("Fock cutoff must be at least 2".into()));
        }
        if self.max_settings == Some(0) {
            return Err(Error::Config("max_settings must be positive".into()));
        }
        self.shearing.validate()?;
        self.stopping.validate()
    }

    /// The probe bank for this run, simulated or loaded, checked against the lattice.
    pub fn bank(&self, lattice: &ProbeLattice) -> Result<PatternBank> {
        let bank = match &self.bank_path {
            Some(path) => load_bank(path)?,
            None => simulate_probe_bank(&lattice.amplitudes, &lattice.amplitudes, self.probe_copies, self.bank_seed)?,
        };
        if bank.probes() != lattice.len() {
            return Err(Error::Dimension {
                what: "bank probes vs lattice",
                expected: lattice.len(),
                found: bank.probes(),
            });
        }
        if let Some(m) = (0..lattice.len())
            .find(|&m| (bank.probe_amplitudes[m] - lattice.amplitudes[m]).norm() > 1e-9)
        {
            return Err(Error::Config(format!("bank probe {m} does not match the lattice")));
        }
        Ok(bank)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Stopped,
    Exhausted,
    MaxSettings,
}

/// One adaptive step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub setting_index: usize,
    pub setting_re: f64,
    pub setting_im: f64,
    /// Smallest predicted variance over the candidates (the proposal for this step).
    pub predicted_variance: f64,
    /// Total variance before this step's measurement.
    pub variance_before: f64,
    /// Total variance after the Bayesian update, before shearing.
    pub variance_updated: f64,
    /// Total variance after shearing.
    pub variance: f64,
    pub count: u64,
    pub frequency: f64,
    /// `|Δ - Var| < eta·Var` for this proposal alone.
    pub criterion_met: bool,
    /// The stopping rule (criterion held for the required window).
    pub stop: bool,
    pub min_eig_before_shear: f64,
    pub min_eig_after_shear: f64,
    /// Posterior-averaged squared HS distance to the signal.
    pub hs_distance: f64,
    /// Squared HS distance between consecutive mean estimators.
    pub step_distance: f64,
    pub shear_iterations: usize,
    pub shear_limit_hit: bool,
    /// Variance rose above the previous step's value.
    pub variance_jump: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub steps: Vec<TraceStep>,
    /// First step at which the stopping rule fired.
    pub stopped_at: Option<usize>,
}

impl SelectionTrace {
    pub fn settings_in_order(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.setting_index).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingFit {
    pub setting_index: usize,
    pub amplitude: ComplexAmplitude,
    /// `P_k` of the mean estimator from the bank patterns.
    pub estimated_probability: f64,
    pub measured_frequency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrixRecord {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub status: RunStatus,
    pub settings_used: usize,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// All `M` weights, `c_M = 1 - Σ c_m` appended.
    pub weights: Vec<f64>,
    pub total_variance: f64,
    /// `⟨ψ|ρ_est|ψ⟩` in the truncated Fock basis.
    pub fidelity: f64,
    /// Same quantity from closed-form probe overlaps.
    pub fidelity_untruncated: f64,
    pub min_eigenvalue: f64,
    pub hs_distance: f64,
    /// `‖ρ_true - ρ(c*)‖²` for the best probe representation.
    pub representation_residual: f64,
    pub density_matrix: DensityMatrixRecord,
    pub setting_fits: Vec<SettingFit>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: SelectionTrace,
    pub report: EstimatorReport,
    pub initial_shear: ShearReport,
    pub posterior: GaussianPosterior,
}

/// Everything a run needs besides the mutable posterior.
pub struct Experiment {
    pub config: RunConfig,
    pub lattice: ProbeLattice,
    pub bank: PatternBank,
    pub constraints: LinearConstraintSet,
    pub truth: TruthGeometry,
}

impl Experiment {
    pub fn prepare(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let lattice = config.lattice.build()?;
        let bank = config.bank(&lattice)?;
        let kets = TestKetSet::standard(config.fock_cutoff, &lattice)?;
        let constraints = constraint_coefficients(&kets, &lattice)?;
        let truth = TruthGeometry::new(&lattice, &config.signal);
        Ok(Experiment {
            config: config.clone(),
            lattice,
            bank,
            constraints,
            truth,
        })
    }

    fn min_eigenvalue(&self, mean: &DVector<f64>) -> Result<f64> {
        let c: Vec<f64> = mean.iter().copied().collect();
        Ok(assemble_estimator(&c, &self.lattice, self.config.fock_cutoff)?.min_eigenvalue())
    }

    pub fn run(&self) -> Result<RunOutcome> {
        let cfg = &self.config;
        let tables = OutcomeTables::new(cfg.signal_copies, cfg.sigma_mode);
        let mut meter = SignalMeter::new(cfg.signal, cfg.signal_copies, cfg.signal_seed)?;
        let prior = init_prior(self.lattice.len(), cfg.epsilon_reg)?;
        let (mut post, initial_shear) = shear_until_physical(&prior, &self.constraints, &cfg.shearing)?;
        info!(
            "prior sheared in {} iterations, variance {:.4e}",
            initial_shear.iterations,
            post.total_variance()
        );

        let max_steps = cfg.max_settings.unwrap_or(self.bank.settings());
        let mut used = BTreeSet::new();
        let mut history = Vec::new();
        let mut trace = SelectionTrace::default();
        let mut status = RunStatus::MaxSettings;

        while trace.steps.len() < max_steps {
            let exclude = if cfg.with_replacement { BTreeSet::new() } else { used.clone() };
            let selection = match select_next(&post, &self.bank, &exclude, &tables) {
                Ok(s) => s,
                Err(Error::SettingsExhausted(_)) => {
                    status = RunStatus::Exhausted;
                    break;
                }
                Err(e) => return Err(e),
            };
            let k = selection.setting_index;
            let var_k = post.total_variance();
            history.push((selection.delta, var_k));
            let criterion_met = (selection.delta - var_k).abs() < cfg.stopping.eta * var_k;
            let stop = stopping_check(&history, &cfg.stopping);

            let freq = meter.measure(k, &self.bank.setting_amplitudes)?;
            let updated = bayes_update(&post, &self.bank.row(k), freq, cfg.sigma_mode)?;
            let min_eig_before_shear = self.min_eigenvalue(updated.mean())?;
            let (sheared, shear) = shear_until_physical(&updated, &self.constraints, &cfg.shearing)?;
            let min_eig_after_shear = self.min_eigenvalue(sheared.mean())?;
            used.insert(k);

            let step = trace.steps.len() + 1;
            let beta = self.bank.setting_amplitudes[k];
            let variance = sheared.total_variance();
            trace.steps.push(TraceStep {
                step,
                setting_index: k,
                setting_re: beta.re,
                setting_im: beta.im,
                predicted_variance: selection.delta,
                variance_before: var_k,
                variance_updated: updated.total_variance(),
                variance,
                count: freq.count,
                frequency: freq.value(),
                criterion_met,
                stop,
                min_eig_before_shear,
                min_eig_after_shear,
                hs_distance: self.truth.posterior_distance(&sheared),
                step_distance: self.truth.step_distance(post.mean(), sheared.mean()),
                shear_iterations: shear.iterations,
                shear_limit_hit: shear.max_iterations_hit,
                variance_jump: variance > var_k,
            });
            debug!(
                "step {step}: setting {k} Δ={:.4e} Var={var_k:.4e} -> {variance:.4e} (shear {} it)",
                selection.delta, shear.iterations
            );
            post = sheared;
            if stop && trace.stopped_at.is_none() {
                trace.stopped_at = Some(step);
                if !cfg.continue_past_stop {
                    status = RunStatus::Stopped;
                    break;
                }
            }
        }
        if status == RunStatus::MaxSettings && (cfg.max_settings.is_none() || trace.steps.len() < max_steps) {
            status = RunStatus::Exhausted;
        }
        if cfg.continue_past_stop && trace.stopped_at.is_some() && status != RunStatus::Stopped {
            status = RunStatus::Stopped;
        }

        let report = self.report(&post, &meter, &trace, status)?;
        Ok(RunOutcome {
            trace,
            report,
            initial_shear,
            posterior: post,
        })
    }

    fn report(
        &self,
        post: &GaussianPosterior,
        meter: &SignalMeter,
        trace: &SelectionTrace,
        status: RunStatus,
    ) -> Result<EstimatorReport> {
        let cfg = &self.config;
        let mean: Vec<f64> = post.mean().iter().copied().collect();
        let rho = assemble_estimator(&mean, &self.lattice, cfg.fock_cutoff)?;
        let fid = fidelity(&rho, &cfg.signal)?;
        let setting_fits = (0..self.bank.settings())
            .map(|k| {
                let (g, last) = pattern_direction(&self.bank.row(k));
                SettingFit {
                    setting_index: k,
                    amplitude: self.bank.setting_amplitudes[k],
                    estimated_probability: g.dot(post.mean()) + last,
                    measured_frequency: meter
                        .measured()
                        .get(&k)
                        .map(|&c| c as f64 / meter.copies() as f64),
                }
            })
            .collect();
        let cov = post.covariance();
        let n = cfg.fock_cutoff;
        Ok(EstimatorReport {
            status,
            settings_used: trace.steps.len(),
            weights: full_weights(&mean),
            covariance: (0..cov.nrows())
                .map(|i| cov.row(i).iter().copied().collect())
                .collect(),
            total_variance: post.total_variance(),
            fidelity: fid,
            fidelity_untruncated: fidelity_from_weights(&mean, &self.lattice, &cfg.signal),
            min_eigenvalue: rho.min_eigenvalue(),
            hs_distance: self.truth.posterior_distance(post),
            representation_residual: self.truth.residual(),
            density_matrix: DensityMatrixRecord {
                re: (0..n).map(|i| (0..n).map(|j| rho.entries[(i, j)].re).collect()).collect(),
                im: (0..n).map(|i| (0..n).map(|j| rho.entries[(i, j)].im).collect()).collect(),
            },
            setting_fits,
            mean,
        })
    }
}

pub fn run_reconstruction(config: &RunConfig) -> Result<RunOutcome> {
    Experiment::prepare(config)?.run()
}

/// Least-squares fit over every setting, for comparison with the adaptive run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub fit: BaselineFit,
    pub weights: Vec<f64>,
    pub fidelity: f64,
    pub min_eigenvalue: f64,
    /// Squared HS distance of the fitted estimator to the signal.
    pub hs_distance: f64,
    pub frequencies: Vec<f64>,
}

impl Experiment {
    /// Measures the signal at every bank setting and fits all of them at once.
    ///
    /// Uses the same signal seed as [`Experiment::run`], so shared settings see
    /// identical counts.
    pub fn baseline(&self) -> Result<BaselineReport> {
        let cfg = &self.config;
        let mut meter = SignalMeter::new(cfg.signal, cfg.signal_copies, cfg.signal_seed)?;
        let frequencies = (0..self.bank.settings())
            .map(|k| meter.measure(k, &self.bank.setting_amplitudes).map(|f| f.value()))
            .collect::<Result<Vec<_>>>()?;
        let fit = lsq_baseline(&self.bank, &frequencies)?;
        let rho = assemble_estimator(&fit.coefficients, &self.lattice, cfg.fock_cutoff)?;
        let c = DVector::from_column_slice(&fit.coefficients);
        Ok(BaselineReport {
            weights: full_weights(&fit.coefficients),
            fidelity: fidelity(&rho, &cfg.signal)?,
            min_eigenvalue: rho.min_eigenvalue(),
            hs_distance: self.truth.distance(&c),
            frequencies,
            fit,
        })
    }
}

pub fn run_baseline(config: &RunConfig) -> Result<BaselineReport> {
    Experiment::prepare(config)?.baseline()
}
