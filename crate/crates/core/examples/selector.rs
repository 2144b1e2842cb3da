//! Scoring candidate settings by expected posterior variance.

use std::collections::BTreeSet;

use pattern_tomo::bank::SignalMeter;
use pattern_tomo::experiment::{Experiment, LatticeSpec};
use pattern_tomo::posterior::{bayes_update, init_prior, SigmaMode};
use pattern_tomo::selector::{predictive_outcome_dist, select_next, OutcomeTables};
use pattern_tomo::shearing::shear_until_physical;
use pattern_tomo::{RunConfig, SignalState};

fn main() -> pattern_tomo::Result<()> {
    let mut cfg = RunConfig::with_signal(SignalState::even_cat(0.5, 0.0));
    cfg.lattice = LatticeSpec {
        side_count: 7,
        spacing: 0.25,
        ..LatticeSpec::default()
    };
    let exp = Experiment::prepare(&cfg)?;
    let tables = OutcomeTables::new(cfg.signal_copies, SigmaMode::Beta);
    let mut meter = SignalMeter::new(cfg.signal, cfg.signal_copies, cfg.signal_seed)?;
    let prior = init_prior(exp.lattice.len(), cfg.epsilon_reg)?;
    let (mut post, _) = shear_until_physical(&prior, &exp.constraints, &cfg.shearing)?;
    let mut used = BTreeSet::new();

    for step in 1..=5 {
        let sel = select_next(&post, &exp.bank, &used, &tables)?;
        let mut ranked = sel.scores.clone();
        ranked.sort_by(|a, b| a.predicted_variance.total_cmp(&b.predicted_variance));
        let top: Vec<String> = ranked
            .iter()
            .take(3)
            .map(|s| format!("{}:{:.4e}", s.setting_index, s.predicted_variance))
            .collect();
        println!("step {step}: Var {:.4e}, best {}", post.total_variance(), top.join(" "));

        let k = sel.setting_index;
        let dist = predictive_outcome_dist(&post, &exp.bank.row(k), &tables)?;
        let expected: f64 = dist.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        let freq = meter.measure(k, &exp.bank.setting_amplitudes)?;
        println!("  setting {k}: predicted mean count {expected:.1}, measured {}", freq.count);

        let updated = bayes_update(&post, &exp.bank.row(k), freq, cfg.sigma_mode)?;
        post = shear_until_physical(&updated, &exp.constraints, &cfg.shearing)?.0;
        used.insert(k);
    }
    Ok(())
}
