//! Adaptive reconstruction of the one-photon Fock state from coherent probes.

use pattern_tomo::experiment::Experiment;
use pattern_tomo::{RunConfig, SignalState};

fn main() -> pattern_tomo::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut cfg = RunConfig::with_signal(SignalState::SinglePhoton).seeded(seed);
    cfg.continue_past_stop = true;
    let out = Experiment::prepare(&cfg)?.run()?;

    match out.trace.stopped_at {
        Some(k) => println!("stopping rule fired at step {k}"),
        None => println!("stopping rule never fired"),
    }
    let r = &out.report;
    println!("settings used {}, fidelity {:.4}", r.settings_used, r.fidelity);
    println!("representation residual of the lattice {:.2e}", r.representation_residual);

    // the estimated photon-number distribution
    for n in 0..4 {
        println!("P(n = {n}) = {:+.4}", r.density_matrix.re[n][n]);
    }
    Ok(())
}
