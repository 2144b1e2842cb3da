//! Adaptive reconstruction of the coherent state |0.5⟩ on the default 11×11 probe lattice.
//!
//! `cargo run --release --example coherent_signal -- [seed]`

use pattern_tomo::experiment::Experiment;
use pattern_tomo::{RunConfig, SignalState};

fn main() -> pattern_tomo::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let cfg = RunConfig::with_signal(SignalState::coherent(0.5, 0.0)).seeded(seed);
    let out = Experiment::prepare(&cfg)?.run()?;

    println!("prior shear: {} iterations", out.initial_shear.iterations);
    println!("{:>4} {:>8} {:>12} {:>12} {:>10}", "step", "setting", "Var", "HS dist", "min eig");
    for s in out.trace.steps.iter().filter(|s| s.step % 10 == 1 || s.stop) {
        println!(
            "{:>4} {:>8} {:>12.4e} {:>12.4e} {:>10.4}",
            s.step, s.setting_index, s.variance, s.hs_distance, s.min_eig_after_shear
        );
    }
    let r = &out.report;
    println!("status {:?} after {} settings", r.status, r.settings_used);
    println!("fidelity {:.4}, min eigenvalue {:.4}", r.fidelity, r.min_eigenvalue);
    Ok(())
}
