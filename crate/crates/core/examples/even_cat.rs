//! Even cat state (|0.5⟩ + |-0.5⟩), compared with the single photon on the same seeds.

use pattern_tomo::experiment::Experiment;
use pattern_tomo::{RunConfig, SignalState};

fn fidelity(signal: SignalState, seed: u64) -> pattern_tomo::Result<(f64, usize)> {
    let cfg = RunConfig::with_signal(signal).seeded(seed);
    let r = Experiment::prepare(&cfg)?.run()?.report;
    Ok((r.fidelity, r.settings_used))
}

fn main() -> pattern_tomo::Result<()> {
    println!("{:>4} {:>16} {:>16}", "seed", "cat F (K)", "photon F (K)");
    for seed in 1..=3 {
        let (fc, kc) = fidelity(SignalState::even_cat(0.5, 0.0), seed)?;
        let (fp, kp) = fidelity(SignalState::SinglePhoton, seed)?;
        println!("{seed:>4} {fc:>10.4} ({kc:>3}) {fp:>10.4} ({kp:>3})");
    }
    Ok(())
}
