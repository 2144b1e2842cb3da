//! Least-squares fit over every setting next to the adaptive estimate.

use pattern_tomo::experiment::Experiment;
use pattern_tomo::{RunConfig, SignalState};

fn main() -> pattern_tomo::Result<()> {
    for signal in [SignalState::coherent(0.5, 0.0), SignalState::even_cat(0.5, 0.0)] {
        let exp = Experiment::prepare(&RunConfig::with_signal(signal))?;
        let adaptive = exp.run()?.report;
        let lsq = exp.baseline()?;
        println!(
            "{:<10} adaptive F {:.4} with {:>3} settings | least squares F {:.4}, min eig {:+.3}",
            signal.name(),
            adaptive.fidelity,
            adaptive.settings_used,
            lsq.fidelity,
            lsq.min_eigenvalue
        );
    }
    Ok(())
}
