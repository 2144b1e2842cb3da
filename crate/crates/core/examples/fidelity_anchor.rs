//! Fidelity of an equal mixture of |α⟩ and |-α⟩ with the even cat built from the same α.
//!
//! For the squared overlap `⟨ψ|ρ|ψ⟩` the value is `(1 + exp(-2|α|²)) / 2`.
//! At α = 0.5 that is 0.8033; the often quoted 0.8894 corresponds to the
//! same formula with `|α|²` halved, i.e. amplitudes in a `1/√2`-scaled convention.

use num_complex::Complex64;
use pattern_tomo::quantum::{fidelity, DensityMatrix};
use pattern_tomo::SignalState;

fn main() -> pattern_tomo::Result<()> {
    let cutoff = 60;
    for alpha in [0.5, 0.5 / 2f64.sqrt()] {
        let project = |a: f64| DensityMatrix::projector(&SignalState::coherent(a, 0.0).fock_amplitudes(cutoff));
        let mixture = DensityMatrix {
            entries: (project(alpha).entries + project(-alpha).entries) * Complex64::new(0.5, 0.0),
        };
        let f = fidelity(&mixture, &SignalState::even_cat(alpha, 0.0))?;
        println!(
            "alpha {alpha:.4}: <psi|rho|psi> = {f:.5}, sqrt = {:.5}, closed form {:.5}",
            f.sqrt(),
            (1.0 + (-2.0 * alpha * alpha).exp()) / 2.0
        );
    }
    Ok(())
}
