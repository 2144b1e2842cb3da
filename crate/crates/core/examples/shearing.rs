//! Shearing a Gaussian belief into the linearized physical region.

use pattern_tomo::experiment::Experiment;
use pattern_tomo::posterior::init_prior;
use pattern_tomo::shearing::{shear_residuals, shear_until_physical, solve_shear_coefficients};
use pattern_tomo::special::lower_tail;
use pattern_tomo::RunConfig;

fn main() -> pattern_tomo::Result<()> {
    // one dimension: move the violated mass from p(x0) to a target
    for (x0, target) in [(0.0, 0.25), (0.5, 0.3), (1.5, 0.5)] {
        let c = solve_shear_coefficients(x0, target)?;
        let r = shear_residuals(x0, target, c);
        println!(
            "x0 {x0:+.2}: p {:.4} -> {target:.2} with a = {:.4}, b = {:+.4} (residuals {:.1e}, {:.1e})",
            lower_tail(x0),
            c.a,
            c.b,
            r[0],
            r[1]
        );
    }

    // the flat prior over the default lattice against all Fock and coherent test kets
    let exp = Experiment::prepare(&RunConfig::default())?;
    let prior = init_prior(exp.lattice.len(), 1e-6)?;
    let (post, report) = shear_until_physical(&prior, &exp.constraints, &exp.config.shearing)?;
    println!(
        "{} constraints, {} shear steps, worst violation {:.3} -> {:.4}",
        exp.constraints.len(),
        report.iterations,
        report.initial_max_violation,
        report.final_max_violation
    );
    println!("total variance {:.4e} -> {:.4e}", prior.total_variance(), post.total_variance());
    Ok(())
}
