//! Gaussian posterior against brute-force Bayes for two probes (one free coefficient).

use num_complex::Complex64;
use pattern_tomo::exact::{exact_moments_oracle, Observation, OracleRegion};
use pattern_tomo::posterior::{bayes_update, init_prior, Frequency, SigmaMode};
use pattern_tomo::quantum::coherent_overlap_prob;

fn main() -> pattern_tomo::Result<()> {
    let probes = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
    let c_true = 0.35;
    let copies = 1000;
    let mut post = init_prior(2, 1e-6)?;
    let mut obs = Vec::new();
    for k in 0..10 {
        let beta = Complex64::new(-0.4 + 0.18 * k as f64, 0.1);
        let row: Vec<f64> = probes.iter().map(|&a| coherent_overlap_prob(a, beta)).collect();
        // noiseless counts, rounded
        let p = c_true * row[0] + (1.0 - c_true) * row[1];
        let frequency = Frequency::new((p * copies as f64).round() as u64, copies)?;
        post = bayes_update(&post, &row, frequency, SigmaMode::Beta)?;
        obs.push(Observation { row, frequency });

        let exact = exact_moments_oracle(&OracleRegion::interval(0.0, 1.0), &obs)?;
        println!(
            "{:>2} updates: gaussian {:.5} ± {:.5} | exact {:.5} ± {:.5}",
            k + 1,
            post.mean()[0],
            post.covariance()[(0, 0)].sqrt(),
            exact.mean[0],
            exact.covariance[(0, 0)].sqrt()
        );
    }
    Ok(())
}
