//! Scalar special functions used by the shearing and selection code.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::erf;
use statrs::function::gamma::ln_gamma;

/// Mass of the density `exp(-x^2)/sqrt(pi)` below `x0`, i.e. `(1 + erf(x0)) / 2`.
pub fn lower_tail(x0: f64) -> f64 {
    0.5 * erf::erfc(-x0)
}

/// Inverse of [`lower_tail`]: returns `erf^-1(2p - 1)`.
pub fn lower_tail_inv(p: f64) -> f64 {
    let mut x = if p < 0.5 {
        -erf::erfc_inv(2.0 * p)
    } else {
        erf::erfc_inv(2.0 - 2.0 * p)
    };
    // Newton polish; the series inverse is only good to ~1e-10 in the tails.
    for _ in 0..2 {
        let density = (-x * x).exp() / PI.sqrt();
        if density <= 0.0 || !x.is_finite() {
            break;
        }
        let err = if p < 0.5 {
            lower_tail(x) - p
        } else {
            (1.0 - p) - 0.5 * erf::erfc(x)
        };
        x -= err / density;
    }
    x
}

/// Mean of the density proportional to `exp(-y^2)` restricted to `y >= x`.
///
/// Equals `exp(-x^2) / (sqrt(pi) * erfc(x))`; for large `x` the ratio is
/// evaluated from the asymptotic series of `erfc` to avoid `0/0`.
pub fn upper_truncated_mean(x: f64) -> f64 {
    if x < 25.0 {
        (-x * x).exp() / (PI.sqrt() * erf::erfc(x))
    } else {
        let t = 1.0 / (2.0 * x * x);
        x / (1.0 - t + 3.0 * t * t - 15.0 * t * t * t)
    }
}

/// `ln C(n, k)` via log-gamma.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `ln n!` for `n = 0..=max`.
pub fn ln_factorials(max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for n in 1..=max {
        acc += (n as f64).ln();
        out.push(acc);
    }
    out
}

/// Physicists' Gauss-Hermite rule: `∫ exp(-x^2) h(x) dx ≈ Σ w_i h(x_i)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub-Welsch construction from the symmetric Jacobi matrix.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let mut jacobi = DMatrix::<f64>::zeros(order, order);
        for k in 1..order {
            let off = (k as f64 / 2.0).sqrt();
            jacobi[(k - 1, k)] = off;
            jacobi[(k, k - 1)] = off;
        }
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], PI.sqrt() * v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Symmetrize: the rule is exact for odd functions.
        let n = pairs.len();
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let x = 0.5 * (pairs[j].0 - pairs[i].0);
            let w = 0.5 * (pairs[j].1 + pairs[i].1);
            pairs[i] = (-x, w);
            pairs[j] = (x, w);
        }
        if n % 2 == 1 {
            pairs[n / 2].0 = 0.0;
        }
        GaussHermite {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    /// The shared 32-node rule.
    pub fn order32() -> &'static GaussHermite {
        static RULE: OnceLock<GaussHermite> = OnceLock::new();
        RULE.get_or_init(|| GaussHermite::new(32))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_inverse_roundtrip() {
        for &p in &[1e-9, 1e-4, 0.01, 0.25, 0.5, 0.7, 0.99, 1.0 - 1e-7] {
            let x = lower_tail_inv(p);
            assert!((lower_tail(x) - p).abs() < 1e-12 * p.max(1e-3), "p={p}");
        }
        assert_eq!(lower_tail(0.0), 0.5);
    }

    #[test]
    fn truncated_mean_at_zero() {
        assert!((upper_truncated_mean(0.0) - 1.0 / PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn truncated_mean_branches_agree() {
        let below = (-(24.999f64).powi(2)).exp() / (PI.sqrt() * erf::erfc(24.999));
        let above = upper_truncated_mean(25.0);
        assert!((below - above).abs() < 1e-3);
        assert!(upper_truncated_mean(40.0) > 40.0);
    }

    #[test]
    fn gauss_hermite_moments() {
        let gh = GaussHermite::order32();
        let m0: f64 = gh.weights.iter().sum();
        let m2: f64 = gh.nodes.iter().zip(&gh.weights).map(|(x, w)| w * x * x).sum();
        let m4: f64 = gh.nodes.iter().zip(&gh.weights).map(|(x, w)| w * x.powi(4)).sum();
        assert!((m0 - PI.sqrt()).abs() < 1e-12);
        assert!((m2 - PI.sqrt() / 2.0).abs() < 1e-12);
        assert!((m4 - 3.0 * PI.sqrt() / 4.0).abs() < 1e-12);
    }

    #[test]
    fn binomial_logs() {
        assert!((ln_binomial(10, 3) - 120f64.ln()).abs() < 1e-12);
        let table = ln_factorials(5);
        assert!((table[5] - 120f64.ln()).abs() < 1e-12);
    }
}
