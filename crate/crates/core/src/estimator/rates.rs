//! Rate-exponent planning utilities: the one-state latent-pushforward
//! exponent, the anisotropic conditioning exponent, and the resolution
//! schedule that balances them.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatePlan {
    /// One-state exponent: min{(beta+1)/(2 beta + d_u), 1/2}.
    pub a: f64,
    /// Effective anisotropic dimension: sum of 1/alpha_j.
    pub effective_dim: f64,
    /// Combined exponent: (1/a + effective_dim)^-1.
    pub r_aniso: f64,
    alphas: Vec<f64>,
}

pub fn rate_exponents(beta: f64, d_u: usize, alphas: &[f64]) -> RatePlan {
    assert!(beta > 0.0 && d_u >= 1, "beta > 0 and d_u >= 1 required");
    assert!(
        alphas.iter().all(|&a| a > 0.0 && a <= 1.0),
        "alphas must lie in (0,1]"
    );
    let a = ((beta + 1.0) / (2.0 * beta + d_u as f64)).min(0.5);
    let effective_dim: f64 = alphas.iter().map(|&x| 1.0 / x).sum();
    RatePlan {
        a,
        effective_dim,
        r_aniso: 1.0 / (1.0 / a + effective_dim),
        alphas: alphas.to_vec(),
    }
}

impl RatePlan {
    /// Per-coordinate dyadic depths at sample size `n` under overlap
    /// `kappa`: floor(l_n / alpha_j) with l_n = a log2(kappa n) /
    /// (1 + a sum_j 1/alpha_j).
    pub fn resolution_schedule(&self, kappa: f64, n: usize) -> Vec<u32> {
        let ln = self.level(kappa, n);
        self.alphas
            .iter()
            .map(|&alpha| (ln / alpha).floor().max(0.0) as u32)
            .collect()
    }

    pub fn level(&self, kappa: f64, n: usize) -> f64 {
        let eff = (kappa * n as f64).max(1.0);
        (self.a * eff.log2() / (1.0 + self.a * self.effective_dim)).max(0.0)
    }
}
