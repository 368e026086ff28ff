//! zCDP accounting for one-pass DP-GD.
//!
//! A run with step sizes `eta_k` and noise multipliers `sigma_k` is `(rho^2/2)`-zCDP with
//! `rho = max_k eta_k / sqrt(sum_{j >= k} sigma_j^2)`. For a target `rho` the least total
//! noise is obtained with `rho^2 sigma_k^2 = eta_k^2 - eta_{k+1}^2` and
//! `rho^2 sigma_n^2 = eta_n^2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::Schedule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    /// The run is `(rho^2/2)`-zCDP.
    pub rho: f64,
    /// Step sizes `eta_k`, `k = 1..=n`.
    pub eta: Vec<f64>,
    /// Noise multipliers `sigma_k`, `k = 1..=n`.
    pub sigma: Vec<f64>,
}

impl PrivacyBudget {
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// Sum of all noise variances.
    pub fn total_noise(&self) -> f64 {
        self.sigma.iter().map(|s| s * s).sum()
    }
}

/// Minimal-noise multipliers for `schedule` over `n` steps at target `rho`.
pub fn discrete_noise_schedule(schedule: &Schedule, n: usize, rho: f64) -> Result<PrivacyBudget> {
    if n == 0 {
        return Err(Error::Domain("noise schedule needs n >= 1".into()));
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::Domain(format!("rho must be finite and > 0, got {rho}")));
    }
    schedule.validate()?;
    let eta = schedule.step_sizes(n);
    noise_for_steps(&eta, rho)
}

/// Minimal-noise multipliers for explicit step sizes.
pub fn noise_for_steps(eta: &[f64], rho: f64) -> Result<PrivacyBudget> {
    let n = eta.len();
    let mut sigma = Vec::with_capacity(n);
    for k in 0..n {
        let here = eta[k] * eta[k];
        let next = if k + 1 < n { eta[k + 1] * eta[k + 1] } else { 0.0 };
        let mut diff = here - next;
        if diff < 0.0 {
            if -diff > 1e-14 * next {
                return Err(Error::NegativeVariance { step: k + 1, next: k + 2 });
            }
            diff = 0.0;
        }
        sigma.push(diff.sqrt() / rho);
    }
    Ok(PrivacyBudget { rho, eta: eta.to_vec(), sigma })
}

/// zCDP parameter `rho` of a run with step sizes `eta` and noise multipliers `sigma`.
pub fn accountant_rho(eta: &[f64], sigma: &[f64]) -> Result<f64> {
    if eta.len() != sigma.len() {
        return Err(Error::Domain(format!(
            "eta and sigma lengths differ ({} vs {})",
            eta.len(),
            sigma.len()
        )));
    }
    let mut suffix = 0.0;
    let mut rho: f64 = 0.0;
    for k in (0..eta.len()).rev() {
        suffix += sigma[k] * sigma[k];
        if eta[k] > 0.0 {
            if suffix <= 0.0 {
                return Err(Error::InfinitePrivacyLoss { step: k + 1 });
            }
            rho = rho.max(eta[k] / suffix.sqrt());
        }
    }
    Ok(rho)
}

/// `epsilon` such that a `(rho^2/2)`-zCDP mechanism is `(epsilon, delta)`-DP:
/// `rho^2/2 + rho sqrt(2 ln(1/delta))`.
pub fn zcdp_to_approx_dp(rho: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(rho >= 0.0) {
        return Err(Error::Domain(format!("rho must be >= 0, got {rho}")));
    }
    Ok(0.5 * rho * rho + rho * (2.0 * (1.0 / delta).ln()).sqrt())
}
