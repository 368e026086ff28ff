//! Continuous learning-rate profiles on `[0, 1]`.
//!
//! The discrete step size at iteration `k` of a run with `n` samples is
//! `eta_k = eta(k / n) / n`. The noise rate `-d(eta^2)/dt` drives the private-noise term
//! of the deterministic-equivalent dynamics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Schedule {
    /// `eta(t) = eta0`.
    Constant { eta0: f64 },
    /// `eta(t) = eta0 (1 - t)^alpha`.
    Polynomial { eta0: f64, alpha: f64 },
    /// `eta(t) = beta / (t + tau)`.
    Harmonic { beta: f64, tau: f64 },
    /// `eta(t) = eta0 * sqrt(p(t))` where `p` interpolates `profile[j]^2` linearly on the
    /// uniform grid `t_j = j / (len - 1)`. `profile[0]` is normally 1.
    Table { eta0: f64, profile: Vec<f64> },
}

impl Schedule {
    pub fn constant(eta0: f64) -> Self {
        Schedule::Constant { eta0 }
    }

    pub fn polynomial(eta0: f64, alpha: f64) -> Self {
        if alpha == 0.0 {
            Schedule::Constant { eta0 }
        } else {
            Schedule::Polynomial { eta0, alpha }
        }
    }

    pub fn harmonic(beta: f64, tau: f64) -> Self {
        Schedule::Harmonic { beta, tau }
    }

    /// Checks parameters and monotonicity. Exponents that the theory does not cover
    /// (`0 < alpha < 1/2`, `1/2 < alpha < 1`) are accepted with a warning.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        match self {
            Schedule::Constant { eta0 } => positive("eta0", *eta0),
            Schedule::Polynomial { eta0, alpha } => {
                positive("eta0", *eta0)?;
                if !(alpha.is_finite() && *alpha >= 0.0) {
                    return Err(Error::Domain(format!("alpha must be >= 0, got {alpha}")));
                }
                if (*alpha > 0.0 && *alpha < 0.5) || (*alpha > 0.5 && *alpha < 1.0) {
                    log::warn!("alpha = {alpha} is outside the range covered by the rate theory");
                }
                Ok(())
            }
            Schedule::Harmonic { beta, tau } => {
                positive("beta", *beta)?;
                positive("tau", *tau)
            }
            Schedule::Table { eta0, profile } => {
                positive("eta0", *eta0)?;
                if profile.len() < 2 {
                    return Err(Error::Domain("table schedule needs at least 2 samples".into()));
                }
                if profile.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::Domain("table samples must be finite and >= 0".into()));
                }
                if let Some(j) = profile.windows(2).position(|w| w[1] > w[0]) {
                    return Err(Error::NegativeVariance { step: j, next: j + 1 });
                }
                Ok(())
            }
        }
    }

    /// `eta(0)`, the scale of the profile.
    pub fn eta0(&self) -> f64 {
        match self {
            Schedule::Constant { eta0 } | Schedule::Polynomial { eta0, .. } => *eta0,
            Schedule::Harmonic { beta, tau } => beta / tau,
            Schedule::Table { eta0, profile } => eta0 * profile[0],
        }
    }

    /// Same shape rescaled so that `eta(0) = eta0`.
    pub fn with_eta0(&self, eta0: f64) -> Self {
        match self {
            Schedule::Constant { .. } => Schedule::Constant { eta0 },
            Schedule::Polynomial { alpha, .. } => Schedule::Polynomial { eta0, alpha: *alpha },
            Schedule::Harmonic { tau, .. } => Schedule::Harmonic { beta: eta0 * tau, tau: *tau },
            Schedule::Table { profile, .. } => Schedule::Table {
                eta0: eta0 / profile[0],
                profile: profile.clone(),
            },
        }
    }

    fn check_t(t: f64) -> Result<()> {
        if (0.0..=1.0).contains(&t) {
            Ok(())
        } else {
            Err(Error::Domain(format!("time must lie in [0, 1], got {t}")))
        }
    }

    /// `eta(t)`; errors outside `[0, 1]`.
    pub fn eta_tilde(&self, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        Ok(self.eta_at(t))
    }

    /// `eta(t)` without the domain check (callers guarantee `t` in `[0, 1]`).
    #[inline]
    pub fn eta_at(&self, t: f64) -> f64 {
        match self {
            Schedule::Constant { eta0 } => *eta0,
            Schedule::Polynomial { eta0, alpha } => eta0 * (1.0 - t).max(0.0).powf(*alpha),
            Schedule::Harmonic { beta, tau } => beta / (t + tau),
            Schedule::Table { .. } => self.eta_sq_at(t).sqrt(),
        }
    }

    /// `eta(t)^2`.
    #[inline]
    pub fn eta_sq_at(&self, t: f64) -> f64 {
        match self {
            Schedule::Table { eta0, profile } => {
                let (j, w) = table_cell(profile.len(), t);
                let a = profile[j] * profile[j];
                let b = profile[j + 1] * profile[j + 1];
                eta0 * eta0 * (a + w * (b - a))
            }
            _ => {
                let e = self.eta_at(t);
                e * e
            }
        }
    }

    /// Noise rate `-d(eta^2)/dt` on `[0, 1)`; at `t = 1` the left limit is returned
    /// (infinite for polynomial exponents below 1/2).
    pub fn noise_rate(&self, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        Ok(self.noise_rate_at(t))
    }

    #[inline]
    pub fn noise_rate_at(&self, t: f64) -> f64 {
        match self {
            Schedule::Constant { .. } => 0.0,
            Schedule::Polynomial { alpha, .. } if *alpha == 0.0 => 0.0,
            Schedule::Polynomial { eta0, alpha } => {
                // d/dt [eta0^2 (1-t)^(2 alpha)] = -2 alpha eta0^2 (1-t)^(2 alpha - 1)
                let e = 2.0 * alpha - 1.0;
                let base = (1.0 - t).max(0.0);
                let pow = if e == 0.0 { 1.0 } else { base.powf(e) };
                2.0 * alpha * eta0 * eta0 * pow
            }
            Schedule::Harmonic { beta, tau } => {
                let s = t + tau;
                2.0 * beta * beta / (s * s * s)
            }
            Schedule::Table { eta0, profile } => {
                let m = profile.len() - 1;
                let (j, _) = table_cell(profile.len(), t);
                let a = profile[j] * profile[j];
                let b = profile[j + 1] * profile[j + 1];
                eta0 * eta0 * (a - b) * m as f64
            }
        }
    }

    /// First time in `(0, 1)` at which `eta(t)` falls to `level`, if `eta(0) > level`
    /// and the crossing happens strictly inside the interval.
    pub fn crossing_time(&self, level: f64) -> Option<f64> {
        if !(self.eta_at(0.0) > level) || !(self.eta_at(1.0) < level) {
            return None;
        }
        let t = match self {
            Schedule::Constant { .. } => return None,
            Schedule::Polynomial { eta0, alpha } => 1.0 - (level / eta0).powf(1.0 / alpha),
            Schedule::Harmonic { beta, tau } => beta / level - tau,
            Schedule::Table { .. } => {
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if self.eta_at(mid) > level {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        };
        (t > 0.0 && t < 1.0).then_some(t)
    }

    /// Discrete step sizes `eta_k = eta(k/n)/n` for `k = 1..=n`.
    pub fn step_sizes(&self, n: usize) -> Vec<f64> {
        let nf = n as f64;
        (1..=n).map(|k| self.eta_at(k as f64 / nf) / nf).collect()
    }

    /// Short human-readable label, used in CSV outputs.
    pub fn label(&self) -> String {
        match self {
            Schedule::Constant { .. } => "alpha=0".into(),
            Schedule::Polynomial { alpha, .. } => format!("alpha={alpha}"),
            Schedule::Harmonic { .. } => "harmonic".into(),
            Schedule::Table { .. } => "table".into(),
        }
    }
}

fn table_cell(len: usize, t: f64) -> (usize, f64) {
    let m = len - 1;
    let x = t.clamp(0.0, 1.0) * m as f64;
    let j = (x.floor() as usize).min(m - 1);
    (j, x - j as f64)
}
