//! Clipping reduction factors for Gaussian residuals.
//!
//! With Gaussian data the clipped residual `clip_c(r)` of a model with excess risk `R`
//! only depends on the total risk `P = R + zeta^2/2`, through the normalized clipping
//! level `c' = c / sqrt(2P)`. The descent factor is `erf(c'/sqrt 2)` and the variance
//! factor is `c'^2 erfc(c'/sqrt 2) + F(c')`.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{purpose, StreamKey};

const FRAC_SQRT_2_PI: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

/// Error function, accurate to a few ulp.
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Complementary error function `1 - erf(x)` without cancellation for large `x`.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Descent and variance reduction factors at one clipping level and risk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClippingFactors {
    pub mu: f64,
    pub nu: f64,
}

impl ClippingFactors {
    pub const UNCLIPPED: ClippingFactors = ClippingFactors { mu: 1.0, nu: 1.0 };
}

/// Total risk `P = R + zeta^2/2` from the excess risk.
#[inline]
pub fn total_risk(excess_risk: f64, zeta: f64) -> f64 {
    excess_risk + 0.5 * zeta * zeta
}

/// `F(z) = erf(z/sqrt 2) - sqrt(2/pi) z exp(-z^2/2)`, the truncated second moment of a
/// standard normal on `[-z, z]`.
pub fn truncated_second_moment(z: f64) -> f64 {
    let z = z.abs();
    if z < 0.5 {
        // sqrt(2/pi) * sum_k (-1/2)^k / k! * z^(2k+3) / (2k+3)
        let z2 = z * z;
        let mut term = z2 * z; // (-1/2)^k z^(2k+3) / k!
        let mut acc = 0.0;
        for k in 0..30 {
            let contrib = term / (2 * k + 3) as f64;
            acc += contrib;
            if contrib.abs() < 1e-18 * acc.abs() {
                break;
            }
            term *= -0.5 * z2 / (k + 1) as f64;
        }
        FRAC_SQRT_2_PI * acc
    } else {
        erf(z / std::f64::consts::SQRT_2) - FRAC_SQRT_2_PI * z * (-0.5 * z * z).exp()
    }
}

/// Descent factor in terms of the normalized ratio `c' = c / sqrt(2P)`.
#[inline]
pub fn mu_from_ratio(ratio: f64) -> f64 {
    if ratio.is_infinite() {
        return 1.0;
    }
    erf(ratio / std::f64::consts::SQRT_2)
}

/// Variance factor in terms of the normalized ratio `c' = c / sqrt(2P)`.
#[inline]
pub fn nu_from_ratio(ratio: f64) -> f64 {
    if ratio.is_infinite() {
        return 1.0;
    }
    ratio * ratio * erfc(ratio / std::f64::consts::SQRT_2) + truncated_second_moment(ratio)
}

fn ratio(c: f64, excess_risk: f64, zeta: f64) -> Result<f64> {
    if c.is_nan() || c <= 0.0 {
        return Err(Error::Domain(format!("clipping constant must be > 0, got {c}")));
    }
    if excess_risk.is_nan() || excess_risk < 0.0 || zeta.is_nan() || zeta < 0.0 {
        return Err(Error::Domain(format!(
            "risk and label noise must be >= 0, got R = {excess_risk}, zeta = {zeta}"
        )));
    }
    if c.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let p = total_risk(excess_risk, zeta);
    if p <= 0.0 {
        return Err(Error::DegenerateRisk);
    }
    Ok(c / (2.0 * p).sqrt())
}

/// Descent reduction factor `erf(c / (2 sqrt P))` at excess risk `excess_risk`.
pub fn mu_c(c: f64, excess_risk: f64, zeta: f64) -> Result<f64> {
    ratio(c, excess_risk, zeta).map(mu_from_ratio)
}

/// Variance reduction factor `(c^2/2P) erfc(c/(2 sqrt P)) + F(c/sqrt(2P))`.
pub fn nu_c(c: f64, excess_risk: f64, zeta: f64) -> Result<f64> {
    ratio(c, excess_risk, zeta).map(nu_from_ratio)
}

pub fn clipping_factors(c: f64, excess_risk: f64, zeta: f64) -> Result<ClippingFactors> {
    let r = ratio(c, excess_risk, zeta)?;
    Ok(ClippingFactors {
        mu: mu_from_ratio(r),
        nu: nu_from_ratio(r),
    })
}

/// Monte-Carlo estimate of the two factors with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McClippingEstimate {
    pub factors: ClippingFactors,
    pub mu_se: f64,
    pub nu_se: f64,
    pub samples: usize,
}

/// Direct sampling of `E[clip_c(s g) g] / s` and `E[clip_c(s g)^2] / s^2` with
/// `s = sqrt(2P)` and `g` standard normal. Independent of the closed forms above.
pub fn mc_clipping_oracle(
    c: f64,
    excess_risk: f64,
    zeta: f64,
    samples: usize,
    seed: u64,
) -> Result<McClippingEstimate> {
    if samples < 2 {
        return Err(Error::Domain("Monte-Carlo oracle needs at least 2 samples".into()));
    }
    if c.is_nan() || c <= 0.0 {
        return Err(Error::Domain(format!("clipping constant must be > 0, got {c}")));
    }
    let p = total_risk(excess_risk, zeta);
    if p <= 0.0 {
        return Err(Error::DegenerateRisk);
    }
    let s = (2.0 * p).sqrt();
    let mut rng = StreamKey::new(seed, purpose::MONTE_CARLO).at(0);
    let (mut m1, mut m1sq, mut m2, mut m2sq) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..samples {
        let g: f64 = StandardNormal.sample(&mut rng);
        let r = s * g;
        let clipped = if r.abs() > c { c * r.signum() } else { r };
        let a = clipped * g / s;
        let b = clipped * clipped / (s * s);
        m1 += a;
        m1sq += a * a;
        m2 += b;
        m2sq += b * b;
    }
    let n = samples as f64;
    let (mu, nu) = (m1 / n, m2 / n);
    let var = |_sum: f64, sq: f64, mean: f64| ((sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(McClippingEstimate {
        factors: ClippingFactors { mu, nu },
        mu_se: (var(m1, m1sq, mu) / n).sqrt(),
        nu_se: (var(m2, m2sq, nu) / n).sqrt(),
        samples,
    })
}
