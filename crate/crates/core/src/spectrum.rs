//! Covariance spectra, target alignment and the kernels of the implicit risk equation.
//!
//! Covariances are represented by their eigenvalues only: Gaussian data and the risk are
//! rotation-equivariant, so every computation works in the eigenbasis.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::pairwise_sum_by;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumKind {
    Identity,
    /// Eigenvalues uniform on `[0, 2]`.
    #[serde(rename = "uniform_0_2")]
    Uniform02,
    /// Density `(1-phi) C^(phi-1) lambda^(-phi)` on `(0, C)`, `C = (2-phi)/(1-phi)`.
    PowerLaw { phi: f64 },
    Explicit { values: Vec<f64> },
}

impl SpectrumKind {
    /// Short name used in file names and CSV columns.
    pub fn label(&self) -> String {
        match self {
            SpectrumKind::Identity => "identity".into(),
            SpectrumKind::Uniform02 => "uniform_0_2".into(),
            SpectrumKind::PowerLaw { phi } => format!("power_law_{phi}"),
            SpectrumKind::Explicit { .. } => "explicit".into(),
        }
    }

    pub fn with_dim(&self, d: usize) -> SpectrumModel {
        SpectrumModel { kind: self.clone(), d }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumModel {
    #[serde(flatten)]
    pub kind: SpectrumKind,
    pub d: usize,
}

impl SpectrumModel {
    pub fn identity(d: usize) -> Self {
        Self { kind: SpectrumKind::Identity, d }
    }

    pub fn uniform(d: usize) -> Self {
        Self { kind: SpectrumKind::Uniform02, d }
    }

    pub fn power_law(phi: f64, d: usize) -> Self {
        Self { kind: SpectrumKind::PowerLaw { phi }, d }
    }

    pub fn explicit(values: Vec<f64>) -> Self {
        let d = values.len();
        Self { kind: SpectrumKind::Explicit { values }, d }
    }

    /// One-column CSV of eigenvalues; a non-numeric first row is treated as a header.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_path(path.as_ref())?;
        let mut values = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            let field = record.get(0).unwrap_or("").trim();
            match field.parse::<f64>() {
                Ok(v) => values.push(v),
                Err(_) if row == 0 => continue,
                Err(_) => {
                    return Err(Error::Ingestion { row, msg: format!("not a number: {field:?}") })
                }
            }
        }
        Ok(Self::explicit(values))
    }

    /// Power-law exponent, when the model has one (`0` for the uniform spectrum).
    pub fn phi(&self) -> Option<f64> {
        match self.kind {
            SpectrumKind::PowerLaw { phi } => Some(phi),
            SpectrumKind::Uniform02 => Some(0.0),
            _ => None,
        }
    }

    /// Eigenvalues in descending order, rescaled so that they sum to `d`.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let d = self.d;
        if d == 0 {
            return Err(Error::Domain("spectrum dimension must be >= 1".into()));
        }
        let midpoint = |i: usize| (i as f64 + 0.5) / d as f64;
        let mut values: Vec<f64> = match &self.kind {
            SpectrumKind::Identity => vec![1.0; d],
            SpectrumKind::Uniform02 => (0..d).rev().map(|i| 2.0 * midpoint(i)).collect(),
            SpectrumKind::PowerLaw { phi } => {
                let phi = *phi;
                if !(phi < 1.0) {
                    return Err(Error::InvalidExponent(phi));
                }
                let scale = (2.0 - phi) / (1.0 - phi);
                let exponent = 1.0 / (1.0 - phi);
                (0..d).rev().map(|i| scale * midpoint(i).powf(exponent)).collect()
            }
            SpectrumKind::Explicit { values } => {
                if values.len() != d {
                    return Err(Error::Domain(format!(
                        "explicit spectrum has {} values but d = {d}",
                        values.len()
                    )));
                }
                if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::Domain("eigenvalues must be finite and > 0".into()));
                }
                let mut v = values.clone();
                v.sort_by(|a, b| b.total_cmp(a));
                v
            }
        };
        let sum = pairwise_sum_by(0, d, |i| values[i]);
        let rescale = d as f64 / sum;
        if rescale != 1.0 {
            values.iter_mut().for_each(|v| *v *= rescale);
        }
        Ok(values)
    }
}

/// How the target vector distributes its energy over the eigendirections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetModel {
    /// `D_i(0) = scale * lambda_i^(-psi)`.
    PowerAligned {
        psi: f64,
        #[serde(default = "unit")]
        scale: f64,
    },
    /// `D_i(0) = norm_sq / 2` for all `i`, i.e. `(theta*_i)^2 = norm_sq / d`.
    Isotropic { norm_sq: f64 },
}

impl TargetModel {
    /// Power-aligned target with unit energy scale.
    pub fn aligned(psi: f64) -> Self {
        TargetModel::PowerAligned { psi, scale: 1.0 }
    }
}

fn unit() -> f64 {
    1.0
}

/// Initial mode energies `D_i(0) = d (omega_i . theta*)^2 / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeEnergies {
    pub d0: Vec<f64>,
    pub psi: f64,
}

impl ModeEnergies {
    /// `(1/d) sum lambda_i D_i(0)`.
    pub fn initial_risk(&self, lambda: &[f64]) -> f64 {
        let d = lambda.len();
        pairwise_sum_by(0, d, |i| lambda[i] * self.d0[i]) / d as f64
    }

    /// Target coordinates in the eigenbasis, `theta*_i = sqrt(2 D_i(0) / d)` (all positive).
    pub fn target(&self) -> Vec<f64> {
        let d = self.d0.len() as f64;
        self.d0.iter().map(|e| (2.0 * e / d).sqrt()).collect()
    }
}

/// Mode energies for `target` on eigenvalues `lambda`. `phi` (when the spectrum is a
/// power law) bounds the admissible alignment exponent: `psi < 1 - phi`.
pub fn mode_energies(lambda: &[f64], target: &TargetModel, phi: Option<f64>) -> Result<ModeEnergies> {
    match *target {
        TargetModel::PowerAligned { psi, scale } => {
            if !(scale.is_finite() && scale > 0.0) {
                return Err(Error::Domain(format!("energy scale must be > 0, got {scale}")));
            }
            if let Some(phi) = phi {
                if !(psi < 1.0 - phi) {
                    return Err(Error::AlignmentExponent { psi, bound: 1.0 - phi });
                }
            }
            let d0 = lambda.iter().map(|l| scale * l.powf(-psi)).collect();
            Ok(ModeEnergies { d0, psi })
        }
        TargetModel::Isotropic { norm_sq } => {
            if !(norm_sq.is_finite() && norm_sq > 0.0) {
                return Err(Error::Domain(format!("target norm must be > 0, got {norm_sq}")));
            }
            Ok(ModeEnergies { d0: vec![0.5 * norm_sq; lambda.len()], psi: 0.0 })
        }
    }
}

/// Values of the three kernels at one argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernels {
    /// `(1/d) sum D_i(0) lambda_i exp(-2 lambda_i x)`
    pub f: f64,
    /// `(1/d) sum lambda_i^2 exp(-2 lambda_i x)`
    pub k: f64,
    /// `(1/d) sum lambda_i exp(-2 lambda_i x)`
    pub j: f64,
}

pub fn kernels(lambda: &[f64], d0: &[f64], x: f64) -> Result<Kernels> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("kernel argument must be >= 0, got {x}")));
    }
    let d = lambda.len();
    let w = |i: usize| lambda[i] * (-2.0 * lambda[i] * x).exp();
    let df = d as f64;
    Ok(Kernels {
        f: pairwise_sum_by(0, d, |i| d0[i] * w(i)) / df,
        k: pairwise_sum_by(0, d, |i| lambda[i] * w(i)) / df,
        j: pairwise_sum_by(0, d, w) / df,
    })
}
