use super::*;
use crate::scaling::{EtaSearch, ScalingCase};
use crate::spectrum::SpectrumKind;

/// Names accepted by [`preset`].
pub const PRESETS: &[&str] = &[
    "fig1",
    "smoke",
    "fig6",
    "heatmap-smoke",
    "fig5",
    "schedules-smoke",
    "fig3",
    "fig4",
    "scaling-smoke",
    "privacy",
    "real-data",
];

fn case(phi: f64, psi: f64, alpha: f64, b: f64) -> ScalingCase {
    ScalingCase { phi, psi, alpha, b }
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let e = match name {
        "fig1" => Experiment::OdeVsSim(OdeVsSimConfig::default()),
        "smoke" => Experiment::OdeVsSim(OdeVsSimConfig { dims: vec![10], trials: 2, ..Default::default() }),
        "fig6" => Experiment::Heatmap(HeatmapConfig::default()),
        "heatmap-smoke" => Experiment::Heatmap(HeatmapConfig {
            d: 10,
            gammas: vec![0.1],
            alphas: vec![0.0],
            c_range: [0.1, 1.0],
            c_points: 2,
            eta_range: [1.0, 10.0],
            eta_points: 2,
            trials: 2,
            ..Default::default()
        }),
        "fig5" => Experiment::SchedulesCompare(SchedulesConfig::default()),
        "schedules-smoke" => Experiment::SchedulesCompare(SchedulesConfig {
            d: 10,
            spectra: vec![SpectrumKind::Identity],
            ns: vec![100],
            search: EtaSearch { points: 8, refine_iters: 4, ..Default::default() },
            harmonic_points: 4,
            harmonic_refine: 1,
            ..Default::default()
        }),
        "fig3" => {
            let mut cases = Vec::new();
            for (phi, psi) in [(0.0, 0.0), (0.25, 0.5)] {
                for b in [0.0, 0.5] {
                    for alpha in [0.0, 0.5, 1.0, 2.0] {
                        cases.push(case(phi, psi, alpha, b));
                    }
                }
            }
            Experiment::ScalingLaw(ScalingLawConfig { cases, ..Default::default() })
        }
        "fig4" => {
            let mut cases = Vec::new();
            for (phi, psi) in [(0.7, 0.0), (0.7, 0.1), (0.8, 0.0), (0.8, 0.1)] {
                for alpha in 1..=10 {
                    cases.push(case(phi, psi, alpha as f64, 0.5));
                }
            }
            Experiment::ScalingLaw(ScalingLawConfig { d: 10_000, cases, tolerance: 0.07, ..Default::default() })
        }
        "scaling-smoke" => Experiment::ScalingLaw(ScalingLawConfig {
            d: 200,
            gamma_lo: 1e-2,
            gamma_hi: 1e-1,
            gamma_points: 3,
            search: EtaSearch { points: 8, refine_iters: 4, ..Default::default() },
            ..Default::default()
        }),
        "privacy" => Experiment::PrivacyReport(PrivacyReportConfig::default()),
        "real-data" => Experiment::RealData(RealDataConfig::default()),
        other => {
            return Err(Error::Config(format!("unknown preset {other:?}; available: {}", PRESETS.join(", "))))
        }
    };
    Ok(ExperimentConfig::new(e))
}
