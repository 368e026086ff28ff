use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::{num, write_json};
use crate::dataset::{run_on_dataset, Dataset, DatasetResult, DatasetRunConfig};
use crate::error::{Error, Result};
use crate::numerics::log_grid;
use crate::ode::{integrate, uniform_grid, OdeProblem, RiskCurve, DEFAULT_DT};
use crate::privacy::{accountant_rho, discrete_noise_schedule, zcdp_to_approx_dp, PrivacyBudget};
use crate::scaling::{
    gamma_sweep, optimize_eta0, tune_harmonic, Engine, EtaSearch, Evaluator, HarmonicSearch, ScalingCase,
    SweepResult, SweepSetup,
};
use crate::schedule::Schedule;
use crate::sim::{run_dpgd, RunConfig};
use crate::spectrum::{SpectrumKind, TargetModel};

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be finite and > 0, got {v}")))
    }
}

fn check_nonempty<T>(name: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        Err(Error::Config(format!("{name} must not be empty")))
    } else {
        Ok(())
    }
}

/// `n = round(d / gamma)`, at least 1.
fn samples_for(d: usize, gamma: f64) -> usize {
    ((d as f64 / gamma).round() as usize).max(1)
}

fn isotropic(norm_sq: f64) -> TargetModel {
    TargetModel::Isotropic { norm_sq }
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

// ---------------------------------------------------------------------------------------
// ode-vs-sim

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdeVsSimConfig {
    pub dims: Vec<usize>,
    pub spectra: Vec<SpectrumKind>,
    pub alphas: Vec<f64>,
    pub gamma: f64,
    pub rho: f64,
    pub zeta: f64,
    pub c: f64,
    pub eta0: f64,
    /// `||theta*||^2`, spread evenly over the eigendirections.
    pub target_norm_sq: f64,
    pub trials: usize,
    pub record_grid: usize,
    /// ODE output step.
    pub dt: f64,
}

impl Default for OdeVsSimConfig {
    fn default() -> Self {
        Self {
            dims: vec![10, 100, 1000],
            spectra: vec![SpectrumKind::Identity, SpectrumKind::Uniform02],
            alphas: vec![0.0, 0.5],
            gamma: 0.1,
            rho: 1.0,
            zeta: 0.3,
            c: 1.0,
            eta0: 3.0,
            target_norm_sq: 1.0,
            trials: 10,
            record_grid: 200,
            dt: DEFAULT_DT,
        }
    }
}

impl OdeVsSimConfig {
    fn validate(&self) -> Result<()> {
        check_nonempty("dims", &self.dims)?;
        check_nonempty("spectra", &self.spectra)?;
        check_nonempty("alphas", &self.alphas)?;
        for (name, v) in [("gamma", self.gamma), ("rho", self.rho), ("c", self.c), ("eta0", self.eta0), ("dt", self.dt)] {
            check_positive(name, v)?;
        }
        if self.trials == 0 || self.record_grid == 0 || self.dims.contains(&0) {
            return Err(Error::Config("trials, record_grid and dims must be >= 1".into()));
        }
        Ok(())
    }

    pub fn estimate_ops(&self) -> f64 {
        let per_combo: f64 = self
            .dims
            .iter()
            .map(|&d| (self.trials * samples_for(d, self.gamma) * d) as f64 + d as f64 / self.dt)
            .sum();
        per_combo * (self.spectra.len() * self.alphas.len()) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeVsSimRow {
    pub spectrum: String,
    pub alpha: f64,
    pub d: usize,
    pub n: usize,
    pub gamma: f64,
    /// Mean over trials of `sup_{t<1} |R_sim(t) - R_ode(t)|`.
    pub sup_deviation: f64,
    /// `sup_{t<1} |mean R_sim(t) - R_ode(t)|`.
    pub sup_deviation_of_mean: f64,
    pub ode_final_private_risk: f64,
    pub sim_final_mean: f64,
    pub sim_final_std: f64,
    pub last_jump_mean: f64,
    pub last_jump_predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayPoint {
    pub spectrum: String,
    pub alpha: f64,
    pub d: usize,
    pub t: f64,
    pub r_ode: f64,
    pub r_sim_mean: f64,
    pub r_sim_std: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeVsSimReport {
    pub rows: Vec<OdeVsSimRow>,
    pub overlay: Vec<OverlayPoint>,
    /// `(file stem, curve)` for every ODE solution.
    pub curves: Vec<(String, RiskCurve)>,
}

pub fn run_ode_vs_sim(config: &OdeVsSimConfig, seed: u64) -> Result<OdeVsSimReport> {
    config.validate()?;
    let mut report = OdeVsSimReport { rows: Vec::new(), overlay: Vec::new(), curves: Vec::new() };
    let grid = uniform_grid(config.dt);
    let target = isotropic(config.target_norm_sq);
    for kind in &config.spectra {
        for &alpha in &config.alphas {
            let schedule = Schedule::polynomial(config.eta0, alpha);
            for &d in &config.dims {
                let n = samples_for(d, config.gamma);
                let gamma = d as f64 / n as f64;
                let spectrum = kind.with_dim(d);
                let problem =
                    OdeProblem::from_models(&spectrum, &target, schedule.clone(), config.c, config.rho, gamma, config.zeta)?;
                let curve = integrate(&problem, &grid)?;
                let sim = run_dpgd(&RunConfig {
                    n,
                    spectrum,
                    target,
                    zeta: config.zeta,
                    c: config.c,
                    schedule: schedule.clone(),
                    rho: config.rho,
                    seed,
                    trials: config.trials,
                    record_grid: config.record_grid,
                })?;
                let inside: Vec<usize> = (0..sim.t.len()).filter(|&j| sim.t[j] < 1.0).collect();
                let ode_at: Vec<f64> = sim.t.iter().map(|&t| curve.at(t)).collect();
                let sup_per_trial: Vec<f64> = sim
                    .risks
                    .iter()
                    .map(|r| inside.iter().map(|&j| (r[j] - ode_at[j]).abs()).fold(0.0, f64::max))
                    .collect();
                let sup_deviation = sup_per_trial.iter().sum::<f64>() / sup_per_trial.len() as f64;
                let sup_deviation_of_mean =
                    inside.iter().map(|&j| (sim.mean[j] - ode_at[j]).abs()).fold(0.0, f64::max);
                let jumps: Vec<f64> =
                    sim.final_risks.iter().zip(&sim.penultimate_risks).map(|(a, b)| a - b).collect();
                let label = kind.label();
                report.rows.push(OdeVsSimRow {
                    spectrum: label.clone(),
                    alpha,
                    d,
                    n,
                    gamma,
                    sup_deviation,
                    sup_deviation_of_mean,
                    ode_final_private_risk: curve.final_private_risk,
                    sim_final_mean: sim.final_mean(),
                    sim_final_std: sim.final_std(),
                    last_jump_mean: jumps.iter().sum::<f64>() / jumps.len() as f64,
                    last_jump_predicted: curve.final_private_risk - curve.terminal_risk(),
                });
                for j in 0..sim.t.len() {
                    report.overlay.push(OverlayPoint {
                        spectrum: label.clone(),
                        alpha,
                        d,
                        t: sim.t[j],
                        r_ode: ode_at[j],
                        r_sim_mean: sim.mean[j],
                        r_sim_std: sim.std[j],
                        deviation: (sim.mean[j] - ode_at[j]).abs(),
                    });
                }
                report.curves.push((format!("ode_{label}_a{alpha}_d{d}"), curve));
                info!("{label} alpha={alpha} d={d}: sup deviation {sup_deviation:.4}");
            }
        }
    }
    Ok(report)
}

impl OdeVsSimReport {
    pub fn write(&self, dir: &Path, hash: &str) -> Result<Vec<PathBuf>> {
        let mut files = Vec::new();
        let p = dir.join("overlay.csv");
        let mut w = writer(&p)?;
        w.write_record(["spectrum", "alpha", "d", "t", "R_ode", "R_sim_mean", "R_sim_std", "deviation"])?;
        for o in &self.overlay {
            w.write_record([
                o.spectrum.clone(),
                o.alpha.to_string(),
                o.d.to_string(),
                num(o.t),
                num(o.r_ode),
                num(o.r_sim_mean),
                num(o.r_sim_std),
                num(o.deviation),
            ])?;
        }
        w.flush()?;
        files.push(p);

        let p = dir.join("summary.csv");
        let mut w = writer(&p)?;
        w.write_record([
            "spectrum",
            "alpha",
            "d",
            "n",
            "gamma",
            "sup_deviation",
            "sup_deviation_of_mean",
            "ode_final_private_risk",
            "sim_final_mean",
            "sim_final_std",
            "last_jump_mean",
            "last_jump_predicted",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.spectrum.clone(),
                r.alpha.to_string(),
                r.d.to_string(),
                r.n.to_string(),
                num(r.gamma),
                num(r.sup_deviation),
                num(r.sup_deviation_of_mean),
                num(r.ode_final_private_risk),
                num(r.sim_final_mean),
                num(r.sim_final_std),
                num(r.last_jump_mean),
                num(r.last_jump_predicted),
            ])?;
        }
        w.flush()?;
        files.push(p);

        for (stem, curve) in &self.curves {
            let p = dir.join(format!("{stem}.csv"));
            curve.write_csv(&p)?;
            files.push(p);
            let p = dir.join(format!("{stem}.json"));
            curve.write_sidecar(&p, hash)?;
            files.push(p);
        }
        let v = serde_json::json!({ "config_hash": hash, "rows": self.rows });
        files.push(write_json(&dir.join("summary.json"), &v)?);
        Ok(files)
    }

    pub fn summary(&self) -> String {
        let mut s = String::from("spectrum      alpha  d      sup_dev  final(ode)  final(sim)\n");
        for r in &self.rows {
            s += &format!(
                "{:<13} {:<6} {:<6} {:<8.4} {:<11.4} {:.4}\n",
                r.spectrum, r.alpha, r.d, r.sup_deviation, r.ode_final_private_risk, r.sim_final_mean
            );
        }
        s
    }
}

// ---------------------------------------------------------------------------------------
// heatmap

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatmapEngine {
    /// Mean final risk over simulated trials.
    Simulation,
    /// Deterministic-equivalent final private risk.
    Ode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatmapConfig {
    pub d: usize,
    pub spectrum: SpectrumKind,
    pub gammas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub rho: f64,
    pub zeta: f64,
    pub target_norm_sq: f64,
    /// Log-spaced clipping constants `[lo, hi]`.
    pub c_range: [f64; 2],
    pub c_points: usize,
    /// Log-spaced `eta(0)` values `[lo, hi]`.
    pub eta_range: [f64; 2],
    pub eta_points: usize,
    /// Cell values are capped at this level.
    pub cap: f64,
    pub trials: usize,
    pub engine: HeatmapEngine,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        Self {
            d: 100,
            spectrum: SpectrumKind::Identity,
            gammas: vec![0.01, 0.001],
            alphas: vec![0.0, 0.5],
            rho: 0.1,
            zeta: 0.3,
            target_norm_sq: 1.0,
            c_range: [10f64.powf(-2.5), 10.0],
            c_points: 15,
            eta_range: [10f64.powf(-0.5), 1e3],
            eta_points: 15,
            cap: 1.0,
            trials: 10,
            engine: HeatmapEngine::Simulation,
        }
    }
}

impl HeatmapConfig {
    fn validate(&self) -> Result<()> {
        check_nonempty("gammas", &self.gammas)?;
        check_nonempty("alphas", &self.alphas)?;
        for g in &self.gammas {
            check_positive("gamma", *g)?;
        }
        for v in self.c_range.iter().chain(&self.eta_range) {
            check_positive("grid bound", *v)?;
        }
        check_positive("rho", self.rho)?;
        check_positive("cap", self.cap)?;
        if self.d == 0 || self.trials == 0 || self.c_points == 0 || self.eta_points == 0 {
            return Err(Error::Config("d, trials and grid sizes must be >= 1".into()));
        }
        Ok(())
    }

    fn axis(range: [f64; 2], points: usize) -> Vec<f64> {
        if points == 1 {
            vec![range[0]]
        } else {
            log_grid(range[0], range[1], points)
        }
    }

    pub fn c_values(&self) -> Vec<f64> {
        Self::axis(self.c_range, self.c_points)
    }

    pub fn eta_values(&self) -> Vec<f64> {
        Self::axis(self.eta_range, self.eta_points)
    }

    pub fn estimate_ops(&self) -> f64 {
        let cells = (self.c_points * self.eta_points + 1) as f64 * self.alphas.len() as f64;
        let per: f64 = self
            .gammas
            .iter()
            .map(|&g| match self.engine {
                HeatmapEngine::Simulation => (self.trials * samples_for(self.d, g) * self.d) as f64,
                HeatmapEngine::Ode => self.d as f64 / DEFAULT_DT,
            })
            .sum();
        cells * per
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub c: f64,
    pub eta0: f64,
    /// Capped mean final risk.
    pub risk: f64,
    pub std: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCurves {
    pub c: f64,
    pub eta0: f64,
    /// Value of `c * eta0` on the third curve, `ln(1/gamma)`.
    pub c_times_eta0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapPanel {
    pub gamma: f64,
    pub alpha: f64,
    pub n: usize,
    pub c_values: Vec<f64>,
    pub eta_values: Vec<f64>,
    /// `cells[i][j]` for `eta_values[i]` and `c_values[j]`.
    pub cells: Vec<Vec<HeatmapCell>>,
    pub argmin: HeatmapCell,
    /// The argmin's `eta0` with ten times its clipping constant.
    pub aggressive_check: HeatmapCell,
    pub reference: ReferenceCurves,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapReport {
    pub spectrum: String,
    pub panels: Vec<HeatmapPanel>,
}

fn heatmap_cell(config: &HeatmapConfig, gamma: f64, alpha: f64, c: f64, eta0: f64, seed: u64) -> Result<HeatmapCell> {
    let n = samples_for(config.d, gamma);
    let schedule = Schedule::polynomial(eta0, alpha);
    let spectrum = config.spectrum.with_dim(config.d);
    let target = isotropic(config.target_norm_sq);
    let (risk, std, diverged) = match config.engine {
        HeatmapEngine::Simulation => {
            let run = RunConfig {
                n,
                spectrum,
                target,
                zeta: config.zeta,
                c,
                schedule,
                rho: config.rho,
                seed,
                trials: config.trials,
                record_grid: 1,
            };
            match run_dpgd(&run) {
                Ok(s) => (s.final_mean(), s.final_std(), false),
                Err(Error::Divergence { .. }) => (f64::INFINITY, f64::NAN, true),
                Err(e) => return Err(e),
            }
        }
        HeatmapEngine::Ode => {
            let gamma = config.d as f64 / n as f64;
            let p = OdeProblem::from_models(&spectrum, &target, schedule, c, config.rho, gamma, config.zeta)?;
            match integrate(&p, &uniform_grid(DEFAULT_DT)) {
                Ok(curve) => (curve.final_private_risk, 0.0, false),
                Err(Error::Instability { .. }) => (f64::INFINITY, f64::NAN, true),
                Err(e) => return Err(e),
            }
        }
    };
    let risk = if risk.is_finite() { risk.min(config.cap) } else { config.cap };
    Ok(HeatmapCell { c, eta0, risk, std, diverged })
}

pub fn run_heatmap(config: &HeatmapConfig, seed: u64) -> Result<HeatmapReport> {
    config.validate()?;
    let (cs, etas) = (config.c_values(), config.eta_values());
    let mut panels = Vec::new();
    for &gamma in &config.gammas {
        for &alpha in &config.alphas {
            let mut cells = Vec::with_capacity(etas.len());
            for &eta0 in &etas {
                let row = cs
                    .iter()
                    .map(|&c| heatmap_cell(config, gamma, alpha, c, eta0, seed))
                    .collect::<Result<Vec<_>>>()?;
                cells.push(row);
            }
            let argmin = *cells
                .iter()
                .flatten()
                .min_by(|a, b| a.risk.total_cmp(&b.risk))
                .expect("non-empty grid");
            let aggressive_check = heatmap_cell(config, gamma, alpha, 10.0 * argmin.c, argmin.eta0, seed)?;
            info!("heatmap gamma={gamma} alpha={alpha}: argmin c={:.4} eta0={:.4} risk={:.4}", argmin.c, argmin.eta0, argmin.risk);
            panels.push(HeatmapPanel {
                gamma,
                alpha,
                n: samples_for(config.d, gamma),
                c_values: cs.clone(),
                eta_values: etas.clone(),
                cells,
                argmin,
                aggressive_check,
                reference: ReferenceCurves { c: 1.0, eta0: 2.0 / gamma, c_times_eta0: (1.0 / gamma).ln() },
            });
        }
    }
    Ok(HeatmapReport { spectrum: config.spectrum.label(), panels })
}

impl HeatmapReport {
    pub fn write(&self, dir: &Path, hash: &str) -> Result<Vec<PathBuf>> {
        let mut files = Vec::new();
        for p in &self.panels {
            let path = dir.join(format!("heatmap_{}_g{:e}_a{}.csv", self.spectrum, p.gamma, p.alpha));
            let mut w = writer(&path)?;
            let mut header = vec!["eta0".to_string()];
            header.extend(p.c_values.iter().map(|c| format!("c={}", num(*c))));
            w.write_record(&header)?;
            for (i, row) in p.cells.iter().enumerate() {
                let mut rec = vec![num(p.eta_values[i])];
                rec.extend(row.iter().map(|cell| num(cell.risk)));
                w.write_record(&rec)?;
            }
            w.flush()?;
            files.push(path);
        }
        let path = dir.join("cells.csv");
        let mut w = writer(&path)?;
        w.write_record(["gamma", "alpha", "c", "eta0", "risk", "std", "diverged"])?;
        for p in &self.panels {
            for cell in p.cells.iter().flatten() {
                w.write_record([
                    num(p.gamma),
                    p.alpha.to_string(),
                    num(cell.c),
                    num(cell.eta0),
                    num(cell.risk),
                    num(cell.std),
                    cell.diverged.to_string(),
                ])?;
            }
        }
        w.flush()?;
        files.push(path);
        let panels: Vec<_> = self
            .panels
            .iter()
            .map(|p| {
                serde_json::json!({
                    "gamma": p.gamma,
                    "alpha": p.alpha,
                    "n": p.n,
                    "argmin": p.argmin,
                    "aggressive_check": p.aggressive_check,
                    "reference_curves": p.reference,
                })
            })
            .collect();
        let v = serde_json::json!({ "config_hash": hash, "spectrum": self.spectrum, "panels": panels });
        files.push(write_json(&dir.join("heatmap.json"), &v)?);
        Ok(files)
    }

    pub fn summary(&self) -> String {
        let mut s = String::from("gamma     alpha  c*        eta0*     R*        R(10 c*)\n");
        for p in &self.panels {
            s += &format!(
                "{:<9.3e} {:<6} {:<9.4} {:<9.4} {:<9.4} {:.4}\n",
                p.gamma, p.alpha, p.argmin.c, p.argmin.eta0, p.argmin.risk, p.aggressive_check.risk
            );
        }
        s
    }
}

// ---------------------------------------------------------------------------------------
// schedules-compare

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulesConfig {
    pub d: usize,
    pub spectra: Vec<SpectrumKind>,
    /// Sample sizes; `gamma = d / n`.
    pub ns: Vec<usize>,
    /// Polynomial exponents; must contain 0, which normalizes the table.
    pub alphas: Vec<f64>,
    pub harmonic: bool,
    pub rho: f64,
    pub c: f64,
    pub zeta: f64,
    pub target_norm_sq: f64,
    pub engine: Engine,
    pub search: EtaSearch,
    pub harmonic_points: usize,
    pub harmonic_refine: usize,
}

impl Default for SchedulesConfig {
    fn default() -> Self {
        Self {
            d: 100,
            spectra: vec![SpectrumKind::Identity, SpectrumKind::Uniform02],
            ns: vec![1_000, 10_000, 100_000, 1_000_000],
            alphas: vec![0.0, 0.5, 1.0, 2.0],
            harmonic: true,
            rho: 0.1,
            c: 0.1,
            zeta: 0.3,
            target_norm_sq: 1.0,
            engine: Engine::Volterra,
            search: EtaSearch::default(),
            harmonic_points: 15,
            harmonic_refine: 4,
        }
    }
}

impl SchedulesConfig {
    fn validate(&self) -> Result<()> {
        check_nonempty("ns", &self.ns)?;
        check_nonempty("spectra", &self.spectra)?;
        if !self.alphas.contains(&0.0) {
            return Err(Error::Config("alphas must contain 0 (the normalizing row)".into()));
        }
        check_positive("rho", self.rho)?;
        check_positive("c", self.c)?;
        if self.d == 0 || self.ns.contains(&0) {
            return Err(Error::Config("d and every n must be >= 1".into()));
        }
        Ok(())
    }

    fn evals(&self) -> f64 {
        let poly = self.alphas.len() * (self.search.points + self.search.refine_iters + 2);
        let harm = if self.harmonic {
            self.harmonic_points * self.harmonic_points + 1 + 24 * self.harmonic_refine
        } else {
            0
        };
        (poly + harm) as f64
    }

    pub fn estimate_ops(&self) -> f64 {
        let steps = 1.0 / DEFAULT_DT;
        let per_eval = match self.engine {
            Engine::Volterra => steps * steps,
            Engine::Rk4 => 4.0 * steps * self.d as f64,
        };
        (self.spectra.len() * self.ns.len()) as f64 * self.evals() * per_eval
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulesRow {
    pub spectrum: String,
    pub n: usize,
    pub gamma: f64,
    pub schedule: Schedule,
    pub label: String,
    pub r_star: f64,
    /// `r_star` divided by the `alpha = 0` value at the same `n`.
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulesReport {
    pub rows: Vec<SchedulesRow>,
}

pub fn run_schedules_compare(config: &SchedulesConfig) -> Result<SchedulesReport> {
    config.validate()?;
    let target = isotropic(config.target_norm_sq);
    let mut rows = Vec::new();
    for kind in &config.spectra {
        let spectrum = kind.with_dim(config.d);
        for &n in &config.ns {
            let gamma = config.d as f64 / n as f64;
            let base =
                OdeProblem::from_models(&spectrum, &target, Schedule::constant(1.0), config.c, config.rho, gamma, config.zeta)?;
            let eval = Evaluator::new(&base, config.engine, base.rate_cap());
            let mut block = Vec::new();
            for &alpha in &config.alphas {
                let mut p = base.clone();
                p.schedule = Schedule::polynomial(1.0, alpha);
                let (eta0, r) = optimize_eta0(&p, &eval, &config.search)?;
                block.push((Schedule::polynomial(eta0, alpha), r));
            }
            if config.harmonic {
                let mut search = HarmonicSearch::around(&base);
                search.points = config.harmonic_points;
                search.refine_rounds = config.harmonic_refine;
                let (beta, tau, r) = tune_harmonic(&base, &eval, &search)?;
                block.push((Schedule::harmonic(beta, tau), r));
            }
            let baseline = block
                .iter()
                .find(|(s, _)| matches!(s, Schedule::Constant { .. }))
                .map(|b| b.1)
                .expect("alpha = 0 is present");
            for (schedule, r) in block {
                info!("{} n={n} {}: R* = {r:.4e}", kind.label(), schedule.label());
                rows.push(SchedulesRow {
                    spectrum: kind.label(),
                    n,
                    gamma,
                    label: schedule.label(),
                    schedule,
                    r_star: r,
                    relative: r / baseline,
                });
            }
        }
    }
    Ok(SchedulesReport { rows })
}

impl SchedulesReport {
    pub fn write(&self, dir: &Path, hash: &str) -> Result<Vec<PathBuf>> {
        let p = dir.join("schedules.csv");
        let mut w = writer(&p)?;
        w.write_record(["spectrum", "n", "gamma", "schedule", "eta0", "beta", "tau", "R_star", "relative_to_alpha0"])?;
        for r in &self.rows {
            let (beta, tau) = match r.schedule {
                Schedule::Harmonic { beta, tau } => (num(beta), num(tau)),
                _ => (String::new(), String::new()),
            };
            w.write_record([
                r.spectrum.clone(),
                r.n.to_string(),
                num(r.gamma),
                r.label.clone(),
                num(r.schedule.eta0()),
                beta,
                tau,
                num(r.r_star),
                num(r.relative),
            ])?;
        }
        w.flush()?;
        let v = serde_json::json!({ "config_hash": hash, "rows": self.rows });
        Ok(vec![p, write_json(&dir.join("schedules.json"), &v)?])
    }

    pub fn summary(&self) -> String {
        let mut s = String::from("spectrum      n         schedule    R*          relative\n");
        for r in &self.rows {
            s += &format!("{:<13} {:<9} {:<11} {:<11.4e} {:.4}\n", r.spectrum, r.n, r.label, r.r_star, r.relative);
        }
        s
    }
}

// ---------------------------------------------------------------------------------------
// scaling-law

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingLawConfig {
    pub d: usize,
    pub c: f64,
    pub zeta: f64,
    /// `gamma` grid: `points` log-spaced values in `[lo, hi]`.
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    pub gamma_points: usize,
    pub cases: Vec<ScalingCase>,
    pub engine: Engine,
    pub search: EtaSearch,
    /// Prefactor of the aligned initial energies.
    pub energy_scale: f64,
    /// Allowed `|slope - h|`.
    pub tolerance: f64,
}

impl Default for ScalingLawConfig {
    fn default() -> Self {
        Self {
            d: 100_000,
            c: 0.1,
            zeta: 0.3,
            gamma_lo: 10f64.powf(-3.5),
            gamma_hi: 10f64.powf(-1.5),
            gamma_points: 7,
            cases: vec![ScalingCase { phi: 0.0, psi: 0.0, alpha: 0.0, b: 0.0 }],
            engine: Engine::Volterra,
            search: EtaSearch::default(),
            energy_scale: 1.0,
            tolerance: 0.05,
        }
    }
}

impl ScalingLawConfig {
    fn validate(&self) -> Result<()> {
        check_nonempty("cases", &self.cases)?;
        check_positive("gamma_lo", self.gamma_lo)?;
        check_positive("gamma_hi", self.gamma_hi)?;
        check_positive("energy_scale", self.energy_scale)?;
        if !(self.gamma_lo < self.gamma_hi) || self.gamma_points < 2 || self.d == 0 {
            return Err(Error::Config("need gamma_lo < gamma_hi, gamma_points >= 2 and d >= 1".into()));
        }
        Ok(())
    }

    pub fn gammas(&self) -> Vec<f64> {
        log_grid(self.gamma_lo, self.gamma_hi, self.gamma_points)
    }

    pub fn setup(&self) -> SweepSetup {
        SweepSetup {
            d: self.d,
            c: self.c,
            zeta: self.zeta,
            engine: self.engine,
            search: self.search,
            energy_scale: self.energy_scale,
        }
    }

    pub fn estimate_ops(&self) -> f64 {
        let steps = 1.0 / DEFAULT_DT;
        let evals = (self.search.points + self.search.refine_iters + 2) as f64;
        let per_eval = match self.engine {
            Engine::Volterra => steps * steps,
            Engine::Rk4 => 4.0 * steps * self.d as f64,
        };
        let table = match self.engine {
            Engine::Volterra => 2e3 * self.d as f64,
            Engine::Rk4 => 0.0,
        };
        self.cases.len() as f64 * (self.gamma_points as f64 * evals * per_eval + table)
    }
}

/// Outcome of comparing a fitted slope with the prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeStatus {
    Ok,
    Mismatch,
    /// Outside tolerance in a regime where slow convergence is expected
    /// (`alpha` in {1, 2}, ill-conditioned branch, `d < 10^5`).
    Flagged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeRow {
    pub case: ScalingCase,
    pub branch: u8,
    pub slope: f64,
    pub h: f64,
    /// Predicted slope over the grid (with the log correction where it applies).
    pub h_predicted: f64,
    pub difference: f64,
    pub status: SlopeStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingLawReport {
    pub sweeps: Vec<SweepResult>,
    pub rows: Vec<SlopeRow>,
}

pub fn slope_status(case: &ScalingCase, branch: u8, difference: f64, tolerance: f64, d: usize) -> SlopeStatus {
    if difference.abs() <= tolerance {
        SlopeStatus::Ok
    } else if (case.alpha == 1.0 || case.alpha == 2.0) && branch >= 3 && d < 100_000 {
        SlopeStatus::Flagged
    } else {
        SlopeStatus::Mismatch
    }
}

pub fn run_scaling_law(config: &ScalingLawConfig) -> Result<ScalingLawReport> {
    config.validate()?;
    let gammas = config.gammas();
    let setup = config.setup();
    let mut sweeps = Vec::new();
    let mut rows = Vec::new();
    for case in &config.cases {
        let r = gamma_sweep(case, &setup, &gammas)?;
        let difference = r.slope - r.h_predicted;
        let status = slope_status(case, r.exponents.branch, difference, config.tolerance, config.d);
        if status != SlopeStatus::Ok {
            warn!("case {case:?}: slope {:.4} vs predicted {:.4} ({status:?})", r.slope, r.h_predicted);
        }
        rows.push(SlopeRow {
            case: *case,
            branch: r.exponents.branch,
            slope: r.slope,
            h: r.exponents.h,
            h_predicted: r.h_predicted,
            difference,
            status,
        });
        sweeps.push(r);
    }
    Ok(ScalingLawReport { sweeps, rows })
}

impl ScalingLawReport {
    pub fn write(&self, dir: &Path, hash: &str) -> Result<Vec<PathBuf>> {
        let mut files = Vec::new();
        for (i, s) in self.sweeps.iter().enumerate() {
            let p = dir.join(format!("sweep_{i}.csv"));
            let mut w = writer(&p)?;
            w.write_record(["gamma", "eta0_star", "R_star"])?;
            for j in 0..s.gammas.len() {
                w.write_record([num(s.gammas[j]), num(s.eta0_star[j]), num(s.r_star[j])])?;
            }
            w.flush()?;
            files.push(p);
        }
        let p = dir.join("slopes.csv");
        let mut w = writer(&p)?;
        w.write_record(["sweep", "phi", "psi", "alpha", "b", "branch", "slope", "h", "h_predicted", "difference", "status"])?;
        for (i, r) in self.rows.iter().enumerate() {
            w.write_record([
                i.to_string(),
                r.case.phi.to_string(),
                r.case.psi.to_string(),
                r.case.alpha.to_string(),
                r.case.b.to_string(),
                r.branch.to_string(),
                num(r.slope),
                num(r.h),
                num(r.h_predicted),
                num(r.difference),
                serde_json::to_value(r.status)?.as_str().unwrap_or_default().to_string(),
            ])?;
        }
        w.flush()?;
        files.push(p);
        let sweeps: Vec<_> = self
            .sweeps
            .iter()
            .map(|s| {
                serde_json::json!({
                    "case": s.case,
                    "branch": s.exponents.branch,
                    "slope": s.slope,
                    "intercept": s.intercept,
                    "h_predicted": s.h_predicted,
                    "exponents": s.exponents,
                })
            })
            .collect();
        let v = serde_json::json!({ "config_hash": hash, "sweeps": sweeps, "rows": self.rows });
        files.push(write_json(&dir.join("slopes.json"), &v)?);
        Ok(files)
    }

    pub fn summary(&self) -> String {
        let mut s = String::from("phi   psi   alpha  b     branch  slope   h_pred  status\n");
        for r in &self.rows {
            s += &format!(
                "{:<5} {:<5} {:<6} {:<5} {:<7} {:<7.4} {:<7.4} {:?}\n",
                r.case.phi, r.case.psi, r.case.alpha, r.case.b, r.branch, r.slope, r.h_predicted, r.status
            );
        }
        s
    }
}

// ---------------------------------------------------------------------------------------
// privacy-report

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrivacyReportConfig {
    pub schedule: Schedule,
    pub n: usize,
    pub rho: f64,
    pub deltas: Vec<f64>,
}

impl Default for PrivacyReportConfig {
    fn default() -> Self {
        Self { schedule: Schedule::polynomial(1.0, 0.5), n: 1000, rho: 1.0, deltas: vec![1e-5, 1e-6, 1e-8] }
    }
}

impl PrivacyReportConfig {
    pub fn estimate_ops(&self) -> f64 {
        10.0 * self.n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRow {
    pub delta: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyReport {
    pub budget: PrivacyBudget,
    pub rho_target: f64,
    pub rho_accounted: f64,
    pub epsilons: Vec<EpsilonRow>,
}

pub fn run_privacy_report(config: &PrivacyReportConfig) -> Result<PrivacyReport> {
    check_positive("rho", config.rho)?;
    let budget = discrete_noise_schedule(&config.schedule, config.n, config.rho)?;
    let rho_accounted = accountant_rho(&budget.eta, &budget.sigma)?;
    let epsilons = config
        .deltas
        .iter()
        .map(|&delta| Ok(EpsilonRow { delta, epsilon: zcdp_to_approx_dp(rho_accounted, delta)? }))
        .collect::<Result<Vec<_>>>()?;
    Ok(PrivacyReport { budget, rho_target: config.rho, rho_accounted, epsilons })
}

impl PrivacyReport {
    pub fn write(&self, dir: &Path, hash: &str) -> Result<Vec<PathBuf>> {
        let p = dir.join("sigma.csv");
        let mut w = writer(&p)?;
        w.write_record(["k", "eta", "sigma"])?;
        for k in 0..self.budget.len() {
            w.write_record([(k + 1).to_string(), num(self.budget.eta[k]), num(self.budget.sigma[k])])?;
        }
        w.flush()?;
        let q = dir.join("epsilon.csv");
        let mut w = writer(&q)?;
        w.write_record(["delta", "epsilon"])?;
        for e in &self.epsilons {
            w.write_record([num(e.delta), num(e.epsilon)])?;
        }
        w.flush()?;
        let v = serde_json::json!({
            "config_hash": hash,
            "rho_target": self.rho_target,
            "rho_accounted": self.rho_accounted,
            "relative_error": (self.rho_accounted - self.rho_target).abs() / self.rho_target,
            "epsilons": self.epsilons,
        });
        Ok(vec![p, q, write_json(&dir.join("privacy.json"), &v)?])
    }

    pub fn summary(&self) -> String {
        let nonzero = self.budget.sigma.iter().filter(|s| **s > 0.0).count();
        let mut s = format!(
            "steps {}, noisy steps {nonzero}, rho target {}, rho accounted {:.15}\n",
            self.budget.len(),
            self.rho_target,
            self.rho_accounted
        );
        for e in &self.epsilons {
            s += &format!("delta {:e}: epsilon {:.6}\n", e.delta, e.epsilon);
        }
        s
    }
}

// ---------------------------------------------------------------------------------------
// real-data

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RealDataConfig {
    pub data: Option<PathBuf>,
    pub label_column: String,
    pub split: [f64; 3],
    pub c: f64,
    pub rho: f64,
    pub schedule: Schedule,
    pub trials: usize,
}

impl Default for RealDataConfig {
    fn default() -> Self {
        Self {
            data: None,
            label_column: "y".into(),
            split: [0.6, 0.2, 0.2],
            c: 1.0,
            rho: 1.0,
            schedule: Schedule::polynomial(1.0, 0.5),
            trials: 10,
        }
    }
}

impl RealDataConfig {
    /// Uses the file size as a proxy for `rows * columns`.
    pub fn estimate_ops(&self) -> f64 {
        let bytes = self
            .data
            .as_ref()
            .and_then(|p| std::fs::metadata(p).ok())
            .map_or(0, |m| m.len());
        self.trials as f64 * bytes as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealDataReport {
    pub result: DatasetResult,
}

pub fn run_real_data(config: &RealDataConfig, seed: u64) -> Result<RealDataReport> {
    let path = config
        .data
        .as_ref()
        .ok_or_else(|| Error::Config("real-data needs a data file (set `data` or pass --data)".into()))?;
    let data = Dataset::from_csv(path, &config.label_column)?;
    let result = run_on_dataset(
        &data,
        &DatasetRunConfig {
            c: config.c,
            rho: config.rho,
            schedule: config.schedule.clone(),
            seed,
            trials: config.trials,
            split: config.split,
        },
    )?;
    Ok(RealDataReport { result })
}

impl RealDataReport {
    pub fn write(&self, dir: &Path, hash: &str) -> Result<Vec<PathBuf>> {
        let r = &self.result;
        let p = dir.join("trials.csv");
        let mut w = writer(&p)?;
        w.write_record(["trial", "validation_loss", "diverged"])?;
        for (i, (l, d)) in r.losses.iter().zip(&r.diverged).enumerate() {
            w.write_record([i.to_string(), num(*l), d.to_string()])?;
        }
        w.flush()?;
        let v = serde_json::json!({
            "config_hash": hash,
            "mean": r.mean,
            "std": r.std,
            "final_private_risk": r.mean,
            "zero_model_loss": r.zero_model_loss,
            "diverged_trials": r.diverged.iter().filter(|d| **d).count(),
            "n_train": r.n_train,
            "d": r.d,
            "gamma": r.gamma,
            "dropped_features": r.dropped_features,
        });
        Ok(vec![p, write_json(&dir.join("summary.json"), &v)?])
    }

    pub fn summary(&self) -> String {
        let r = &self.result;
        format!(
            "n_train {}, d {}, gamma {:.4}: validation loss {:.4} +- {:.4} (zero model {:.4}), {} diverged\n",
            r.n_train,
            r.d,
            r.gamma,
            r.mean,
            r.std,
            r.zero_model_loss,
            r.diverged.iter().filter(|d| **d).count()
        )
    }
}
