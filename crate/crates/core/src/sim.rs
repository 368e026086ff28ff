//! One-pass DP-GD with per-sample clipping, adaptive step cap and Gaussian noise, on
//! synthetic Gaussian data generated on the fly in the covariance eigenbasis.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::mean_std;
use crate::ode::final_private_risk;
use crate::privacy::discrete_noise_schedule;
use crate::rng::{purpose, StreamKey};
use crate::schedule::Schedule;
use crate::spectrum::{mode_energies, SpectrumModel, TargetModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Number of samples, i.e. of steps.
    pub n: usize,
    pub spectrum: SpectrumModel,
    pub target: TargetModel,
    pub zeta: f64,
    /// Dimension-free clipping constant; the gradient norm cap is `c sqrt(d)`.
    pub c: f64,
    pub schedule: Schedule,
    pub rho: f64,
    pub seed: u64,
    pub trials: usize,
    /// Number of equispaced recording intervals.
    pub record_grid: usize,
}

impl RunConfig {
    pub fn d(&self) -> usize {
        self.spectrum.d
    }

    /// `d/n`.
    pub fn gamma(&self) -> f64 {
        self.d() as f64 / self.n as f64
    }

    fn validate(&self) -> Result<()> {
        if self.d() == 0 || self.trials == 0 || self.record_grid == 0 {
            return Err(Error::Config("d, trials and record_grid must be >= 1".into()));
        }
        if !(self.c > 0.0) || !(self.rho > 0.0) || !(self.zeta >= 0.0) {
            return Err(Error::Domain("need c > 0, rho > 0 and zeta >= 0".into()));
        }
        Ok(())
    }
}

/// Per-step quantities exposed for invariant checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub grad_norm: f64,
    pub clipped_norm: f64,
    pub x_norm_sq: f64,
    pub eta: f64,
    pub eta_bar: f64,
    /// Norm of the injected Gaussian noise (zero when the step adds none).
    pub noise_norm: f64,
    pub sigma: f64,
}

/// One DP-GD update of `theta` on sample `(x, y)`. `noise` is drawn only when
/// `sigma > 0`.
#[allow(clippy::too_many_arguments)]
pub fn dpgd_update(
    theta: &mut [f64],
    x: &[f64],
    y: f64,
    eta: f64,
    sigma: f64,
    c_clip: f64,
    rng: &mut ChaCha8Rng,
) -> StepDiagnostics {
    let mut pred = 0.0;
    let mut xsq = 0.0;
    for (t, xi) in theta.iter().zip(x) {
        pred += t * xi;
        xsq += xi * xi;
    }
    let resid = pred - y;
    let grad_norm = resid.abs() * xsq.sqrt();
    let scale = if grad_norm > c_clip { c_clip / grad_norm } else { 1.0 };
    let eta_bar = if xsq > 0.0 { eta.min(2.0 / xsq) } else { eta };
    let coef = eta_bar * resid * scale;
    for (t, xi) in theta.iter_mut().zip(x) {
        *t -= coef * xi;
    }
    let mut noise_sq = 0.0;
    if sigma > 0.0 {
        let amp = 2.0 * c_clip * sigma;
        for t in theta.iter_mut() {
            let b: f64 = StandardNormal.sample(rng);
            let v = amp * b;
            noise_sq += v * v;
            *t += v;
        }
    }
    StepDiagnostics {
        grad_norm,
        clipped_norm: grad_norm * scale,
        x_norm_sq: xsq,
        eta,
        eta_bar,
        noise_norm: noise_sq.sqrt(),
        sigma,
    }
}

/// Resolved per-run data shared by all trials.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub sqrt_lambda: Vec<f64>,
    pub lambda: Vec<f64>,
    pub theta_star: Vec<f64>,
    pub eta: Vec<f64>,
    pub sigma: Vec<f64>,
    pub c_clip: f64,
    pub zeta: f64,
    pub seed: u64,
}

impl Prepared {
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let lambda = config.spectrum.eigenvalues()?;
        let energies = mode_energies(&lambda, &config.target, config.spectrum.phi())?;
        let (eta, sigma) = if config.n == 0 {
            (vec![], vec![])
        } else {
            let budget = discrete_noise_schedule(&config.schedule, config.n, config.rho)?;
            (budget.eta, budget.sigma)
        };
        Ok(Self {
            sqrt_lambda: lambda.iter().map(|l| l.sqrt()).collect(),
            theta_star: energies.target(),
            lambda,
            eta,
            sigma,
            c_clip: config.c * (config.d() as f64).sqrt(),
            zeta: config.zeta,
            seed: config.seed,
        })
    }

    /// `(1/2) sum lambda_i (theta_i - theta*_i)^2`.
    pub fn risk(&self, theta: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..theta.len() {
            let e = theta[i] - self.theta_star[i];
            acc += self.lambda[i] * e * e;
        }
        0.5 * acc
    }
}

/// A single trial, advanced one sample at a time.
pub struct Trial<'a> {
    prep: &'a Prepared,
    key: StreamKey,
    pub theta: Vec<f64>,
    x: Vec<f64>,
    /// Number of completed steps.
    pub step: usize,
}

impl<'a> Trial<'a> {
    pub fn new(prep: &'a Prepared, trial: u64) -> Self {
        let d = prep.lambda.len();
        Self {
            prep,
            key: StreamKey::new(prep.seed, purpose::TRIAL | trial),
            theta: vec![0.0; d],
            x: vec![0.0; d],
            step: 0,
        }
    }

    pub fn risk(&self) -> f64 {
        self.prep.risk(&self.theta)
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.prep.eta.len()
    }

    /// Draws a fresh sample and applies one update.
    pub fn advance(&mut self) -> Result<StepDiagnostics> {
        let k = self.step;
        let prep = self.prep;
        let mut rng = self.key.at(k as u64);
        let mut y = 0.0;
        for i in 0..self.x.len() {
            let z: f64 = StandardNormal.sample(&mut rng);
            self.x[i] = prep.sqrt_lambda[i] * z;
            y += self.x[i] * prep.theta_star[i];
        }
        if prep.zeta > 0.0 {
            let w: f64 = StandardNormal.sample(&mut rng);
            y += prep.zeta * w;
        }
        let diag = dpgd_update(&mut self.theta, &self.x, y, prep.eta[k], prep.sigma[k], prep.c_clip, &mut rng);
        self.step += 1;
        if self.theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Divergence { step: self.step });
        }
        Ok(diag)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    /// Recorded step indices `floor(j n / G)`.
    pub steps: Vec<usize>,
    /// `steps / n`.
    pub t: Vec<f64>,
    /// `risks[trial][j]`.
    pub risks: Vec<Vec<f64>>,
    /// Risk of the last iterate per trial.
    pub final_risks: Vec<f64>,
    /// Risk of the second to last iterate per trial.
    pub penultimate_risks: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl TrajectoryStats {
    pub fn final_mean(&self) -> f64 {
        mean_std(&self.final_risks).0
    }

    pub fn final_std(&self) -> f64 {
        mean_std(&self.final_risks).1
    }
}

fn record_steps(n: usize, g: usize) -> Vec<usize> {
    let mut steps: Vec<usize> = (0..=g).map(|j| j * n / g).collect();
    steps.dedup();
    steps
}

/// Runs `config.trials` independent trials of DP-GD.
pub fn run_dpgd(config: &RunConfig) -> Result<TrajectoryStats> {
    let prep = Prepared::new(config)?;
    let n = config.n;
    let steps = record_steps(n, config.record_grid);
    let mut risks = Vec::with_capacity(config.trials);
    let mut finals = Vec::with_capacity(config.trials);
    let mut penult = Vec::with_capacity(config.trials);
    for trial in 0..config.trials {
        let mut run = Trial::new(&prep, trial as u64);
        let mut rec = Vec::with_capacity(steps.len());
        let mut before_last = run.risk();
        for &target in &steps {
            while run.step < target {
                if run.step + 1 == n {
                    before_last = run.risk();
                }
                run.advance()?;
            }
            rec.push(run.risk());
        }
        finals.push(*rec.last().unwrap());
        penult.push(before_last);
        risks.push(rec);
    }
    let g = steps.len();
    let (mut mean, mut std) = (Vec::with_capacity(g), Vec::with_capacity(g));
    for j in 0..g {
        let col: Vec<f64> = risks.iter().map(|r| r[j]).collect();
        let (m, s) = mean_std(&col);
        mean.push(m);
        std.push(s);
    }
    Ok(TrajectoryStats {
        t: steps.iter().map(|&k| if n == 0 { 0.0 } else { k as f64 / n as f64 }).collect(),
        steps,
        risks,
        final_risks: finals,
        penultimate_risks: penult,
        mean,
        std,
    })
}

/// Mean change of the risk in the very last step, and the predicted size of the jump
/// `2 c^2 eta(1)^2 gamma^2 / rho^2`.
pub fn last_step_jump(config: &RunConfig) -> Result<(f64, f64)> {
    if config.n == 0 {
        return Err(Error::Config("last-step jump needs n >= 1".into()));
    }
    let stats = run_dpgd(config)?;
    let jumps: Vec<f64> = stats
        .final_risks
        .iter()
        .zip(&stats.penultimate_risks)
        .map(|(a, b)| a - b)
        .collect();
    let predicted = final_private_risk(0.0, &config.schedule, config.c, config.gamma(), config.rho);
    Ok((mean_std(&jumps).0, predicted))
}

/// Fisher-Yates permutation of `0..n` from a dedicated stream.
pub fn permutation(n: usize, seed: u64, stream: u64) -> Vec<usize> {
    let mut rng = StreamKey::new(seed, stream).at(0);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx
}
