//! Scaling-law exponents of the optimally tuned final risk, hyper-parameter search over
//! the step-size scale and the harmonic schedule, and log-log slope fits.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{golden_section, linear_fit, log_grid};
use crate::ode::{integrate, integrate_volterra, refined_grid, OdeProblem, SpectralKernels, DEFAULT_DT};
use crate::schedule::Schedule;
use crate::spectrum::{SpectrumModel, TargetModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingCase {
    pub phi: f64,
    pub psi: f64,
    pub alpha: f64,
    /// Privacy level exponent, `rho = gamma^b`.
    pub b: f64,
}

impl ScalingCase {
    /// `K = (2 - phi - psi)(alpha + 1)`.
    pub fn k(&self) -> f64 {
        (2.0 - self.phi - self.psi) * (self.alpha + 1.0)
    }

    fn check(&self) -> Result<()> {
        let ScalingCase { phi, psi, alpha, b } = *self;
        let bad = |why: &str| Err(Error::OutOfTheory(format!("{why} ({self:?})")));
        if !(phi < 1.0) {
            return bad("need phi < 1");
        }
        if !(psi < 1.0 - phi) {
            return bad("need psi < 1 - phi");
        }
        if !(b < 1.0) {
            return bad("need b < 1");
        }
        if !(alpha == 0.0 || alpha == 0.5 || alpha >= 1.0) {
            return bad("alpha must be 0, 1/2 or >= 1");
        }
        Ok(())
    }
}

/// Predicted exponents: `c eta(0) = gamma^a` and final risk `~ gamma^h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub a: f64,
    pub h: f64,
    /// Which of the four branches fired (1 to 4).
    pub branch: u8,
    /// True when `phi (alpha + 1) = 2` and the fourth branch fired, so that
    /// `ln(a ln gamma) / ln gamma` is added to `h` at finite `gamma`.
    pub log_correction: bool,
}

impl Exponents {
    /// `h` including the log correction at a given `gamma`.
    pub fn h_at(&self, gamma: f64) -> f64 {
        if self.log_correction {
            let lg = gamma.ln();
            self.h + (self.a * lg).ln() / lg
        } else {
            self.h
        }
    }

    /// Slope a least-squares fit would find on exact data `gamma^h_at(gamma)` over `gammas`.
    pub fn effective_slope(&self, gammas: &[f64]) -> f64 {
        if !self.log_correction {
            return self.h;
        }
        let x: Vec<f64> = gammas.iter().map(|g| g.ln()).collect();
        let y: Vec<f64> = gammas.iter().map(|g| self.h_at(*g) * g.ln()).collect();
        linear_fit(&x, &y).0
    }
}

pub fn predicted_exponent(case: &ScalingCase) -> Result<Exponents> {
    case.check()?;
    let ScalingCase { phi, psi, alpha, b } = *case;
    let k = case.k();
    let first = Exponents { a: -(alpha + 1.0) / (k + 1.0), h: k / (k + 1.0), branch: 1, log_correction: false };
    let tail = phi * (alpha + 1.0);
    Ok(if tail < 2.0 {
        if b <= k / (2.0 * (k + 1.0)) {
            first
        } else {
            Exponents {
                a: -2.0 * (1.0 - b) * (alpha + 1.0) / (k + 2.0),
                h: 2.0 * k * (1.0 - b) / (k + 2.0),
                branch: 2,
                log_correction: false,
            }
        }
    } else if b <= 1.0 - (2.0 - psi) * (alpha + 1.0) / (2.0 * (k + 1.0)) {
        Exponents { branch: 3, ..first }
    } else {
        Exponents {
            a: -2.0 * (1.0 - b) / (2.0 - psi),
            h: 2.0 * (2.0 - phi - psi) * (1.0 - b) / (2.0 - psi),
            branch: 4,
            log_correction: tail == 2.0,
        }
    })
}

/// Which solver evaluates the final risk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Rk4,
    Volterra,
}

/// Final-risk oracle for problems that share one spectrum and target.
pub struct Evaluator {
    engine: Engine,
    kernels: Option<SpectralKernels>,
    grid: Vec<f64>,
}

impl Evaluator {
    /// `x_max` bounds the kernel arguments that will be needed (see
    /// [`crate::ode::gamma_bound`]).
    pub fn new(template: &OdeProblem, engine: Engine, x_max: f64) -> Self {
        let kernels = match engine {
            Engine::Volterra => Some(SpectralKernels::new(&template.lambda, &template.d0, x_max)),
            Engine::Rk4 => None,
        };
        Self { engine, kernels, grid: refined_grid(DEFAULT_DT, 1e-7) }
    }

    pub fn with_grid(mut self, grid: Vec<f64>) -> Self {
        self.grid = grid;
        self
    }

    pub fn final_risk(&self, problem: &OdeProblem) -> Result<f64> {
        let curve = match (&self.engine, &self.kernels) {
            (Engine::Volterra, Some(k)) => integrate_volterra(problem, k, &self.grid)?,
            _ => integrate(problem, &self.grid)?,
        };
        Ok(curve.final_private_risk)
    }
}

/// Search space for `eta(0)`: a log grid on `[lo, hi]` (with `hi` capped at `2/gamma`),
/// then golden-section refinement around the best grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaSearch {
    pub lo: f64,
    pub hi: Option<f64>,
    pub points: usize,
    pub refine_iters: usize,
}

impl Default for EtaSearch {
    fn default() -> Self {
        Self { lo: 0.1, hi: None, points: 40, refine_iters: 16 }
    }
}

fn objective(eval: &Evaluator, problem: &OdeProblem) -> f64 {
    match eval.final_risk(problem) {
        Ok(r) if r.is_finite() => r,
        Ok(_) => f64::INFINITY,
        Err(e) => {
            debug!("candidate failed: {e}");
            f64::INFINITY
        }
    }
}

/// Minimizes the final private risk over the scale `eta(0)` of `template.schedule`.
pub fn optimize_eta0(template: &OdeProblem, eval: &Evaluator, search: &EtaSearch) -> Result<(f64, f64)> {
    let cap = template.rate_cap();
    let hi = search.hi.unwrap_or(cap).min(cap);
    let lo = search.lo.min(hi);
    let points = search.points.max(1);
    let grid = if points == 1 { vec![hi] } else { log_grid(lo, hi, points) };
    let at = |eta0: f64| {
        let mut p = template.clone();
        p.schedule = template.schedule.with_eta0(eta0);
        objective(eval, &p)
    };
    let values: Vec<f64> = grid.iter().map(|&e| at(e)).collect();
    let (best_idx, &best_val) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");
    if !best_val.is_finite() {
        return Err(Error::OptimizationFailed);
    }
    let mut best = (grid[best_idx], best_val);
    if points > 1 && search.refine_iters > 0 {
        let a = grid[best_idx.saturating_sub(1)].ln();
        let b = grid[(best_idx + 1).min(points - 1)].ln();
        let (x, v) = golden_section(|u| at(u.exp()), a, b, search.refine_iters);
        if v < best.1 {
            best = (x.exp(), v);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub case: ScalingCase,
    pub gammas: Vec<f64>,
    pub eta0_star: Vec<f64>,
    pub r_star: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub exponents: Exponents,
    /// Predicted slope over this grid (equals `h` without the log correction).
    pub h_predicted: f64,
}

/// Fits `ln r = slope ln gamma + intercept`.
pub fn fit_slope(gammas: &[f64], r: &[f64]) -> Result<(f64, f64)> {
    if let Some(bad) = r.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Fit(format!("{bad}")));
    }
    if gammas.len() < 2 {
        return Err(Error::Fit("need at least two points".into()));
    }
    let x: Vec<f64> = gammas.iter().map(|g| g.ln()).collect();
    let y: Vec<f64> = r.iter().map(|v| v.ln()).collect();
    Ok(linear_fit(&x, &y))
}

/// Shared description of a sweep's non-swept parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSetup {
    pub d: usize,
    pub c: f64,
    pub zeta: f64,
    pub engine: Engine,
    pub search: EtaSearch,
    /// Prefactor of the aligned initial energies `D_i(0) = scale * lambda_i^(-psi)`.
    #[serde(default = "unit")]
    pub energy_scale: f64,
}

fn unit() -> f64 {
    1.0
}

/// For each `gamma`: `rho = gamma^b`, optimize `eta(0)` for the polynomial schedule with
/// exponent `alpha`, record the optimum, then fit the slope.
pub fn gamma_sweep(case: &ScalingCase, setup: &SweepSetup, gammas: &[f64]) -> Result<SweepResult> {
    let exponents = predicted_exponent(case)?;
    let decades = gammas.iter().cloned().fold(f64::MIN, f64::max).log10()
        - gammas.iter().cloned().fold(f64::MAX, f64::min).log10();
    if gammas.len() < 6 || decades < 1.5 - 1e-9 {
        warn!("gamma grid spans {decades:.2} decades with {} points; slopes may be unreliable", gammas.len());
    }
    let spectrum = if case.phi == 0.0 {
        SpectrumModel::uniform(setup.d)
    } else {
        SpectrumModel::power_law(case.phi, setup.d)
    };
    let target = TargetModel::PowerAligned { psi: case.psi, scale: setup.energy_scale };
    let schedule = Schedule::polynomial(1.0, case.alpha);
    let g_min = gammas.iter().cloned().fold(f64::MAX, f64::min);
    let base = OdeProblem::from_models(&spectrum, &target, schedule, setup.c, 1.0, g_min, setup.zeta)?;
    let eval = Evaluator::new(&base, setup.engine, 2.0 / g_min);
    let (mut eta0_star, mut r_star) = (Vec::new(), Vec::new());
    for &gamma in gammas {
        let mut p = base.clone();
        p.gamma = gamma;
        p.rho = gamma.powf(case.b);
        let (e, r) = optimize_eta0(&p, &eval, &setup.search)?;
        debug!("gamma = {gamma:.3e}: eta0* = {e:.4e}, R* = {r:.4e}");
        eta0_star.push(e);
        r_star.push(r);
    }
    let (slope, intercept) = fit_slope(gammas, &r_star)?;
    Ok(SweepResult {
        case: *case,
        gammas: gammas.to_vec(),
        eta0_star,
        r_star,
        slope,
        intercept,
        h_predicted: exponents.effective_slope(gammas),
        exponents,
    })
}

/// Harmonic schedule constants from the minimax-rate analysis, with
/// `A = R(0) + zeta^2/2`: `(beta, tau, c)`.
pub fn harmonic_theory_defaults(problem: &OdeProblem) -> (f64, f64, f64) {
    let a = problem.initial_risk() + 0.5 * problem.zeta * problem.zeta + 90.0;
    let (lmin, lmax) = (problem.lambda_min(), problem.lambda_max());
    let beta = 3.0 * a.sqrt() / lmin;
    let g = problem.gamma;
    let tau = (9.0 * a * lmax * g / (lmin * lmin)).max(12.0 * (2.0 * a).sqrt() / lmin * g / problem.rho);
    (beta, tau, 3.0 * (2.0 * a).sqrt() / lmin)
}

/// Grid search for the harmonic schedule `beta / (t + tau)`, parametrized by
/// `eta(0) = beta / tau` and `tau` so the two axes are roughly decoupled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicSearch {
    pub eta0: (f64, f64),
    pub tau: (f64, f64),
    pub points: usize,
    /// Number of local zoom-in rounds after the coarse grid.
    pub refine_rounds: usize,
    /// Add the theory constants as an extra candidate.
    pub include_theory: bool,
}

impl HarmonicSearch {
    /// `eta(0)` over `[0.1, 2/gamma]` and `tau` over seven decades below `10^3`.
    pub fn around(problem: &OdeProblem) -> Self {
        let cap = problem.rate_cap();
        Self {
            eta0: (0.1f64.min(cap), cap),
            tau: (1e-4, 1e3),
            points: 15,
            refine_rounds: 4,
            include_theory: true,
        }
    }
}

/// Minimizes the final private risk over `(beta, tau)`. Candidates whose `eta(0)`
/// exceeds `2/gamma` are skipped. Returns `(beta*, tau*, R*)`.
pub fn tune_harmonic(template: &OdeProblem, eval: &Evaluator, search: &HarmonicSearch) -> Result<(f64, f64, f64)> {
    let cap = template.rate_cap();
    let at = |eta0: f64, tau: f64| {
        if eta0 > cap * (1.0 + 1e-12) {
            return f64::INFINITY;
        }
        let mut p = template.clone();
        p.schedule = Schedule::harmonic(eta0 * tau, tau);
        objective(eval, &p)
    };
    // (eta0, tau, R)
    let mut best = (f64::NAN, f64::NAN, f64::INFINITY);
    let consider = |e: f64, t: f64, best: &mut (f64, f64, f64)| {
        let v = at(e, t);
        if v < best.2 {
            *best = (e, t, v);
        }
    };
    let points = search.points.max(1);
    let axis = |(lo, hi): (f64, f64)| if points == 1 { vec![lo] } else { log_grid(lo, hi, points) };
    let (es, ts) = (axis(search.eta0), axis(search.tau));
    for &e in &es {
        for &t in &ts {
            consider(e, t, &mut best);
        }
    }
    if search.include_theory {
        let (b, t, _) = harmonic_theory_defaults(template);
        consider(b / t, t, &mut best);
    }
    if !best.2.is_finite() {
        return Err(Error::OptimizationFailed);
    }
    if points > 1 {
        let step = |(lo, hi): (f64, f64)| (hi / lo).ln() / (points - 1) as f64;
        let (mut se, mut st) = (step(search.eta0), step(search.tau));
        for _ in 0..search.refine_rounds {
            let (e0, t0) = (best.0, best.1);
            for i in -2i32..=2 {
                for j in -2i32..=2 {
                    if i == 0 && j == 0 {
                        continue;
                    }
                    consider(e0 * (0.5 * se * i as f64).exp(), t0 * (0.5 * st * j as f64).exp(), &mut best);
                }
            }
            se *= 0.5;
            st *= 0.5;
        }
    }
    Ok((best.0 * best.1, best.1, best.2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iso(d: usize, gamma: f64, rho: f64, schedule: Schedule) -> OdeProblem {
        OdeProblem::from_models(
            &SpectrumModel::identity(d),
            &TargetModel::Isotropic { norm_sq: 1.0 },
            schedule,
            0.1,
            rho,
            gamma,
            0.3,
        )
        .unwrap()
    }

    #[test]
    fn exponent_examples() {
        let e = predicted_exponent(&ScalingCase { phi: 0.0, psi: 0.0, alpha: 0.0, b: 0.0 }).unwrap();
        assert!((e.a + 1.0 / 3.0).abs() < 1e-15 && (e.h - 2.0 / 3.0).abs() < 1e-15 && e.branch == 1);
        let e = predicted_exponent(&ScalingCase { phi: 0.0, psi: 0.0, alpha: 0.0, b: 0.5 }).unwrap();
        assert!((e.a + 0.25).abs() < 1e-15 && (e.h - 0.5).abs() < 1e-15 && e.branch == 2);
        let e = predicted_exponent(&ScalingCase { phi: 0.8, psi: 0.0, alpha: 5.0, b: 0.5 }).unwrap();
        assert!((e.a + 0.5).abs() < 1e-12 && (e.h - 0.6).abs() < 1e-12 && e.branch == 4);
        let e = predicted_exponent(&ScalingCase { phi: 0.5, psi: 0.0, alpha: 3.0, b: 0.0 }).unwrap();
        assert_eq!(e.branch, 3);
        assert!(predicted_exponent(&ScalingCase { phi: 0.0, psi: 0.0, alpha: 0.0, b: 1.0 }).is_err());
        assert!(predicted_exponent(&ScalingCase { phi: 0.0, psi: 0.0, alpha: 0.7, b: 0.0 }).is_err());
    }

    #[test]
    fn log_correction_on_the_boundary() {
        let e = predicted_exponent(&ScalingCase { phi: 0.5, psi: 0.0, alpha: 3.0, b: 0.9 }).unwrap();
        assert_eq!(e.branch, 4);
        assert!(e.log_correction);
        let g = 1e-3f64;
        assert!((e.h_at(g) - (e.h + (e.a * g.ln()).ln() / g.ln())).abs() < 1e-15);
        let s = e.effective_slope(&log_grid(1e-4, 1e-2, 7));
        assert!(s.is_finite() && s != e.h);
    }

    #[test]
    fn exact_power_law_slope() {
        let g = log_grid(10f64.powf(-3.5), 10f64.powf(-1.5), 7);
        let r: Vec<f64> = g.iter().map(|x| x.powf(0.8)).collect();
        let (s, _) = fit_slope(&g, &r).unwrap();
        assert!((s - 0.8).abs() < 1e-12);
        assert!(fit_slope(&g, &vec![0.0; 7]).is_err());
    }

    #[test]
    fn singleton_searches() {
        let p = iso(4, 0.01, 1.0, Schedule::constant(1.0));
        let eval = Evaluator::new(&p, Engine::Volterra, 200.0);
        let s = EtaSearch { lo: 3.0, hi: Some(3.0), points: 1, refine_iters: 0 };
        let (e, r) = optimize_eta0(&p, &eval, &s).unwrap();
        assert_eq!(e, 3.0);
        assert!(r > 0.0);
        let hs = HarmonicSearch { eta0: (4.0, 4.0), tau: (0.5, 0.5), points: 1, refine_rounds: 0, include_theory: false };
        let (b, t, _) = tune_harmonic(&p, &eval, &hs).unwrap();
        assert_eq!((b, t), (2.0, 0.5));
    }

    #[test]
    fn optimum_respects_cap() {
        let p = iso(4, 0.01, 1.0, Schedule::constant(1.0));
        let eval = Evaluator::new(&p, Engine::Volterra, 200.0);
        let (e, _) = optimize_eta0(&p, &eval, &EtaSearch::default()).unwrap();
        assert!(e <= 2.0 / 0.01);
    }
}
