//! Deterministic-equivalent risk dynamics.
//!
//! Mode energies evolve as
//! `dD_i = -2 lambda_i eta_bar mu(R) D_i + lambda_i eta_bar^2 nu(R) (R + zeta^2/2) gamma
//!         + 2 c^2 sigma^2(t) gamma^2`
//! with `R = (1/d) sum lambda_i D_i` and `eta_bar = min(eta, 2/gamma)`. Two solvers are
//! provided: fixed-step RK4 over the modes ([`integrate`]) and a product-integration
//! solver of the equivalent scalar Volterra equation ([`integrate_volterra`]) whose cost
//! per solve does not depend on `d` once the kernels are tabulated.
//!
//! All spectral reductions use a pairwise tree sum, so results are bit-reproducible for a
//! fixed input order.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clipping::{nu_from_ratio, mu_from_ratio, total_risk, ClippingFactors};
use crate::error::{Error, Result};
use crate::numerics::{pairwise_sum, pairwise_sum_by};
use crate::schedule::Schedule;
use crate::spectrum::{mode_energies, SpectrumModel, TargetModel};

/// Default fixed step of the integrators.
pub const DEFAULT_DT: f64 = 1e-3;

/// Largest `h * L` allowed in one RK4 substep, with `L` the fastest decay rate.
const STIFFNESS_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeProblem {
    /// Eigenvalues, descending.
    pub lambda: Vec<f64>,
    /// Initial mode energies.
    pub d0: Vec<f64>,
    pub schedule: Schedule,
    pub c: f64,
    pub rho: f64,
    /// Aspect ratio `d/n`. Zero is accepted as the infinite-sample limit.
    pub gamma: f64,
    pub zeta: f64,
}

impl OdeProblem {
    pub fn new(
        lambda: Vec<f64>,
        d0: Vec<f64>,
        schedule: Schedule,
        c: f64,
        rho: f64,
        gamma: f64,
        zeta: f64,
    ) -> Result<Self> {
        if lambda.is_empty() || lambda.len() != d0.len() {
            return Err(Error::Domain(format!(
                "need matching, non-empty eigenvalue and energy vectors ({} vs {})",
                lambda.len(),
                d0.len()
            )));
        }
        if lambda.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::Domain("eigenvalues must be finite and > 0".into()));
        }
        if d0.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::Domain("mode energies must be finite and >= 0".into()));
        }
        if !(c > 0.0) {
            return Err(Error::Domain(format!("clipping constant must be > 0, got {c}")));
        }
        if !(rho > 0.0) {
            return Err(Error::Domain(format!("rho must be > 0, got {rho}")));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::Domain(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        if !(zeta.is_finite() && zeta >= 0.0) {
            return Err(Error::Domain(format!("label noise must be >= 0, got {zeta}")));
        }
        schedule.validate()?;
        Ok(Self { lambda, d0, schedule, c, rho, gamma, zeta })
    }

    /// Problem on a modelled spectrum and target.
    pub fn from_models(
        spectrum: &SpectrumModel,
        target: &TargetModel,
        schedule: Schedule,
        c: f64,
        rho: f64,
        gamma: f64,
        zeta: f64,
    ) -> Result<Self> {
        let lambda = spectrum.eigenvalues()?;
        let energies = mode_energies(&lambda, target, spectrum.phi())?;
        Self::new(lambda, energies.d0, schedule, c, rho, gamma, zeta)
    }

    pub fn d(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda.iter().cloned().fold(f64::MIN, f64::max)
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda.iter().cloned().fold(f64::MAX, f64::min)
    }

    /// `R(0) = (1/d) sum lambda_i D_i(0)`.
    pub fn initial_risk(&self) -> f64 {
        let d = self.d();
        pairwise_sum_by(0, d, |i| self.lambda[i] * self.d0[i]) / d as f64
    }

    /// Step-size cap `2/gamma` (infinite when `gamma = 0`).
    pub fn rate_cap(&self) -> f64 {
        if self.gamma > 0.0 {
            2.0 / self.gamma
        } else {
            f64::INFINITY
        }
    }

    /// `eta_bar(t) = min(eta(t), 2/gamma)`.
    #[inline]
    pub fn eta_bar(&self, t: f64) -> f64 {
        self.schedule.eta_at(t).min(self.rate_cap())
    }

    /// `2 c^2 gamma^2 / rho^2`, the factor turning the noise rate into mode forcing.
    pub fn noise_coefficient(&self) -> f64 {
        if self.gamma == 0.0 || self.rho.is_infinite() {
            return 0.0;
        }
        2.0 * self.c * self.c * self.gamma * self.gamma / (self.rho * self.rho)
    }

    /// Noise forcing `2 c^2 sigma^2(t) gamma^2` at time `t`.
    #[inline]
    fn noise_forcing(&self, coef: f64, t: f64) -> f64 {
        let rate = self.schedule.noise_rate_at(t);
        if rate == 0.0 || coef == 0.0 {
            0.0
        } else {
            coef * rate
        }
    }

    /// Integrated noise forcing over `[t0, t1]`, exact for every schedule.
    fn noise_mass(&self, coef: f64, t0: f64, t1: f64) -> f64 {
        if coef == 0.0 {
            return 0.0;
        }
        let drop = self.schedule.eta_sq_at(t0) - self.schedule.eta_sq_at(t1);
        if drop <= 0.0 {
            0.0
        } else {
            coef * drop
        }
    }

    /// Clipping factors at excess risk `r`; the zero total-risk limit is unclipped.
    #[inline]
    pub fn factors(&self, r: f64) -> ClippingFactors {
        if self.c.is_infinite() {
            return ClippingFactors::UNCLIPPED;
        }
        let p = total_risk(r.max(0.0), self.zeta);
        if p <= 0.0 {
            return ClippingFactors::UNCLIPPED;
        }
        let ratio = self.c / (2.0 * p).sqrt();
        ClippingFactors { mu: mu_from_ratio(ratio), nu: nu_from_ratio(ratio) }
    }

    /// Descent factor at zero excess risk, the largest the dynamics can see.
    fn mu_max(&self) -> f64 {
        self.factors(0.0).mu
    }

    /// Time at which `eta` crosses `2/gamma`, if it does inside `(0, 1)`.
    pub fn kink(&self) -> Option<f64> {
        self.schedule.crossing_time(self.rate_cap())
    }
}

/// `R(1) + 2 c^2 eta(1)^2 gamma^2 / rho^2`, the risk of the released last iterate.
pub fn final_private_risk(r1: f64, schedule: &Schedule, c: f64, gamma: f64, rho: f64) -> f64 {
    let eta1 = schedule.eta_at(1.0);
    if eta1 == 0.0 || gamma == 0.0 || rho.is_infinite() {
        return r1;
    }
    r1 + 2.0 * c * c * eta1 * eta1 * gamma * gamma / (rho * rho)
}

/// Sampled risk trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskCurve {
    pub grid: Vec<f64>,
    pub r: Vec<f64>,
    /// `Gamma(t) = int_0^t eta_bar mu(R) ds`.
    pub gamma_int: Vec<f64>,
    pub final_private_risk: f64,
}

impl RiskCurve {
    /// `R(1)`, before the last-iterate correction.
    pub fn terminal_risk(&self) -> f64 {
        *self.r.last().expect("non-empty curve")
    }

    /// Linear interpolation of `R` at `t`.
    pub fn at(&self, t: f64) -> f64 {
        let g = &self.grid;
        if t <= g[0] {
            return self.r[0];
        }
        let j = g.partition_point(|&s| s < t);
        if j >= g.len() {
            return self.terminal_risk();
        }
        let (t0, t1) = (g[j - 1], g[j]);
        let w = (t - t0) / (t1 - t0);
        self.r[j - 1] + w * (self.r[j] - self.r[j - 1])
    }

    /// Columns `t, R, Gamma`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "R", "Gamma"])?;
        for j in 0..self.grid.len() {
            w.write_record([
                fmt(self.grid[j]),
                fmt(self.r[j]),
                fmt(self.gamma_int[j]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// JSON sidecar `{final_private_risk, config_hash}`.
    pub fn write_sidecar(&self, path: impl AsRef<Path>, config_hash: &str) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        let v = serde_json::json!({
            "final_private_risk": self.final_private_risk,
            "config_hash": config_hash,
        });
        writeln!(f, "{}", serde_json::to_string_pretty(&v)?)?;
        Ok(())
    }
}

pub(crate) fn fmt(x: f64) -> String {
    format!("{x:.12e}")
}

/// `0, dt, 2dt, ..., 1` (with `1/dt` rounded to an integer).
pub fn uniform_grid(dt: f64) -> Vec<f64> {
    let n = (1.0 / dt).round().max(1.0) as usize;
    (0..=n).map(|k| k as f64 / n as f64).collect()
}

/// Uniform grid with extra geometric points in `(0, dt)` down to `first`, resolving the
/// initial transient of stiff problems.
pub fn refined_grid(dt: f64, first: f64) -> Vec<f64> {
    let mut grid = uniform_grid(dt);
    let step = grid[1];
    let mut extra = Vec::new();
    let mut t = first;
    while t < 0.8 * step {
        extra.push(t);
        t *= 1.5;
    }
    grid.splice(1..1, extra);
    grid
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 || grid[0] != 0.0 || *grid.last().unwrap() != 1.0 {
        return Err(Error::Domain("time grid must start at 0 and end at 1".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("time grid must be strictly ascending".into()));
    }
    Ok(())
}

/// Grid plus the kink point; returns the mesh and the mesh index of every grid point.
fn mesh_with_kink(grid: &[f64], kink: Option<f64>) -> (Vec<f64>, Vec<usize>) {
    let mut mesh = grid.to_vec();
    if let Some(k) = kink {
        let j = mesh.partition_point(|&s| s < k);
        let near = |s: f64| (s - k).abs() <= 1e-12;
        if !(j < mesh.len() && near(mesh[j])) && !(j > 0 && near(mesh[j - 1])) {
            mesh.insert(j, k);
        }
    }
    let mut idx = Vec::with_capacity(grid.len());
    let mut m = 0;
    for &t in grid {
        while mesh[m] != t {
            m += 1;
        }
        idx.push(m);
    }
    (mesh, idx)
}

/// Which learning rate drives the descent and variance terms.
#[derive(Clone, Copy)]
enum Rate {
    Capped,
    Raw,
}

/// Modes `dD_i = -2 p_i a D_i + q_i b + e` with `R = sum w_i D_i`, `a = rate * mu`,
/// `b = rate^2 nu P gamma`.
struct LinearModes<'a> {
    p: &'a [f64],
    q: &'a [f64],
    w: &'a [f64],
    rate: Rate,
}

impl LinearModes<'_> {
    fn risk(&self, d: &[f64]) -> f64 {
        pairwise_sum_by(0, d.len(), |i| self.w[i] * d[i])
    }
}

fn rk4_modes(problem: &OdeProblem, modes: &LinearModes, x0: &[f64], grid: &[f64]) -> Result<RiskCurve> {
    check_grid(grid)?;
    let kink = match modes.rate {
        Rate::Capped => problem.kink(),
        Rate::Raw => None,
    };
    let (mesh, record) = mesh_with_kink(grid, kink);
    let rate = |t: f64| match modes.rate {
        Rate::Capped => problem.eta_bar(t),
        Rate::Raw => problem.schedule.eta_at(t),
    };
    let coef = problem.noise_coefficient();
    let p_max = modes.p.iter().cloned().fold(0.0, f64::max);
    let mu_max = problem.mu_max();
    let gamma = problem.gamma;
    let coeffs = |t: f64, r: f64| {
        let f = problem.factors(r);
        let eta = rate(t);
        let a = eta * f.mu;
        let b = eta * eta * f.nu * total_risk(r.max(0.0), problem.zeta) * gamma;
        (a, b)
    };

    let n = x0.len();
    let mut d = x0.to_vec();
    let mut acc = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut big_gamma = 0.0;
    let mut r_out = Vec::with_capacity(grid.len());
    let mut g_out = Vec::with_capacity(grid.len());
    let mut next_record = 0;
    let mut r_now = modes.risk(&d);
    let scale = d.iter().cloned().fold(1.0, f64::max);

    for m in 0..mesh.len() {
        if next_record < record.len() && record[next_record] == m {
            r_out.push(r_now);
            g_out.push(big_gamma);
            next_record += 1;
        }
        if m + 1 == mesh.len() {
            break;
        }
        let (t0, t1) = (mesh[m], mesh[m + 1]);
        let stiff = 2.0 * p_max * rate(t0) * mu_max * (t1 - t0);
        let subs = ((stiff / STIFFNESS_LIMIT).ceil() as usize).max(1);
        let h = (t1 - t0) / subs as f64;
        for s in 0..subs {
            let ta = t0 + s as f64 * h;
            let tb = if s + 1 == subs { t1 } else { ta + h };
            let tm = 0.5 * (ta + tb);
            // a singular noise rate at the right end is replaced by its exact average
            let (e1, e2, e4) = {
                let end = problem.noise_forcing(coef, tb);
                if end.is_finite() {
                    (problem.noise_forcing(coef, ta), problem.noise_forcing(coef, tm), end)
                } else {
                    let avg = problem.noise_mass(coef, ta, tb) / (tb - ta);
                    (avg, avg, avg)
                }
            };
            let hh = tb - ta;

            let (a1, b1) = coeffs(ta, r_now);
            for i in 0..n {
                let k = -2.0 * modes.p[i] * a1 * d[i] + modes.q[i] * b1 + e1;
                acc[i] = k;
                tmp[i] = d[i] + 0.5 * hh * k;
            }
            let (a2, b2) = coeffs(tm, modes.risk(&tmp));
            for i in 0..n {
                let k = -2.0 * modes.p[i] * a2 * tmp[i] + modes.q[i] * b2 + e2;
                acc[i] += 2.0 * k;
                tmp[i] = d[i] + 0.5 * hh * k;
            }
            let (a3, b3) = coeffs(tm, modes.risk(&tmp));
            for i in 0..n {
                let k = -2.0 * modes.p[i] * a3 * tmp[i] + modes.q[i] * b3 + e2;
                acc[i] += 2.0 * k;
                tmp[i] = d[i] + hh * k;
            }
            let (a4, b4) = coeffs(tb, modes.risk(&tmp));
            let mut negative = false;
            for i in 0..n {
                let k = -2.0 * modes.p[i] * a4 * tmp[i] + modes.q[i] * b4 + e4;
                d[i] += hh / 6.0 * (acc[i] + k);
                negative |= d[i] < -1e-14 * scale;
            }
            if negative || d.iter().any(|x| !x.is_finite()) {
                return Err(Error::Instability { t: tb });
            }
            big_gamma += hh / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            r_now = modes.risk(&d);
        }
    }
    let r1 = *r_out.last().unwrap();
    Ok(RiskCurve {
        grid: grid.to_vec(),
        final_private_risk: final_private_risk(r1, &problem.schedule, problem.c, problem.gamma, problem.rho),
        r: r_out,
        gamma_int: g_out,
    })
}

/// RK4 integration of all `d` modes, sampled on `grid` (which must run from 0 to 1).
///
/// Each grid interval is split into substeps when the fastest mode would otherwise
/// exceed the RK4 accuracy region.
pub fn integrate(problem: &OdeProblem, grid: &[f64]) -> Result<RiskCurve> {
    let d = problem.d() as f64;
    let w: Vec<f64> = problem.lambda.iter().map(|l| l / d).collect();
    let modes = LinearModes { p: &problem.lambda, q: &problem.lambda, w: &w, rate: Rate::Capped };
    rk4_modes(problem, &modes, &problem.d0, grid)
}

/// Scalar comparison ODEs bracketing the risk: `(upper, lower)`.
pub fn sandwich_bounds(problem: &OdeProblem, grid: &[f64]) -> Result<(RiskCurve, RiskCurve)> {
    let (lmin, lmax) = (problem.lambda_min(), problem.lambda_max());
    let r0 = [problem.initial_risk()];
    let one = [1.0];
    let upper = rk4_modes(
        problem,
        &LinearModes { p: &[lmin], q: &[lmax], w: &one, rate: Rate::Raw },
        &r0,
        grid,
    )?;
    let lower = rk4_modes(
        problem,
        &LinearModes { p: &[lmax], q: &[1.0], w: &one, rate: Rate::Raw },
        &r0,
        grid,
    )?;
    Ok((upper, lower))
}

/// Sup-norm residual of the implicit kernel equation
/// `R(t) = F(Gamma(t)) + int_0^t [b(s) K(Gamma(t)-Gamma(s)) + e(s) J(Gamma(t)-Gamma(s))] ds`
/// on the curve's grid, with the time integral done by the trapezoid rule.
pub fn implicit_residual(curve: &RiskCurve, problem: &OdeProblem) -> f64 {
    let n = problem.d();
    let df = n as f64;
    let coef = problem.noise_coefficient();
    let gamma = problem.gamma;
    let b_at = |t: f64, r: f64| {
        let f = problem.factors(r);
        let eta = problem.eta_bar(t);
        eta * eta * f.nu * total_risk(r.max(0.0), problem.zeta) * gamma
    };
    let lam = &problem.lambda;
    // per mode: decay factor exp(-2 lambda Gamma_j) and the running integral I_i
    let mut decay = vec![1.0; n];
    let mut integral = vec![0.0; n];
    let mut terms = vec![0.0; n];
    let mut worst: f64 = (curve.r[0] - problem.initial_risk()).abs();
    let mut b_prev = b_at(curve.grid[0], curve.r[0]);
    for j in 1..curve.grid.len() {
        let h = curve.grid[j] - curve.grid[j - 1];
        let dg = curve.gamma_int[j] - curve.gamma_int[j - 1];
        let b_now = b_at(curve.grid[j], curve.r[j]);
        let w = problem.noise_mass(coef, curve.grid[j - 1], curve.grid[j]);
        for i in 0..n {
            let step = (-2.0 * lam[i] * dg).exp();
            decay[i] *= step;
            let g0 = lam[i] * b_prev;
            let g1 = lam[i] * b_now;
            integral[i] = step * integral[i] + 0.5 * h * (g0 * step + g1) + 0.5 * w * (step + 1.0);
            terms[i] = lam[i] * (problem.d0[i] * decay[i] + integral[i]);
        }
        let predicted = pairwise_sum(&terms) / df;
        worst = worst.max((curve.r[j] - predicted).abs());
        b_prev = b_now;
    }
    worst
}

/// Tabulated spectral sums used by the scalar-equation solver.
///
/// Holds `L(x) = (1/d) sum e^{-2 lambda x}`, `J`, `K` (extra powers of lambda) and
/// `F(x) = (1/d) sum D_i(0) lambda_i e^{-2 lambda x}`. Spectra with few distinct
/// `(lambda, D0)` pairs are summed directly; otherwise the sums are tabulated on
/// `x = s (e^u - 1)` and evaluated by cubic Hermite interpolation in `u`.
#[derive(Debug, Clone)]
pub struct SpectralKernels {
    backend: Backend,
    lambda_max: f64,
}

#[derive(Debug, Clone)]
enum Backend {
    Direct {
        /// `(lambda, D0, multiplicity / d)`
        groups: Vec<(f64, f64, f64)>,
    },
    Table {
        scale: f64,
        du: f64,
        x_max: f64,
        /// per node: value and u-derivative of `L, J, K, F`
        nodes: Vec<[f64; 8]>,
        lambda: Vec<f64>,
        d0: Vec<f64>,
    },
}

/// Kernel sums at one argument.
#[derive(Debug, Clone, Copy, Default)]
pub struct KernelSums {
    pub l: f64,
    pub j: f64,
    pub k: f64,
    pub f: f64,
}

const DIRECT_LIMIT: usize = 24;
const TABLE_DU: f64 = 0.01;

impl SpectralKernels {
    /// Kernels valid for arguments up to `x_max`; larger arguments fall back to direct sums.
    pub fn new(lambda: &[f64], d0: &[f64], x_max: f64) -> Self {
        let d = lambda.len() as f64;
        let lambda_max = lambda.iter().cloned().fold(0.0, f64::max);
        let mut groups: Vec<(f64, f64, f64)> = Vec::new();
        for (&l, &e) in lambda.iter().zip(d0) {
            match groups.iter_mut().find(|g| g.0 == l && g.1 == e) {
                Some(g) => g.2 += 1.0 / d,
                None => {
                    groups.push((l, e, 1.0 / d));
                    if groups.len() > DIRECT_LIMIT {
                        break;
                    }
                }
            }
        }
        if groups.len() <= DIRECT_LIMIT {
            return Self { backend: Backend::Direct { groups }, lambda_max };
        }
        let scale = 1e-2 / lambda_max;
        let x_max = x_max.max(1.0 / lambda_max);
        let u_max = (x_max / scale).ln_1p();
        let count = (u_max / TABLE_DU).ceil() as usize + 1;
        let mut nodes = Vec::with_capacity(count);
        let mut w = vec![0.0; lambda.len()];
        for k in 0..count {
            let u = k as f64 * TABLE_DU;
            let x = scale * u.exp_m1();
            for (wi, l) in w.iter_mut().zip(lambda) {
                *wi = (-2.0 * l * x).exp();
            }
            let s = direct_sums(lambda, d0, &w);
            let dxdu = x + scale;
            // d/dx: L' = -2J, J' = -2K, K' = -2M, F' = -2 Fp
            nodes.push([
                s[0],
                -2.0 * s[1] * dxdu,
                s[1],
                -2.0 * s[2] * dxdu,
                s[2],
                -2.0 * s[3] * dxdu,
                s[4],
                -2.0 * s[5] * dxdu,
            ]);
        }
        let x_max = scale * ((count - 1) as f64 * TABLE_DU).exp_m1();
        Self {
            backend: Backend::Table {
                scale,
                du: TABLE_DU,
                x_max,
                nodes,
                lambda: lambda.to_vec(),
                d0: d0.to_vec(),
            },
            lambda_max,
        }
    }

    pub fn for_problem(problem: &OdeProblem) -> Self {
        Self::new(&problem.lambda, &problem.d0, gamma_bound(problem))
    }

    pub fn eval(&self, x: f64) -> KernelSums {
        match &self.backend {
            Backend::Direct { groups } => {
                let mut s = KernelSums::default();
                for &(l, e, m) in groups {
                    let w = m * (-2.0 * l * x).exp();
                    s.l += w;
                    s.j += l * w;
                    s.k += l * l * w;
                    s.f += e * l * w;
                }
                s
            }
            Backend::Table { scale, du, x_max, nodes, lambda, d0 } => {
                if x > *x_max {
                    let w: Vec<f64> = lambda.iter().map(|l| (-2.0 * l * x).exp()).collect();
                    let s = direct_sums(lambda, d0, &w);
                    return KernelSums { l: s[0], j: s[1], k: s[2], f: s[4] };
                }
                let u = (x / scale).ln_1p() / du;
                let k = (u.floor() as usize).min(nodes.len() - 2);
                let s = u - k as f64;
                let (a, b) = (&nodes[k], &nodes[k + 1]);
                let s2 = s * s;
                let s3 = s2 * s;
                let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
                let h10 = (s3 - 2.0 * s2 + s) * du;
                let h01 = -2.0 * s3 + 3.0 * s2;
                let h11 = (s3 - s2) * du;
                let herm = |c: usize| h00 * a[c] + h10 * a[c + 1] + h01 * b[c] + h11 * b[c + 1];
                KernelSums { l: herm(0), j: herm(2), k: herm(4), f: herm(6) }
            }
        }
    }
}

/// `[L, J, K, M, F, Fp]` for precomputed weights `w_i = exp(-2 lambda_i x)`.
fn direct_sums(lambda: &[f64], d0: &[f64], w: &[f64]) -> [f64; 6] {
    let n = lambda.len();
    let d = n as f64;
    let sum = |f: &dyn Fn(usize) -> f64| {
        let mut total = 0.0;
        let mut block = 0.0;
        for i in 0..n {
            block += f(i);
            if i % 256 == 255 {
                total += block;
                block = 0.0;
            }
        }
        (total + block) / d
    };
    let l = |i: usize| lambda[i];
    [
        sum(&|i| w[i]),
        sum(&|i| l(i) * w[i]),
        sum(&|i| l(i) * l(i) * w[i]),
        sum(&|i| l(i) * l(i) * l(i) * w[i]),
        sum(&|i| d0[i] * l(i) * w[i]),
        sum(&|i| d0[i] * l(i) * l(i) * w[i]),
    ]
}

/// Upper bound on `Gamma(1)`.
pub fn gamma_bound(problem: &OdeProblem) -> f64 {
    problem.schedule.eta_at(0.0).min(problem.rate_cap()) * problem.mu_max()
}

/// Solves the scalar implicit equation for `R` by product integration.
///
/// Within a mesh interval, `Gamma` is linear and the variance/noise weights are constant,
/// so the kernel integrals are exact antiderivative differences. Each node needs one
/// scalar root solve; the cost is quadratic in the number of mesh points and independent
/// of `d`.
pub fn integrate_volterra(problem: &OdeProblem, kernels: &SpectralKernels, grid: &[f64]) -> Result<RiskCurve> {
    check_grid(grid)?;
    let (mesh, record) = mesh_with_kink(grid, problem.kink());
    let n = mesh.len();
    let coef = problem.noise_coefficient();
    let lmax = kernels.lambda_max;
    let eta: Vec<f64> = mesh.iter().map(|&t| problem.eta_bar(t)).collect();
    let noise: Vec<f64> = (0..n - 1).map(|m| problem.noise_mass(coef, mesh[m], mesh[m + 1])).collect();
    let gamma = problem.gamma;
    let node = |j: usize, r: f64| {
        let f = problem.factors(r);
        (eta[j] * f.mu, eta[j] * eta[j] * f.nu * total_risk(r.max(0.0), problem.zeta) * gamma)
    };

    let mut r = vec![0.0; n];
    let mut big = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut b = vec![0.0; n];
    r[0] = kernels.eval(0.0).f;
    (g[0], b[0]) = node(0, r[0]);
    let mut sums = vec![KernelSums::default(); n];

    for j in 1..n {
        let h = mesh[j] - mesh[j - 1];
        // residual of the fixed-point map at a trial value of R(t_j)
        let mut phi = |rj: f64| -> (f64, f64, f64, f64) {
            let (gj, bj) = node(j, rj);
            let gam_j = big[j - 1] + 0.5 * h * (g[j - 1] + gj);
            for m in 0..=j {
                let gm = if m == j { gam_j } else { big[m] };
                sums[m] = kernels.eval((gam_j - gm).max(0.0));
            }
            let mut s = kernels.eval(gam_j).f;
            for m in 0..j {
                let gm1 = if m + 1 == j { gam_j } else { big[m + 1] };
                let dgam = gm1 - big[m];
                let bm1 = if m + 1 == j { bj } else { b[m + 1] };
                let weight = 0.5 * (b[m] + bm1) * (mesh[m + 1] - mesh[m]);
                let (lo, hi) = (&sums[m + 1], &sums[m]);
                let (cb, cw) = if lmax * dgam > 1e-4 {
                    ((lo.j - hi.j) / (2.0 * dgam), (lo.l - hi.l) / (2.0 * dgam))
                } else {
                    let mid = kernels.eval((gam_j - big[m] - 0.5 * dgam).max(0.0));
                    (mid.k, mid.j)
                };
                s += weight * cb + noise[m] * cw;
            }
            (s, gj, bj, gam_j)
        };
        // secant iteration on R = phi(R)
        let mut x0 = r[j - 1];
        let (p0, ..) = phi(x0);
        let mut f0 = p0 - x0;
        let mut x1 = p0.max(0.0);
        let mut out = phi(x1);
        let mut f1 = out.0 - x1;
        for _ in 0..40 {
            if f1.abs() <= 1e-13 * (1.0 + x1.abs()) || f1 == f0 {
                break;
            }
            let x2 = (x1 - f1 * (x1 - x0) / (f1 - f0)).max(0.0);
            x0 = x1;
            f0 = f1;
            x1 = x2;
            out = phi(x1);
            f1 = out.0 - x1;
        }
        if !(out.0.is_finite() && out.0 >= 0.0) {
            return Err(Error::Instability { t: mesh[j] });
        }
        r[j] = out.0;
        g[j] = out.1;
        b[j] = out.2;
        big[j] = out.3;
    }
    let r_out: Vec<f64> = record.iter().map(|&m| r[m]).collect();
    let g_out: Vec<f64> = record.iter().map(|&m| big[m]).collect();
    let r1 = *r_out.last().unwrap();
    Ok(RiskCurve {
        grid: grid.to_vec(),
        final_private_risk: final_private_risk(r1, &problem.schedule, problem.c, problem.gamma, problem.rho),
        r: r_out,
        gamma_int: g_out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1(spectrum: SpectrumModel, schedule: Schedule) -> OdeProblem {
        OdeProblem::from_models(
            &spectrum,
            &TargetModel::Isotropic { norm_sq: 1.0 },
            schedule,
            1.0,
            1.0,
            0.1,
            0.3,
        )
        .unwrap()
    }

    #[test]
    fn unclipped_noiseless_decay_is_exponential() {
        let p = OdeProblem::from_models(
            &SpectrumModel::identity(3),
            &TargetModel::Isotropic { norm_sq: 1.0 },
            Schedule::constant(2.0),
            f64::INFINITY,
            1.0,
            0.0,
            0.0,
        )
        .unwrap();
        let grid = uniform_grid(1e-4);
        let curve = integrate(&p, &grid).unwrap();
        for (t, r) in curve.grid.iter().zip(&curve.r) {
            let exact = 0.5 * (-4.0 * t).exp();
            assert!((r - exact).abs() <= 1e-6 * exact);
        }
        assert_eq!(curve.final_private_risk, curve.terminal_risk());
    }

    #[test]
    fn correction_values() {
        assert!((final_private_risk(0.0, &Schedule::constant(3.0), 1.0, 0.1, 1.0) - 0.18).abs() < 1e-15);
        assert_eq!(final_private_risk(0.3, &Schedule::polynomial(3.0, 0.5), 1.0, 0.1, 1.0), 0.3);
        let h = Schedule::harmonic(2.0, 0.5);
        let expected = 0.1 + 2.0 * (4.0 / 2.25) * 0.01 / 0.25;
        assert!((final_private_risk(0.1, &h, 1.0, 0.1, 0.5) - expected).abs() < 1e-14);
    }

    #[test]
    fn identity_sandwich_is_tight() {
        let p = fig1(SpectrumModel::identity(10), Schedule::polynomial(3.0, 0.5));
        let grid = uniform_grid(1e-3);
        let curve = integrate(&p, &grid).unwrap();
        let (up, lo) = sandwich_bounds(&p, &grid).unwrap();
        for j in 0..grid.len() {
            assert!((up.r[j] - curve.r[j]).abs() < 1e-9);
            assert!((lo.r[j] - curve.r[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn kink_point_is_inserted() {
        let (mesh, idx) = mesh_with_kink(&[0.0, 0.5, 1.0], Some(0.3));
        assert_eq!(mesh, vec![0.0, 0.3, 0.5, 1.0]);
        assert_eq!(idx, vec![0, 2, 3]);
        let (mesh, _) = mesh_with_kink(&[0.0, 0.5, 1.0], Some(0.5));
        assert_eq!(mesh.len(), 3);
    }

    #[test]
    fn refined_grid_is_ascending() {
        let g = refined_grid(1e-3, 1e-7);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(g[0], 0.0);
        assert_eq!(g[1], 1e-7);
        assert_eq!(*g.last().unwrap(), 1.0);
    }

    #[test]
    fn table_kernels_match_direct_sums() {
        let l = SpectrumModel::power_law(0.25, 2000).eigenvalues().unwrap();
        let e = mode_energies(&l, &TargetModel::aligned(0.5), Some(0.25)).unwrap();
        let tab = SpectralKernels::new(&l, &e.d0, 1e3);
        for &x in &[0.0, 1e-5, 0.013, 0.7, 3.0, 42.0, 999.0, 5e3] {
            let exact = crate::spectrum::kernels(&l, &e.d0, x).unwrap();
            let got = tab.eval(x);
            assert!((got.f - exact.f).abs() <= 1e-9 * exact.f, "F at {x}");
            assert!((got.k - exact.k).abs() <= 1e-9 * exact.k, "K at {x}");
            assert!((got.j - exact.j).abs() <= 1e-9 * exact.j, "J at {x}");
        }
    }

    #[test]
    fn volterra_agrees_with_rk4() {
        for schedule in [Schedule::constant(3.0), Schedule::polynomial(3.0, 0.5), Schedule::polynomial(30.0, 1.0)] {
            let p = fig1(SpectrumModel::uniform(200), schedule);
            let fine = integrate(&p, &uniform_grid(1e-4)).unwrap();
            let k = SpectralKernels::for_problem(&p);
            let fast = integrate_volterra(&p, &k, &uniform_grid(1e-3)).unwrap();
            let rel = (fast.terminal_risk() - fine.terminal_risk()).abs() / fine.terminal_risk();
            assert!(rel < 1e-4, "rel = {rel}");
        }
    }
}
