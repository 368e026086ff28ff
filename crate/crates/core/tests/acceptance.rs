//! Acceptance battery. Prints one PASS/FAIL line per criterion with the measured values.
//! Exits 0 regardless of the outcome unless `DPGD_ACCEPTANCE_STRICT=1`, and runs only the
//! criteria whose numbers are listed in `DPGD_ACCEPTANCE_ONLY` (comma-separated) if set.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use dpgd::clipping::{mc_clipping_oracle, mu_c, nu_c};
use dpgd::experiments::{
    run_heatmap, run_ode_vs_sim, run_scaling_law, run_schedules_compare, HeatmapConfig, HeatmapEngine,
    OdeVsSimConfig, ScalingLawConfig, SchedulesConfig, SlopeStatus,
};
use dpgd::ode::{implicit_residual, integrate, sandwich_bounds, uniform_grid, OdeProblem};
use dpgd::privacy::{accountant_rho, discrete_noise_schedule};
use dpgd::scaling::ScalingCase;
use dpgd::schedule::Schedule;
use dpgd::sim::{last_step_jump, RunConfig};
use dpgd::spectrum::{SpectrumKind, SpectrumModel, TargetModel};
use dpgd::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn fig1_problem(spectrum: &SpectrumModel, target: &TargetModel, alpha: f64) -> Result<OdeProblem> {
    OdeProblem::from_models(spectrum, target, Schedule::polynomial(3.0, alpha), 1.0, 1.0, 0.1, 0.3)
}

fn half() -> TargetModel {
    TargetModel::Isotropic { norm_sq: 1.0 }
}

fn clipping_factors() -> Result<Outcome> {
    let nu1 = nu_c(1.0, 0.0, 1.0)?;
    let exact = 1.0 - (2.0 / (std::f64::consts::PI * std::f64::consts::E)).sqrt();
    let mut worst_z: f64 = 0.0;
    let zeta = 0.3;
    for (i, &c) in [0.05, 0.2, 1.0, 3.0, 20.0].iter().enumerate() {
        for (j, &r) in [0.0, 0.05, 0.3, 1.0, 4.0].iter().enumerate() {
            let mc = mc_clipping_oracle(c, r, zeta, 1_000_000, (5 * i + j) as u64)?;
            let zm = (mu_c(c, r, zeta)? - mc.factors.mu).abs() / mc.mu_se.max(1e-300);
            let zn = (nu_c(c, r, zeta)? - mc.factors.nu).abs() / mc.nu_se.max(1e-300);
            worst_z = worst_z.max(zm).max(zn);
        }
    }
    let pass = (nu1 - exact).abs() <= 1e-6 && worst_z <= 3.0;
    outcome(pass, format!("nu(c'=1) = {nu1:.9} (exact {exact:.9}), worst MC deviation {worst_z:.2} SE"))
}

fn accountant_round_trip() -> Result<Outcome> {
    let schedules = [
        Schedule::constant(1.0),
        Schedule::polynomial(1.0, 0.5),
        Schedule::polynomial(1.0, 2.0),
        Schedule::harmonic(2.0, 0.5),
    ];
    let mut worst: f64 = 0.0;
    let mut trivial = Vec::new();
    for s in &schedules {
        for n in [1, 10, 1000] {
            for target in [0.1, 1.0, 7.0] {
                let b = discrete_noise_schedule(s, n, target)?;
                let rho = accountant_rho(&b.eta, &b.sigma)?;
                // A single step of a vanishing schedule never touches the data.
                if b.eta.iter().all(|e| *e == 0.0) {
                    if rho != 0.0 {
                        return outcome(false, format!("{} n={n}: zero steps but rho = {rho}", s.label()));
                    }
                    trivial.push(format!("{} n={n}", s.label()));
                    continue;
                }
                worst = worst.max((rho - target).abs() / target);
            }
        }
    }
    trivial.dedup();
    outcome(
        worst <= 1e-12,
        format!("worst relative error {worst:.2e}; all-zero step sizes (rho = 0): {}", trivial.join(", ")),
    )
}

fn ode_self_consistency() -> Result<Outcome> {
    let grid = uniform_grid(1e-4);
    let mut worst: f64 = 0.0;
    for spectrum in [SpectrumModel::identity(1000), SpectrumModel::uniform(1000)] {
        for alpha in [0.0, 0.5] {
            let p = fig1_problem(&spectrum, &half(), alpha)?;
            let curve = integrate(&p, &grid)?;
            worst = worst.max(implicit_residual(&curve, &p));
        }
    }
    let p = OdeProblem::from_models(
        &SpectrumModel::power_law(0.25, 10_000),
        &TargetModel::aligned(0.5),
        Schedule::polynomial(3.0, 0.5),
        1.0,
        1.0,
        0.1,
        0.3,
    )?;
    let power = implicit_residual(&integrate(&p, &grid)?, &p);
    worst = worst.max(power);
    outcome(worst <= 1e-3, format!("sup residual {worst:.2e} (power-law case {power:.2e})"))
}

fn fig1_replication() -> Result<Outcome> {
    let report = run_ode_vs_sim(&OdeVsSimConfig::default(), 0)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for spectrum in ["identity", "uniform_0_2"] {
        for alpha in [0.0, 0.5] {
            let devs: Vec<f64> = [10, 100, 1000]
                .iter()
                .map(|&d| {
                    report
                        .rows
                        .iter()
                        .find(|r| r.spectrum == spectrum && r.alpha == alpha && r.d == d)
                        .expect("row present")
                        .sup_deviation
                })
                .collect();
            let ok = devs[2] <= 0.05 && devs[0] > devs[1] && devs[1] > devs[2];
            pass &= ok;
            parts.push(format!("{spectrum} a={alpha}: {:.4}/{:.4}/{:.4}", devs[0], devs[1], devs[2]));
        }
    }
    outcome(pass, format!("sup deviation at d=10/100/1000: {}", parts.join("; ")))
}

fn last_iterate_jump() -> Result<Outcome> {
    let config = RunConfig {
        n: 10_000,
        spectrum: SpectrumModel::identity(1000),
        target: half(),
        zeta: 0.3,
        c: 1.0,
        schedule: Schedule::constant(3.0),
        rho: 1.0,
        seed: 0,
        trials: 20,
        record_grid: 1,
    };
    let (jump, predicted) = last_step_jump(&config)?;
    let rel = (jump - predicted).abs() / predicted;
    outcome(rel <= 0.2, format!("mean jump {jump:.4}, predicted {predicted:.4}, relative gap {rel:.3}"))
}

fn sandwich() -> Result<Outcome> {
    let grid = uniform_grid(1e-3);
    let mut pass = true;
    let mut parts = Vec::new();
    for (spectrum, exact) in [(SpectrumModel::identity(1000), true), (SpectrumModel::uniform(1000), false)] {
        for alpha in [0.0, 0.5] {
            let p = fig1_problem(&spectrum, &half(), alpha)?;
            let r = integrate(&p, &grid)?;
            let (upper, lower) = sandwich_bounds(&p, &grid)?;
            let mut violation: f64 = 0.0;
            let mut gap: f64 = 0.0;
            for j in 0..grid.len() {
                let tol = 1e-12 * r.r[j].abs().max(1.0);
                violation = violation.max(lower.r[j] - r.r[j] - tol).max(r.r[j] - upper.r[j] - tol);
                gap = gap.max((upper.r[j] - r.r[j]).abs()).max((r.r[j] - lower.r[j]).abs());
            }
            let ok = violation <= 0.0 && (!exact || gap <= 1e-9);
            pass &= ok;
            parts.push(format!("{} a={alpha}: max gap {gap:.2e}", if exact { "identity" } else { "uniform_0_2" }));
        }
    }
    outcome(pass, parts.join("; "))
}

fn case(phi: f64, psi: f64, alpha: f64, b: f64) -> ScalingCase {
    ScalingCase { phi, psi, alpha, b }
}

fn slopes(config: ScalingLawConfig) -> Result<Outcome> {
    let report = run_scaling_law(&config)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for row in &report.rows {
        pass &= row.status != SlopeStatus::Mismatch;
        let c = row.case;
        parts.push(format!(
            "({},{},{},{}) slope {:.3} vs {:.3} [{:?}]",
            c.phi, c.psi, c.alpha, c.b, row.slope, row.h_predicted, row.status
        ));
    }
    outcome(pass, parts.join("; "))
}

fn scaling_slopes() -> Result<Outcome> {
    slopes(ScalingLawConfig {
        d: 100_000,
        cases: vec![case(0.0, 0.0, 0.0, 0.0), case(0.0, 0.0, 0.0, 0.5), case(0.25, 0.5, 0.0, 0.0), case(0.25, 0.5, 0.0, 0.5)],
        tolerance: 0.05,
        ..Default::default()
    })
}

fn ill_conditioned_slope() -> Result<Outcome> {
    slopes(ScalingLawConfig { d: 10_000, cases: vec![case(0.8, 0.0, 10.0, 0.5)], tolerance: 0.07, ..Default::default() })
}

fn heatmap_structure() -> Result<Outcome> {
    let config = HeatmapConfig {
        d: 100,
        spectrum: SpectrumKind::Identity,
        gammas: vec![0.01],
        alphas: vec![0.0, 0.5],
        rho: 0.1,
        engine: HeatmapEngine::Simulation,
        ..Default::default()
    };
    let report = run_heatmap(&config, 0)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for panel in &report.panels {
        let (m, agg) = (panel.argmin, panel.aggressive_check);
        let ok = m.c <= 1.0 && m.eta0 <= 2.0 / panel.gamma && agg.risk > m.risk;
        pass &= ok;
        parts.push(format!(
            "a={}: argmin c={:.3} eta0={:.2} R={:.4}, R(10c*)={:.4}",
            panel.alpha, m.c, m.eta0, m.risk, agg.risk
        ));
    }
    outcome(pass, parts.join("; "))
}

fn schedule_dominance() -> Result<Outcome> {
    let config = SchedulesConfig { spectra: vec![SpectrumKind::Identity], ns: vec![1_000, 1_000_000], ..Default::default() };
    let report = run_schedules_compare(&config)?;
    let at = |n: usize| -> (f64, f64, f64) {
        let rows: Vec<_> = report.rows.iter().filter(|r| r.n == n).collect();
        let poly = rows
            .iter()
            .filter(|r| !matches!(r.schedule, Schedule::Harmonic { .. }))
            .map(|r| r.r_star)
            .fold(f64::INFINITY, f64::min);
        let harm = rows.iter().find(|r| matches!(r.schedule, Schedule::Harmonic { .. })).unwrap().r_star;
        let constant = rows.iter().find(|r| matches!(r.schedule, Schedule::Constant { .. })).unwrap().r_star;
        (poly, harm, constant)
    };
    let (poly_l, harm_l, _) = at(1_000_000);
    let (poly_s, _, const_s) = at(1_000);
    let (hr, cr) = (harm_l / poly_l, const_s / poly_s);
    outcome(
        hr <= 1.05 && cr <= 1.05,
        format!("n=1e6: harmonic/best polynomial {hr:.4}; n=1e3: constant/best {cr:.4}"),
    )
}

type Criterion = (&'static str, fn() -> Result<Outcome>);

const CRITERIA: &[Criterion] = &[
    ("clipping factors vs closed form and Monte Carlo", clipping_factors),
    ("accountant round trip", accountant_round_trip),
    ("ODE implicit-equation residual", ode_self_consistency),
    ("simulation tracks the ODE", fig1_replication),
    ("last-iterate jump", last_iterate_jump),
    ("sandwich bounds", sandwich),
    ("scaling-law slopes, well conditioned", scaling_slopes),
    ("scaling-law slope, ill conditioned", ill_conditioned_slope),
    ("heatmap structure", heatmap_structure),
    ("schedule dominance", schedule_dominance),
];

fn fmt_time(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    // `cargo test -- --list` and friends expect harness behaviour; answer trivially.
    if args.iter().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let only: Option<Vec<usize>> = std::env::var("DPGD_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let strict = std::env::var("DPGD_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let total = Instant::now();
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, f)) in CRITERIA.iter().enumerate() {
        let k = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&k)) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let (pass, detail) = match f() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "[{k:>2}] {} {name} ({}): {detail}",
            if pass { "PASS" } else { "FAIL" },
            fmt_time(start.elapsed())
        );
    }
    println!("acceptance: {}/{ran} passed in {}", ran - failed, fmt_time(total.elapsed()));
    if strict && failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
