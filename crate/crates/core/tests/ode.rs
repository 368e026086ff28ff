use dpgd::ode::{
    gamma_bound, integrate, integrate_volterra, sandwich_bounds, uniform_grid, OdeProblem, SpectralKernels,
};
use dpgd::schedule::Schedule;
use dpgd::spectrum::{SpectrumModel, TargetModel};
use proptest::prelude::*;

fn problem(spectrum: SpectrumModel, schedule: Schedule, rho: f64, gamma: f64) -> OdeProblem {
    OdeProblem::from_models(&spectrum, &TargetModel::Isotropic { norm_sq: 1.0 }, schedule, 1.0, rho, gamma, 0.3).unwrap()
}

#[test]
fn refinement_converges() {
    let p = problem(SpectrumModel::uniform(200), Schedule::polynomial(3.0, 0.5), 1.0, 0.1);
    let finals: Vec<f64> =
        [4e-3, 2e-3, 1e-3, 5e-4].iter().map(|&dt| integrate(&p, &uniform_grid(dt)).unwrap().terminal_risk()).collect();
    let diffs: Vec<f64> = finals.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
    assert!(diffs[2] < 1e-6, "{diffs:?}");
    assert!(diffs[0] >= diffs[1] && diffs[1] >= diffs[2], "{diffs:?}");
}

#[test]
fn identity_sandwich_is_tight_and_uniform_brackets() {
    let grid = uniform_grid(1e-3);
    let p = problem(SpectrumModel::identity(50), Schedule::constant(3.0), 1.0, 0.1);
    let r = integrate(&p, &grid).unwrap();
    let (up, lo) = sandwich_bounds(&p, &grid).unwrap();
    for j in 0..grid.len() {
        assert!((up.r[j] - r.r[j]).abs() < 1e-9 && (lo.r[j] - r.r[j]).abs() < 1e-9);
    }
    let p = problem(SpectrumModel::uniform(300), Schedule::polynomial(3.0, 0.5), 1.0, 0.1);
    let r = integrate(&p, &grid).unwrap();
    let (up, lo) = sandwich_bounds(&p, &grid).unwrap();
    for j in 0..grid.len() {
        assert!(lo.r[j] <= r.r[j] + 1e-12 && r.r[j] <= up.r[j] + 1e-12, "t = {}", grid[j]);
    }
}

#[test]
fn volterra_matches_modes() {
    let p = OdeProblem::from_models(
        &SpectrumModel::power_law(0.25, 2000),
        &TargetModel::aligned(0.5),
        Schedule::polynomial(2.0, 1.0),
        0.1,
        0.5,
        0.01,
        0.3,
    )
    .unwrap();
    let grid = uniform_grid(1e-3);
    let kernels = SpectralKernels::new(&p.lambda, &p.d0, gamma_bound(&p));
    let a = integrate(&p, &grid).unwrap();
    let b = integrate_volterra(&p, &kernels, &grid).unwrap();
    let rel = (a.final_private_risk - b.final_private_risk).abs() / a.final_private_risk;
    assert!(rel < 1e-3, "{} vs {}", a.final_private_risk, b.final_private_risk);
}

#[test]
fn last_iterate_correction() {
    let p = problem(SpectrumModel::identity(10), Schedule::constant(3.0), 1.0, 0.1);
    let c = integrate(&p, &uniform_grid(1e-2)).unwrap();
    assert!((c.final_private_risk - c.terminal_risk() - 0.18).abs() < 1e-12);
    let p = problem(SpectrumModel::identity(10), Schedule::polynomial(3.0, 1.0), 1.0, 0.1);
    let c = integrate(&p, &uniform_grid(1e-2)).unwrap();
    assert_eq!(c.final_private_risk, c.terminal_risk());
}

#[test]
fn rejects_bad_inputs() {
    let s = Schedule::constant(1.0);
    assert!(OdeProblem::new(vec![], vec![], s.clone(), 1.0, 1.0, 0.1, 0.3).is_err());
    assert!(OdeProblem::new(vec![1.0], vec![1.0, 1.0], s.clone(), 1.0, 1.0, 0.1, 0.3).is_err());
    assert!(OdeProblem::new(vec![1.0], vec![-1.0], s.clone(), 1.0, 1.0, 0.1, 0.3).is_err());
    assert!(OdeProblem::new(vec![1.0], vec![1.0], s.clone(), 0.0, 1.0, 0.1, 0.3).is_err());
    assert!(OdeProblem::new(vec![1.0], vec![1.0], s, 1.0, 1.0, -0.1, 0.3).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn risk_stays_positive(eta0 in 0.1f64..15.0, alpha in prop::sample::select(vec![0.0, 0.5, 1.0, 2.0]),
                           lc in -2.0f64..1.0, lrho in -1.0f64..1.0, lg in -3.0f64..-0.5) {
        let spectrum = SpectrumModel::uniform(64);
        let p = OdeProblem::from_models(
            &spectrum, &TargetModel::Isotropic { norm_sq: 1.0 }, Schedule::polynomial(eta0, alpha),
            10f64.powf(lc), 10f64.powf(lrho), 10f64.powf(lg), 0.3,
        ).unwrap();
        let c = integrate(&p, &uniform_grid(2e-3)).unwrap();
        prop_assert!(c.r.iter().all(|r| *r >= 0.0 && r.is_finite()));
    }

    #[test]
    fn more_privacy_budget_lowers_risk(rho in 0.05f64..2.0, eta0 in 0.5f64..8.0) {
        let lo = problem(SpectrumModel::uniform(32), Schedule::polynomial(eta0, 0.5), rho, 0.05);
        let mut hi = lo.clone();
        hi.rho = 2.0 * rho;
        let grid = uniform_grid(2e-3);
        let (a, b) = (integrate(&lo, &grid).unwrap(), integrate(&hi, &grid).unwrap());
        prop_assert!(b.final_private_risk <= a.final_private_risk + 1e-12);
    }
}
