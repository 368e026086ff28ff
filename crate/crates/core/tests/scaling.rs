use dpgd::ode::OdeProblem;
use dpgd::scaling::{
    fit_slope, optimize_eta0, predicted_exponent, tune_harmonic, Engine, EtaSearch, Evaluator, HarmonicSearch,
    ScalingCase,
};
use dpgd::schedule::Schedule;
use dpgd::spectrum::{SpectrumModel, TargetModel};
use proptest::prelude::*;

fn alpha_strategy() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(0.5), 1.0f64..20.0]
}

#[test]
fn exact_power_law_slope() {
    let gammas: Vec<f64> = (0..7).map(|i| 10f64.powf(-3.5 + i as f64 / 3.0)).collect();
    let r: Vec<f64> = gammas.iter().map(|g| 1.7 * g.powf(0.61)).collect();
    let (slope, intercept) = fit_slope(&gammas, &r).unwrap();
    assert!((slope - 0.61).abs() < 1e-12 && (intercept - 1.7f64.ln()).abs() < 1e-12);
    assert!(fit_slope(&gammas, &[0.0; 7]).is_err());
}

#[test]
fn harmonic_dominates_on_identity_at_large_n() {
    let d = 100;
    let gamma = 1e-3;
    let base = OdeProblem::from_models(
        &SpectrumModel::identity(d),
        &TargetModel::Isotropic { norm_sq: 1.0 },
        Schedule::constant(1.0),
        0.1,
        0.1,
        gamma,
        0.3,
    )
    .unwrap();
    let eval = Evaluator::new(&base, Engine::Volterra, base.rate_cap());
    let mut best_poly = f64::INFINITY;
    for alpha in [0.0, 0.5, 1.0, 2.0] {
        let mut p = base.clone();
        p.schedule = Schedule::polynomial(1.0, alpha);
        best_poly = best_poly.min(optimize_eta0(&p, &eval, &EtaSearch::default()).unwrap().1);
    }
    let search = HarmonicSearch { points: 8, refine_rounds: 2, ..HarmonicSearch::around(&base) };
    let (_, _, harmonic) = tune_harmonic(&base, &eval, &search).unwrap();
    assert!(harmonic <= 1.05 * best_poly, "{harmonic} vs {best_poly}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn exponent_is_total(phi in -2.0f64..1.0, frac in 0.0f64..1.0, alpha in alpha_strategy(), b in -1.0f64..1.0) {
        let psi = -1.0 + frac * (2.0 - phi) ;
        prop_assume!(psi < 1.0 - phi);
        let e = predicted_exponent(&ScalingCase { phi, psi, alpha, b }).unwrap();
        prop_assert!(e.h.is_finite() && (1..=4).contains(&e.branch));
        if b >= 0.0 && phi >= 0.0 && psi >= 0.0 {
            prop_assert!(e.a > -1.0 && e.a < 0.0, "a = {}", e.a);
            prop_assert!(e.h > 0.0);
        }
    }
}

proptest! {
    #[test]
    fn h_non_decreasing_in_alpha(phi in 0.0f64..0.9, frac in 0.0f64..1.0, b in 0.0f64..0.95) {
        let psi = frac * (1.0 - phi) * 0.999;
        let mut prev = f64::NEG_INFINITY;
        for alpha in [0.0, 0.5, 1.0, 2.0, 5.0, 10.0] {
            let h = predicted_exponent(&ScalingCase { phi, psi, alpha, b }).unwrap().h;
            prop_assert!(h >= prev - 1e-12, "alpha = {alpha}: {h} < {prev}");
            prev = h;
        }
    }
}
