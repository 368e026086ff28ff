use dpgd::privacy::{accountant_rho, discrete_noise_schedule, noise_for_steps, zcdp_to_approx_dp};
use dpgd::schedule::Schedule;
use dpgd::Error;
use proptest::prelude::*;

#[test]
fn constant_schedule_single_spike() {
    let (n, rho, eta0) = (50, 0.5, 2.0);
    let b = discrete_noise_schedule(&Schedule::constant(eta0), n, rho).unwrap();
    assert!(b.sigma[..n - 1].iter().all(|s| *s == 0.0));
    let last = b.sigma[n - 1];
    let expected = eta0 * eta0 / ((n * n) as f64 * rho * rho);
    assert!((last * last - expected).abs() < 1e-15 * expected);
}

#[test]
fn epsilon_conversion() {
    let e = zcdp_to_approx_dp(1.0, 1e-5).unwrap();
    assert!((e - 5.298_526).abs() < 1e-6);
    assert!(zcdp_to_approx_dp(1.0, 0.0).is_err());
    assert!(zcdp_to_approx_dp(1.0, 1.0).is_err());
}

#[test]
fn increasing_and_unprotected_steps() {
    assert!(matches!(noise_for_steps(&[1.0, 2.0], 1.0), Err(Error::NegativeVariance { step: 1, next: 2 })));
    assert!(matches!(
        accountant_rho(&[1.0, 1.0], &[0.0, 0.0]),
        Err(Error::InfinitePrivacyLoss { step: 2 })
    ));
    assert!(accountant_rho(&[1.0], &[1.0, 2.0]).is_err());
    assert!(discrete_noise_schedule(&Schedule::constant(1.0), 0, 1.0).is_err());
    assert!(discrete_noise_schedule(&Schedule::constant(1.0), 5, 0.0).is_err());
}

#[test]
fn round_trip_battery() {
    let schedules = [
        Schedule::constant(1.0),
        Schedule::polynomial(1.0, 0.5),
        Schedule::polynomial(1.0, 2.0),
        Schedule::harmonic(2.0, 0.5),
    ];
    for s in &schedules {
        for n in [1, 10, 1000] {
            let b = discrete_noise_schedule(s, n, 0.3).unwrap();
            let rho = accountant_rho(&b.eta, &b.sigma).unwrap();
            if b.eta.iter().all(|e| *e == 0.0) {
                assert_eq!(rho, 0.0);
            } else {
                assert!((rho - 0.3).abs() <= 1e-12 * 0.3, "{} n={n}: {rho}", s.label());
            }
        }
    }
}

#[test]
fn riemann_consistency() {
    let n = 10_000;
    let rho = 0.7;
    for alpha in [1.0, 2.0, 3.5] {
        let s = Schedule::polynomial(2.0, alpha);
        let b = discrete_noise_schedule(&s, n, rho).unwrap();
        for t in [0.1, 0.3, 0.5, 0.8] {
            let k = (t * n as f64) as usize;
            let scaled = (n as f64).powi(3) * rho * rho * b.sigma[k - 1].powi(2);
            let rate = s.noise_rate(k as f64 / n as f64).unwrap();
            assert!((scaled - rate).abs() <= 0.05 * rate, "alpha={alpha} t={t}: {scaled} vs {rate}");
        }
    }
}

proptest! {
    #[test]
    fn round_trip_random(eta0 in 0.01f64..100.0, alpha in 0.0f64..6.0, n in 2usize..400, lrho in -2.0f64..2.0) {
        let rho = 10f64.powf(lrho);
        let b = discrete_noise_schedule(&Schedule::polynomial(eta0, alpha), n, rho).unwrap();
        let got = accountant_rho(&b.eta, &b.sigma).unwrap();
        prop_assert!((got - rho).abs() <= 1e-12 * rho);
    }

    #[test]
    fn harmonic_round_trip(beta in 0.01f64..10.0, tau in 0.01f64..10.0, n in 1usize..400) {
        let b = discrete_noise_schedule(&Schedule::harmonic(beta, tau), n, 1.0).unwrap();
        let got = accountant_rho(&b.eta, &b.sigma).unwrap();
        prop_assert!((got - 1.0).abs() <= 1e-12);
    }
}
