use dpgd::rng::StreamKey;
use dpgd::schedule::Schedule;
use dpgd::sim::{dpgd_update, run_dpgd, RunConfig};
use dpgd::spectrum::{SpectrumModel, TargetModel};
use proptest::prelude::*;

fn config(d: usize, n: usize, seed: u64) -> RunConfig {
    RunConfig {
        n,
        spectrum: SpectrumModel::uniform(d),
        target: TargetModel::Isotropic { norm_sq: 1.0 },
        zeta: 0.3,
        c: 1.0,
        schedule: Schedule::polynomial(3.0, 0.5),
        rho: 1.0,
        seed,
        trials: 3,
        record_grid: 10,
    }
}

#[test]
fn deterministic_per_seed() {
    let a = run_dpgd(&config(20, 200, 7)).unwrap();
    let b = run_dpgd(&config(20, 200, 7)).unwrap();
    let c = run_dpgd(&config(20, 200, 8)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.final_risks, c.final_risks);
    assert_eq!(a.steps.len(), 11);
    assert_eq!(a.t.last(), Some(&1.0));
}

#[test]
fn noise_has_the_prescribed_scale() {
    let d = 2000;
    let (sigma, c_clip) = (0.3, 1.5);
    let mut theta = vec![0.0; d];
    let x = vec![0.0; d];
    let mut rng = StreamKey::new(1, 99).at(0);
    let diag = dpgd_update(&mut theta, &x, 0.0, 1.0, sigma, c_clip, &mut rng);
    let var = theta.iter().map(|t| t * t).sum::<f64>() / d as f64;
    let expected = (2.0 * c_clip * sigma).powi(2);
    // sample variance of d squared normals: se = expected * sqrt(2/d)
    let se = expected * (2.0 / d as f64).sqrt();
    assert!((var - expected).abs() <= 3.0 * se, "{var} vs {expected}");
    assert!((diag.noise_norm - (var * d as f64).sqrt()).abs() < 1e-9);
}

proptest! {
    #[test]
    fn clipping_and_step_cap(xs in prop::collection::vec(-3.0f64..3.0, 1..20), y in -5.0f64..5.0,
                              c_clip in 0.01f64..10.0, eta in 0.0f64..10.0) {
        let mut theta = vec![0.1; xs.len()];
        let mut rng = StreamKey::new(0, 0).at(0);
        let diag = dpgd_update(&mut theta, &xs, y, eta, 0.0, c_clip, &mut rng);
        prop_assert!(diag.clipped_norm <= c_clip * (1.0 + 1e-12));
        if diag.grad_norm >= c_clip {
            prop_assert!((diag.clipped_norm - c_clip).abs() <= 1e-12 * c_clip);
        } else {
            prop_assert_eq!(diag.clipped_norm, diag.grad_norm);
        }
        if diag.x_norm_sq > 0.0 {
            prop_assert!(diag.eta_bar <= 2.0 / diag.x_norm_sq * (1.0 + 1e-15));
        }
        prop_assert!(diag.eta_bar <= eta);
        prop_assert_eq!(diag.noise_norm, 0.0);
    }
}
