use dpgd::spectrum::{kernels, mode_energies, SpectrumModel, TargetModel};
use dpgd::Error;
use dpgd::numerics::linear_fit;
use proptest::prelude::*;

fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(&lx, &ly).0
}

#[test]
fn kernel_tail_slopes() {
    let (phi, psi, d) = (0.25, 0.5, 100_000);
    let lambda = SpectrumModel::power_law(phi, d).eigenvalues().unwrap();
    let d0 = mode_energies(&lambda, &TargetModel::aligned(psi), Some(phi)).unwrap().d0;
    let xs: Vec<f64> = (0..9).map(|i| 10f64.powf(1.0 + 0.25 * i as f64)).collect();
    let ks: Vec<_> = xs.iter().map(|&x| kernels(&lambda, &d0, x).unwrap()).collect();
    let f = log_slope(&xs, &ks.iter().map(|k| k.f).collect::<Vec<_>>());
    let k = log_slope(&xs, &ks.iter().map(|k| k.k).collect::<Vec<_>>());
    let j = log_slope(&xs, &ks.iter().map(|k| k.j).collect::<Vec<_>>());
    assert!((f + (2.0 - phi - psi)).abs() <= 0.05, "F slope {f}");
    assert!((k + (3.0 - phi)).abs() <= 0.05, "K slope {k}");
    assert!((j + (2.0 - phi)).abs() <= 0.05, "J slope {j}");
}

#[test]
fn rejects_bad_models() {
    assert!(matches!(SpectrumModel::power_law(1.0, 10).eigenvalues(), Err(Error::InvalidExponent(_))));
    let lambda = SpectrumModel::power_law(0.5, 10).eigenvalues().unwrap();
    assert!(matches!(
        mode_energies(&lambda, &TargetModel::aligned(0.6), Some(0.5)),
        Err(Error::AlignmentExponent { .. })
    ));
    assert!(kernels(&lambda, &lambda, -1.0).is_err());
    assert!(SpectrumModel::explicit(vec![1.0, -1.0]).eigenvalues().is_err());
}

#[test]
fn isotropic_energy() {
    let lambda = SpectrumModel::uniform(100).eigenvalues().unwrap();
    let e = mode_energies(&lambda, &TargetModel::Isotropic { norm_sq: 1.0 }, None).unwrap();
    assert!((e.initial_risk(&lambda) - 0.5).abs() < 1e-12);
    let norm: f64 = e.target().iter().map(|t| t * t).sum();
    assert!((norm - 1.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn trace_normalized(phi in -1.0f64..0.95, d in 1usize..3000) {
        let l = SpectrumModel::power_law(phi, d).eigenvalues().unwrap();
        let sum: f64 = l.iter().sum();
        prop_assert!((sum / d as f64 - 1.0).abs() < 1e-10);
        prop_assert!(l.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(l.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn kernels_bounded_near_zero(phi in 0.0f64..0.9, x in 0.0f64..1.0) {
        let l = SpectrumModel::power_law(phi, 2000).eigenvalues().unwrap();
        let d0 = mode_energies(&l, &TargetModel::aligned(0.0), Some(phi)).unwrap().d0;
        let k = kernels(&l, &d0, x).unwrap();
        let at0 = kernels(&l, &d0, 0.0).unwrap();
        prop_assert!(k.f <= at0.f && k.k <= at0.k && k.j <= at0.j);
        prop_assert!(k.f.is_finite() && k.k.is_finite() && k.j.is_finite());
        prop_assert!((at0.j - 1.0).abs() < 1e-10);
    }
}
