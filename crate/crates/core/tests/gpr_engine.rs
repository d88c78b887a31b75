use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use visco_surrogate::gpr::{fit, fit_constrained, kernel_eval, ConstraintSet, FitOptions, KernelParams};
use visco_surrogate::Error;

fn sample(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(0.0..1.0)]).collect();
    let y = x
        .iter()
        .map(|p| vec![(1.5 * p[0]).sin() + p[1] * p[1], 0.3 * p[0] - (2.0 * p[1]).cos()])
        .collect();
    (x, y)
}

#[test]
fn likelihood_gradient_matches_finite_differences() {
    let (x, y) = sample(30, 1);
    let m = fit(&x, &y, &FitOptions::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..20 {
        let theta = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..1.5)];
        let (_, grad) = m.log_likelihood_with_gradient(theta).unwrap();
        for k in 0..2 {
            let h = 1e-5;
            let mut p = theta;
            let mut q = theta;
            p[k] += h;
            q[k] -= h;
            let fd = (m.log_likelihood(p).unwrap() - m.log_likelihood(q).unwrap()) / (2.0 * h);
            let rel = (fd - grad[k]).abs() / grad[k].abs().max(1e-3);
            assert!(rel < 1e-4, "theta {theta:?} component {k}: fd {fd} vs analytic {}", grad[k]);
        }
    }
}

#[test]
fn exact_inference_with_vanishing_noise() {
    let (x, y) = sample(15, 2);
    let opts = FitOptions {
        alpha: 1e-10,
        ..FitOptions::default()
    };
    let m = fit(&x, &y, &opts).unwrap();
    let scale = m.standardization().y_scale.clone();
    for (xi, yi) in x.iter().zip(&y) {
        let p = m.predict(xi);
        for k in 0..2 {
            assert!((p[k] - yi[k]).abs() < 1e-6 * scale[k], "{p:?} vs {yi:?}");
        }
        assert!(m.predict_variance(xi) < 1e-6);
    }
}

#[test]
fn far_field_recovers_the_prior() {
    let (x, y) = sample(20, 3);
    let m = fit(&x, &y, &FitOptions::default()).unwrap();
    let p = m.params();
    let far = vec![1e6, -1e6];
    let prior = p.sigma_f * p.sigma_f + p.alpha;
    assert!((m.predict_variance(&far) - prior).abs() <= 1e-12 * prior);
    let mean = m.predict(&far);
    for k in 0..2 {
        assert!((mean[k] - m.standardization().y_mean[k]).abs() < 1e-9);
    }
}

#[test]
fn maximum_likelihood_improves_on_the_starts() {
    for seed in 0..4 {
        let (x, y) = sample(25, 10 + seed);
        let m = fit(&x, &y, &FitOptions { seed, ..FitOptions::default() }).unwrap();
        let d = m.diagnostics();
        assert!(d.log_likelihood >= d.initial_log_likelihood, "{d:?}");
        assert!((m.log_likelihood(m.theta()).unwrap() - d.log_likelihood).abs() < 1e-9 * d.log_likelihood.abs().max(1.0));
    }
}

#[test]
fn same_seed_same_model() {
    let (x, y) = sample(25, 4);
    let a = fit(&x, &y, &FitOptions { seed: 7, ..FitOptions::default() }).unwrap();
    let b = fit(&x, &y, &FitOptions { seed: 7, ..FitOptions::default() }).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
}

#[test]
fn serialized_model_predicts_identically() {
    let (x, y) = sample(12, 5);
    let a = fit(&x, &y, &FitOptions::default()).unwrap();
    let b = visco_surrogate::gpr::GpModel::from_json(&a.to_json().unwrap()).unwrap();
    for q in [[0.1, 0.2], [-1.5, 0.9], [3.0, -1.0]] {
        assert_eq!(a.predict(&q), b.predict(&q));
    }
}

#[test]
fn kernel_matrix_of_fitted_model_is_symmetric() {
    let (x, y) = sample(20, 6);
    let m = fit(&x, &y, &FitOptions::default()).unwrap();
    assert_eq!(m.kernel_asymmetry(), 0.0);
}

#[test]
fn duplicates_are_merged_or_rejected() {
    let (mut x, mut y) = sample(10, 7);
    x.push(x[3].clone());
    y.push(y[3].clone());
    let m = fit(&x, &y, &FitOptions::default()).unwrap();
    assert_eq!(m.diagnostics().merged_duplicates, 1);
    assert_eq!(m.n_train(), 10);
    y[10][0] += 1.0;
    assert!(matches!(fit(&x, &y, &FitOptions::default()), Err(Error::Fit(_))));
}

#[test]
fn constrained_fit_satisfies_every_constraint() {
    // targets dip below zero; require non-negative predictions on a grid
    let x: Vec<Vec<f64>> = (0..15).map(|i| vec![i as f64 / 14.0]).collect();
    let y: Vec<Vec<f64>> = x.iter().map(|p| vec![(6.0 * p[0]).sin() + 0.9]).collect();
    let points: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 39.0]).collect();
    let set = ConstraintSet::new(points.clone(), vec![vec![1.0]; 40]).unwrap();
    let m = fit_constrained(&x, &y, &FitOptions::default(), &set).unwrap();
    for g in m.constraint_values(&set) {
        assert!(g >= -1e-8, "{g}");
    }
    assert!(m.diagnostics().constraint_min.unwrap() >= -1e-8);
}

#[test]
fn impossible_constraints_are_reported() {
    let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
    let y: Vec<Vec<f64>> = x.iter().map(|p| vec![-1.0 - p[0]]).collect();
    let set = ConstraintSet::new(x.clone(), vec![vec![1.0]; 8]).unwrap();
    let opts = FitOptions {
        alpha: 1e-8,
        ..FitOptions::default()
    };
    assert!(matches!(fit_constrained(&x, &y, &opts, &set), Err(Error::Infeasible { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_symmetric_and_positive_semidefinite(
        pts in prop::collection::vec(prop::array::uniform3(-3.0f64..3.0), 2..12),
        log_sf in -2.0f64..2.0,
        log_l in -2.0f64..2.0,
    ) {
        let p = KernelParams::from_theta([log_sf, log_l], 0.0);
        let n = pts.len();
        let k = DMatrix::from_fn(n, n, |i, j| kernel_eval(&pts[i], &pts[j], &p));
        prop_assert_eq!(&k, &k.transpose());
        let eig = SymmetricEigen::new(k.clone());
        let floor = -1e-10 * k.amax();
        prop_assert!(eig.eigenvalues.iter().all(|&v| v >= floor), "{:?}", eig.eigenvalues);
    }
}
