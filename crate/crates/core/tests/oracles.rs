mod common;

use common::*;
use prefscreen_core::gp::KernelSpec;
use prefscreen_core::preference::{laplace_fit, predict_preference, PreferenceDatum};
use prefscreen_core::rng::seeded;

#[test]
fn laplace_mode_matches_brute_force() {
    let err = laplace_mode_error(60, 1);
    assert!(err <= 1e-4, "max coordinate error {err:e}");
}

#[test]
fn laplace_predictive_matches_dense_formula() {
    let err = laplace_predictive_error(30, 2);
    assert!(err <= 1e-6, "max moment error {err:e}");
}

#[test]
fn gp_posterior_matches_dense_inverse() {
    let r = gp_dense_check(3);
    assert_eq!(r.jitter, 0.0);
    assert!(r.posterior_error <= 1e-9, "posterior error {:e}", r.posterior_error);
    assert!(r.lml_error <= 1e-9, "log marginal likelihood error {:e}", r.lml_error);
}

#[test]
fn sampled_acquisition_matches_quadrature() {
    let err = mc_vs_quadrature_error(100_000, 4);
    assert!(err <= 1e-2, "max gap {err:e}");
}

#[test]
fn thompson_argmax_frequencies_match_exact_probabilities() {
    let r = thompson_frequency_check(10_000, 5);
    assert!((r.exact.iter().sum::<f64>() - 1.0).abs() < 1e-6, "{:?}", r.exact);
    assert!(
        r.exact.iter().all(|&p| p > 0.05),
        "toy should not be degenerate: {:?}",
        r.exact
    );
    assert!(r.max_error <= 0.02, "exact {:?} empirical {:?}", r.exact, r.empirical);
}

#[test]
fn quadrature_rule_integrates_moments() {
    // E[X²] = σ² + μ², E[X⁴] = μ⁴ + 6μ²σ² + 3σ⁴.
    let (m, v) = (0.7, 2.3);
    assert!((normal_expectation(m, v, 20, |x| x * x) - (v + m * m)).abs() < 1e-12);
    let fourth = m.powi(4) + 6.0 * m * m * v + 3.0 * v * v;
    assert!((normal_expectation(m, v, 20, |x| x.powi(4)) - fourth).abs() < 1e-10);
}

#[test]
fn marginal_preference_matches_quadrature() {
    let pts = [vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
    let data = vec![
        PreferenceDatum::new(pts[1].clone(), pts[0].clone()),
        PreferenceDatum::new(pts[1].clone(), pts[2].clone()),
    ];
    let model = laplace_fit(&data, &KernelSpec::rbf(vec![1.0; 2], 2.0)).unwrap();
    let (a, b) = (vec![0.8, 0.3], vec![-0.4, 0.9]);
    let (mu, cov) = model.joint_posterior(&[a.clone(), b.clone()]).unwrap();
    let d_var = cov[(0, 0)] + cov[(1, 1)] - 2.0 * cov[(0, 1)];
    let exact = normal_expectation(mu[0] - mu[1], d_var, 60, |d| 1.0 / (1.0 + (-d).exp()));
    let sampled = predict_preference(&model, &a, &b, 100_000, &mut seeded(6)).unwrap();
    assert!((sampled - exact).abs() < 1e-2, "{sampled} vs {exact}");
    // Marginalizing pulls the probability toward one half.
    let plug_in = predict_preference(&model, &a, &b, 0, &mut seeded(6)).unwrap();
    assert!((exact - 0.5).abs() < (plug_in - 0.5).abs());
}

#[test]
fn hyperparameter_search_matches_grid_optimum() {
    let (found, grid) = hyperopt_vs_grid(7);
    // The grid is coarse, so the optimizer may beat it but not lose.
    assert!(found >= grid - 1e-6, "optimizer {found} vs grid {grid}");
    assert!(
        found - grid < 0.05,
        "grid should bracket the optimum: {found} vs {grid}"
    );
}
