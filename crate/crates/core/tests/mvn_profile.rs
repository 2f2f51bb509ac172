//! The multivariate model on a mineral-shaped problem: 53 observations in
//! 5 dimensions, 5 change points, segment mean vectors, and a common
//! covariance estimated through its Cholesky factor.

#![allow(
    clippy::needless_range_loop,
    clippy::type_complexity,
    clippy::too_many_arguments
)]

use cpmle_core::{
    fit, plugin_info, unpack_chol, ChangePointConfig, Dataset, FitOptions, ModelSpec,
    MvNormalCommonCov, ParameterState, SegmentFamily,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn synthetic_instance() -> (ModelSpec, Dataset, Vec<usize>, ParameterState) {
    let p = 5;
    let fam: Arc<dyn SegmentFamily> = Arc::new(MvNormalCommonCov::new(p).unwrap());
    let spec = ModelSpec::new(vec![fam; 6], None).unwrap();
    // well-separated segment means, one shared covariance
    let means = [
        [0.0, 0.0, 0.0, 0.0, 0.0],
        [6.0, -4.0, 2.0, 0.0, 1.0],
        [-3.0, 5.0, -2.0, 4.0, 0.0],
        [2.0, 2.0, 6.0, -5.0, 3.0],
        [-6.0, 0.0, 1.0, 5.0, -4.0],
        [4.0, -6.0, -4.0, -2.0, 6.0],
    ];
    let chol = [
        1.0, 0.3, 0.9, -0.2, 0.1, 1.1, 0.0, 0.4, -0.3, 0.8, 0.2, 0.0, 0.1, 0.0, 1.2,
    ];
    let boundaries = vec![7usize, 20, 24, 32, 41];
    let mut rng = ChaCha8Rng::seed_from_u64(0x53);
    let config = ChangePointConfig::new(boundaries.clone(), 53).unwrap();
    let mut values = Vec::with_capacity(53 * p);
    for j in 0..6 {
        for _ in config.segment_range(j) {
            spec.family(j)
                .sample_into(&chol, &means[j], &mut rng, &mut values)
                .unwrap();
        }
    }
    let data = Dataset::new(values, p).unwrap();
    let truth = ParameterState::new(chol.to_vec(), means.iter().map(|m| m.to_vec()).collect());
    (spec, data, boundaries, truth)
}

#[test]
fn five_change_points_recovered_in_five_dimensions() {
    let (spec, data, boundaries, truth) = synthetic_instance();
    let fitted = fit(&spec, &data, &FitOptions::default()).unwrap();
    assert_eq!(fitted.change_points.boundaries(), boundaries.as_slice());
    assert!(fitted.diagnostics.converged);

    // fitted covariance close to the generator's (moderate n, loose band)
    let l_hat = unpack_chol(&fitted.params.psi, 5);
    let cov_hat = &l_hat * l_hat.transpose();
    let l0 = unpack_chol(&truth.psi, 5);
    let cov0 = &l0 * l0.transpose();
    let rel = (cov_hat.clone() - cov0.clone()).norm() / cov0.norm();
    assert!(rel < 0.6, "relative covariance error {rel}");

    // segment means land near the generators
    for (j, m) in truth.thetas.iter().enumerate() {
        let err: f64 = fitted.params.thetas[j]
            .iter()
            .zip(m)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1.5, "segment {} mean error {err}", j + 1);
    }

    // information matrix assembles and inverts at the solution
    let info = plugin_info(&spec, &data, &fitted.change_points, &fitted.params).unwrap();
    assert_eq!(info.dim(), 15 + 30);
    assert!(fitted
        .std_errors
        .iter()
        .all(|se| se.is_finite() && *se > 0.0));
}

#[test]
fn deterministic_refit_reproduces_result() {
    let (spec, data, _, _) = synthetic_instance();
    let a = fit(&spec, &data, &FitOptions::default()).unwrap();
    let b = fit(&spec, &data, &FitOptions::default()).unwrap();
    assert_eq!(a.change_points.boundaries(), b.change_points.boundaries());
    assert_eq!(a.params.pack(), b.params.pack());
    assert_eq!(a.loglik, b.loglik);
}

#[test]
fn psi_grid_starts_reach_the_same_optimum() {
    let (spec, data, boundaries, truth) = synthetic_instance();
    let mut start = truth.psi.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for v in &mut start {
        *v += rng.random_range(-0.05..0.05);
    }
    let options = FitOptions {
        psi_starts: vec![start],
        ..FitOptions::default()
    };
    let fitted = fit(&spec, &data, &options).unwrap();
    assert_eq!(fitted.change_points.boundaries(), boundaries.as_slice());
}
