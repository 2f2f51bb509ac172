//! Information-matrix checks: the naive per-observation outer-product
//! oracle, block structure, exact doubling under duplication, and the
//! consistency trend of the scaled matrix.

mod common;

use common::rng;
use cpmle_core::inference::hessian_info;
use cpmle_core::{
    fit, plugin_info, sample, BlockBounds, ChangePointConfig, Dataset, Exponential, FitOptions,
    ModelSpec, NormalCommonVar, ParameterBox, ParameterState, SegmentFamily,
};
use nalgebra::DMatrix;
use rand::Rng;
use std::sync::Arc;

fn common_var_spec(k: usize) -> ModelSpec {
    let fam: Arc<dyn SegmentFamily> = Arc::new(NormalCommonVar::new());
    let theta = BlockBounds::new(vec![-50.0], vec![50.0]).unwrap();
    let bounds = ParameterBox::new(
        BlockBounds::new(vec![1e-4], vec![1e4]).unwrap(),
        vec![theta; k + 1],
    );
    ModelSpec::new(vec![fam; k + 1], Some(bounds)).unwrap()
}

fn mixed_instance(seed: u64) -> (ModelSpec, Dataset, ChangePointConfig, ParameterState) {
    let spec = common_var_spec(1);
    let mut r = rng(seed);
    let mut values = Vec::new();
    for _ in 0..20 {
        values.push(r.random_range(-1.0..1.0));
    }
    for _ in 0..15 {
        values.push(2.0 + r.random_range(-1.0..1.0));
    }
    let data = Dataset::univariate(values).unwrap();
    let cps = ChangePointConfig::new(vec![20], 35).unwrap();
    let params = ParameterState::new(vec![0.8], vec![vec![0.1], vec![1.9]]);
    (spec, data, cps, params)
}

/// Naive oracle: one packed gradient per observation with the theta block
/// masked to the owning segment, accumulated sequentially.
fn naive_info(
    spec: &ModelSpec,
    data: &Dataset,
    cps: &ChangePointConfig,
    params: &ParameterState,
) -> DMatrix<f64> {
    let dim = spec.packed_dim();
    let d = spec.psi_dim();
    let mut total = DMatrix::zeros(dim, dim);
    for j in 0..spec.n_segments() {
        let offset: usize = d + spec.theta_dims()[..j].iter().sum::<usize>();
        let family = spec.family(j);
        let psi = spec.psi_for_segment(j, &params.psi);
        for i in cps.segment_range(j) {
            let g = family
                .grad_log_density(psi, &params.thetas[j], data.row(i))
                .unwrap();
            let mut packed = vec![0.0; dim];
            packed[..psi.len()].copy_from_slice(&g[..psi.len()]);
            for (c, val) in g[psi.len()..].iter().enumerate() {
                packed[offset + c] = *val;
            }
            for a in 0..dim {
                for b in 0..dim {
                    total[(a, b)] += packed[a] * packed[b];
                }
            }
        }
    }
    total
}

#[test]
fn matches_naive_outer_product_loop() {
    let (spec, data, cps, params) = mixed_instance(0x1F0);
    let info = plugin_info(&spec, &data, &cps, &params).unwrap();
    let oracle = naive_info(&spec, &data, &cps, &params);
    for a in 0..info.dim() {
        for b in 0..info.dim() {
            assert!(
                (info.full()[(a, b)] - oracle[(a, b)]).abs() <= 1e-10,
                "entry ({a},{b}): {} vs {}",
                info.full()[(a, b)],
                oracle[(a, b)]
            );
        }
    }
}

#[test]
fn theta_cross_blocks_are_exactly_zero() {
    let (spec, data, cps, params) = mixed_instance(0x2F0);
    let info = plugin_info(&spec, &data, &cps, &params).unwrap();
    // cross block between theta1 and theta2
    let o1 = info.theta_offset(0);
    let o2 = info.theta_offset(1);
    assert_eq!(info.full()[(o1, o2)], 0.0);
    assert_eq!(info.full()[(o2, o1)], 0.0);
    // symmetry and PSD up to jitter
    let m = info.full();
    for a in 0..info.dim() {
        for b in 0..info.dim() {
            assert_eq!(m[(a, b)], m[(b, a)]);
        }
    }
    let eig = m.clone().symmetric_eigen();
    assert!(eig.eigenvalues.min() >= -1e-8);
}

#[test]
fn duplicating_segments_doubles_info_bit_exactly() {
    // k = 0: straight self-concatenation duplicates the only segment
    let (spec1, ..) = mixed_instance(0);
    let _ = spec1;
    let fam: Arc<dyn SegmentFamily> = Arc::new(NormalCommonVar::new());
    let spec0 = ModelSpec::new(
        vec![fam.clone()],
        Some(ParameterBox::new(
            BlockBounds::new(vec![1e-4], vec![1e4]).unwrap(),
            vec![BlockBounds::new(vec![-50.0], vec![50.0]).unwrap()],
        )),
    )
    .unwrap();
    let data = sample(fam.as_ref(), &[1.3], &[0.4], 33, 9).unwrap();
    let params0 = ParameterState::new(vec![1.3], vec![vec![0.4]]);
    let cps0 = ChangePointConfig::single_segment(33).unwrap();
    let info = plugin_info(&spec0, &data, &cps0, &params0).unwrap();
    let doubled_data = data.concat(&data).unwrap();
    let cps0d = ChangePointConfig::single_segment(66).unwrap();
    let info_d = plugin_info(&spec0, &doubled_data, &cps0d, &params0).unwrap();
    for a in 0..info.dim() {
        for b in 0..info.dim() {
            assert_eq!(info_d.full()[(a, b)], 2.0 * info.full()[(a, b)]);
        }
    }

    // k = 1: duplicate each segment in place so fitted segments contain
    // their observations twice
    let (spec, data, cps, params) = mixed_instance(0x3F0);
    let info = plugin_info(&spec, &data, &cps, &params).unwrap();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for j in 0..spec.n_segments() {
        for _pass in 0..2 {
            for i in cps.segment_range(j) {
                rows.push(data.row(i).to_vec());
            }
        }
    }
    let dup = Dataset::from_rows(&rows).unwrap();
    let dup_cps = ChangePointConfig::new(vec![2 * 20], 70).unwrap();
    let info_dup = plugin_info(&spec, &dup, &dup_cps, &params).unwrap();
    for a in 0..info.dim() {
        for b in 0..info.dim() {
            assert_eq!(
                info_dup.full()[(a, b)],
                2.0 * info.full()[(a, b)],
                "entry ({a},{b})"
            );
        }
    }
}

#[test]
fn exponential_theta_info_matches_expectation() {
    // OPG entry is sum (1/theta - x)^2; its expectation is n / theta^2
    let fam: Arc<dyn SegmentFamily> = Arc::new(Exponential::new());
    let spec = ModelSpec::new(
        vec![fam.clone()],
        Some(ParameterBox::new(
            BlockBounds::empty(),
            vec![BlockBounds::new(vec![1e-4], vec![1e4]).unwrap()],
        )),
    )
    .unwrap();
    let n = 40_000usize;
    let theta = 1.7;
    let data = sample(fam.as_ref(), &[], &[theta], n, 77).unwrap();
    let cps = ChangePointConfig::single_segment(n).unwrap();
    let params = ParameterState::new(vec![], vec![vec![theta]]);
    let info = plugin_info(&spec, &data, &cps, &params).unwrap();
    let observed = info.full()[(0, 0)];
    let expected = n as f64 / (theta * theta);
    // Var of each squared score term is 8/theta^4 + ... bounded by the
    // fourth moment; a five-sigma band around n/theta^2
    let se = (n as f64).sqrt() * (8.0f64).sqrt() / (theta * theta);
    assert!(
        (observed - expected).abs() <= 5.0 * se,
        "observed {observed}, expected {expected}"
    );
}

#[test]
fn scaled_info_stabilizes_with_n() {
    // on a fixed generator, ||info/n - info'/n'|| shrinks along a nested ladder
    let scenario =
        cpmle_core::simulation::two_segment_normal_scenario(2.0, true, vec![500, 2000, 8000], 1, 5)
            .unwrap();
    let mut scaled: Vec<DMatrix<f64>> = Vec::new();
    for &n in &[500usize, 2000, 8000] {
        let data = cpmle_core::generate(&scenario, n, 0).unwrap();
        let fitted = fit(&scenario.spec, &data, &FitOptions::default()).unwrap();
        let info =
            plugin_info(&scenario.spec, &data, &fitted.change_points, &fitted.params).unwrap();
        scaled.push(info.full() / n as f64);
    }
    let d01 = (&scaled[0] - &scaled[1]).norm();
    let d12 = (&scaled[1] - &scaled[2]).norm();
    assert!(
        d12 < d01,
        "scaled info differences {d01} -> {d12} must shrink"
    );
}

#[test]
fn hessian_info_agrees_in_expectation_shape() {
    // for the common-variance normal at the MLE the Hessian-based and
    // OPG-based matrices agree to the sampling noise scale
    let scenario =
        cpmle_core::simulation::two_segment_normal_scenario(2.0, true, vec![4000], 1, 6).unwrap();
    let data = cpmle_core::generate(&scenario, 4000, 0).unwrap();
    let fitted = fit(&scenario.spec, &data, &FitOptions::default()).unwrap();
    let opg = plugin_info(&scenario.spec, &data, &fitted.change_points, &fitted.params).unwrap();
    let hess = hessian_info(&scenario.spec, &data, &fitted.change_points, &fitted.params).unwrap();
    let n = 4000.0;
    let rel = (opg.full() / n - &hess / n).norm() / (opg.full() / n).norm();
    assert!(rel < 0.15, "relative OPG/Hessian gap {rel}");
}
