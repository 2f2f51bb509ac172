//! Oracle checks for the likelihood decomposition: closed-form v against an
//! independent quadrature, the J identity, the centered-sum regrouping, and
//! the overlap-count marginals.

#![allow(
    clippy::needless_range_loop,
    clippy::type_complexity,
    clippy::too_many_arguments
)]

mod common;

use common::{gauss_legendre, random_d0_instance, random_j_instance, rng};
use cpmle_core::{
    full_loglik, j1, j2, j2_regrouped, kl_v, kl_v_numeric, overlap_counts, BlockBounds,
    ChangePointConfig, Dataset, Exponential, ModelSpec, NormalCommonVar, NormalKnownVar,
    ParameterBox, ParameterState, Poisson, SegmentFamily,
};
use proptest::prelude::*;
use rand::Rng;
use statrs::function::gamma::ln_gamma;
use std::sync::Arc;

/// Independent oracle for v between univariate continuous densities:
/// fixed-panel Gauss-Legendre of [log f_c - log f_t] f_t over the truth's
/// effective support.
fn v_quadrature_oracle(
    cand: &dyn SegmentFamily,
    ctheta: &[f64],
    cpsi: &[f64],
    truth: &dyn SegmentFamily,
    ttheta: &[f64],
    tpsi: &[f64],
    lo: f64,
    hi: f64,
) -> f64 {
    gauss_legendre(
        |x| {
            let ft = truth.log_density(tpsi, ttheta, &[x]).unwrap().exp();
            if ft == 0.0 {
                return 0.0;
            }
            let lc = cand.log_density(cpsi, ctheta, &[x]).unwrap();
            let lt = truth.log_density(tpsi, ttheta, &[x]).unwrap();
            ft * (lc - lt)
        },
        lo,
        hi,
        600,
    )
}

#[test]
fn kl_trivial_and_paper_style_values() {
    let n1 = NormalKnownVar::new(1.0).unwrap();
    // identical family and parameters: exactly zero
    assert_eq!(kl_v(&n1, &[], &[0.7], &n1, &[], &[0.7]).unwrap(), 0.0);
    // unit-variance normals one apart: -1/2
    let v = kl_v(&n1, &[], &[1.0], &n1, &[], &[0.0]).unwrap();
    assert!((v + 0.5).abs() < 1e-14, "v = {v}");
    // exponentials rate 2 against rate 1: ln 2 - 1
    let e = Exponential::new();
    let v = kl_v(&e, &[], &[2.0], &e, &[], &[1.0]).unwrap();
    assert!((v - (2.0f64.ln() - 1.0)).abs() < 1e-14, "v = {v}");
}

#[test]
fn kl_closed_form_matches_independent_quadrature() {
    let mut r = rng(0x4B4C);
    for _ in 0..50 {
        // normal candidate against normal truth (both variances vary)
        let cand = NormalKnownVar::new(r.random_range(0.4..2.5)).unwrap();
        let truth = NormalKnownVar::new(r.random_range(0.4..2.5)).unwrap();
        let ct = [r.random_range(-2.0..2.0)];
        let tt = [r.random_range(-2.0..2.0)];
        let closed = kl_v(&cand, &[], &ct, &truth, &[], &tt).unwrap();
        let oracle = v_quadrature_oracle(
            &cand,
            &ct,
            &[],
            &truth,
            &tt,
            &[],
            tt[0] - 40.0,
            tt[0] + 40.0,
        );
        assert!(
            (closed - oracle).abs() <= 1e-8,
            "normal: {closed} vs {oracle}"
        );

        // exponential against exponential
        let e = Exponential::new();
        let cr = [r.random_range(0.3..4.0)];
        let tr = [r.random_range(0.3..4.0)];
        let closed = kl_v(&e, &[], &cr, &e, &[], &tr).unwrap();
        let oracle = v_quadrature_oracle(&e, &cr, &[], &e, &tr, &[], 0.0, 80.0 / tr[0]);
        assert!(
            (closed - oracle).abs() <= 1e-8,
            "exponential: {closed} vs {oracle}"
        );

        // common-variance normal candidate against known-variance truth
        let ncv = NormalCommonVar::new();
        let psi = [r.random_range(0.4..2.5)];
        let closed = kl_v(&ncv, &psi, &ct, &truth, &[], &tt).unwrap();
        let oracle = v_quadrature_oracle(
            &ncv,
            &ct,
            &psi,
            &truth,
            &tt,
            &[],
            tt[0] - 40.0,
            tt[0] + 40.0,
        );
        assert!(
            (closed - oracle).abs() <= 1e-8,
            "mixed normal: {closed} vs {oracle}"
        );
    }
}

#[test]
fn poisson_kl_matches_independent_series() {
    let p = Poisson::new();
    let mut r = rng(0x504F);
    for _ in 0..50 {
        let cm = r.random_range(0.5..8.0);
        let tm = r.random_range(0.5..8.0);
        let closed = kl_v(&p, &[], &[cm], &p, &[], &[tm]).unwrap();
        // independent series: sum over the pmf computed from scratch
        let mut oracle = 0.0;
        for k in 0..400u32 {
            let kf = k as f64;
            let ln_pmf_t = kf * tm.ln() - tm - ln_gamma(kf + 1.0);
            let ln_pmf_c = kf * cm.ln() - cm - ln_gamma(kf + 1.0);
            oracle += ln_pmf_t.exp() * (ln_pmf_c - ln_pmf_t);
        }
        assert!(
            (closed - oracle).abs() <= 1e-8,
            "poisson: {closed} vs {oracle}"
        );
    }
}

#[test]
fn kl_nonpositive_and_detects_perturbations() {
    let mut r = rng(0x4E50);
    for _ in 0..60 {
        let n = NormalKnownVar::new(r.random_range(0.4..2.0)).unwrap();
        let t = [r.random_range(-2.0..2.0)];
        let c = [t[0] + r.random_range(0.1..2.0) * if r.random::<bool>() { 1.0 } else { -1.0 }];
        let v = kl_v(&n, &[], &c, &n, &[], &t).unwrap();
        assert!(v <= 1e-12, "v must be non-positive, got {v}");
        assert!(
            v.abs() > 1e-4,
            "perturbed parameters must separate, v = {v}"
        );
    }
}

#[test]
fn kl_numeric_route_agrees_with_closed_forms() {
    let n = NormalKnownVar::new(1.3).unwrap();
    let closed = kl_v(&n, &[], &[0.8], &n, &[], &[-0.2]).unwrap();
    let numeric = kl_v_numeric(&n, &[], &[0.8], &n, &[], &[-0.2]).unwrap();
    assert!((closed - numeric.value).abs() < 1e-9);

    let p = Poisson::new();
    let closed = kl_v(&p, &[], &[2.0], &p, &[], &[4.0]).unwrap();
    let numeric = kl_v_numeric(&p, &[], &[2.0], &p, &[], &[4.0]).unwrap();
    assert!((closed - numeric.value).abs() < 1e-9);
}

#[test]
fn cross_support_kl_is_rejected() {
    let n = NormalKnownVar::new(1.0).unwrap();
    let e = Exponential::new();
    // exponential candidate under normal truth: support mismatch
    assert!(kl_v(&e, &[], &[1.0], &n, &[], &[0.0]).is_err());
    // normal candidate under exponential truth is fine
    let v = kl_v(&n, &[], &[1.0], &e, &[], &[1.0]).unwrap();
    let oracle = v_quadrature_oracle(&n, &[1.0], &[], &e, &[1.0], &[], 0.0, 80.0);
    assert!((v - oracle).abs() < 1e-8);
}

#[test]
fn full_loglik_trivial_and_naive_oracle() {
    // k = 1, unit variance, residuals all zero
    let fam: Arc<dyn SegmentFamily> = Arc::new(NormalKnownVar::new(1.0).unwrap());
    let spec = ModelSpec::new(vec![fam.clone(), fam.clone()], None).unwrap();
    let data = Dataset::univariate(vec![0.0, 0.0, 1.0, 1.0]).unwrap();
    let cps = ChangePointConfig::new(vec![2], 4).unwrap();
    let params = ParameterState::new(vec![], vec![vec![0.0], vec![1.0]]);
    let l = full_loglik(&spec, &data, &cps, &params).unwrap();
    let expect = -4.0 * 0.5 * (2.0 * std::f64::consts::PI).ln();
    assert!((l - expect).abs() < 1e-12);

    // k = 0 equals the plain i.i.d. log-likelihood
    let spec0 = ModelSpec::new(vec![fam.clone()], None).unwrap();
    let cps0 = ChangePointConfig::single_segment(4).unwrap();
    let params0 = ParameterState::new(vec![], vec![vec![0.3]]);
    let l0 = full_loglik(&spec0, &data, &cps0, &params0).unwrap();
    let naive: f64 = data
        .rows()
        .map(|x| fam.log_density(&[], &[0.3], x).unwrap())
        .sum();
    assert!((l0 - naive).abs() < 1e-12);

    // random mixed instance against per-observation summation
    let (spec, truth, cps, data) = random_d0_instance(0x11, 40, 2);
    let l = full_loglik(&spec, &data, &cps, &truth).unwrap();
    let mut naive = 0.0;
    for j in 0..spec.n_segments() {
        for i in cps.segment_range(j) {
            naive += spec
                .family(j)
                .log_density(&[], &truth.thetas[j], data.row(i))
                .unwrap();
        }
    }
    assert!((l - naive).abs() <= 1e-12);
}

/// Random candidate state and configuration for a d = 0 instance.
fn random_candidate(spec: &ModelSpec, n: usize, seed: u64) -> (ChangePointConfig, ParameterState) {
    let mut r = rng(seed);
    let k = spec.k();
    let mut cuts: Vec<usize> = Vec::new();
    while cuts.len() < k {
        let c = r.random_range(1..n);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    let thetas = (0..spec.n_segments())
        .map(|j| common::random_theta_for(spec.family(j), &mut r))
        .collect();
    (
        ChangePointConfig::new(cuts, n).unwrap(),
        ParameterState::new(Vec::new(), thetas),
    )
}

#[test]
fn j_identity_on_random_instances() {
    for case in 0..100u64 {
        let n = 20 + (case as usize % 3) * 10;
        let k = 1 + (case as usize % 2);
        let (spec, truth, true_cps, data) = random_j_instance(1000 + case, n, k);
        let (cand_cps, cand_params) = random_candidate(&spec, n, 2000 + case);

        let j1v = j1(&spec, &cand_cps, &cand_params, &true_cps, &truth).unwrap();
        let j2v = j2(&spec, &data, &cand_cps, &cand_params, &true_cps, &truth).unwrap();
        let l_cand = full_loglik(&spec, &data, &cand_cps, &cand_params).unwrap();
        let l_true = full_loglik(&spec, &data, &true_cps, &truth).unwrap();
        let direct = (l_cand - l_true) / n as f64;
        assert!(
            ((j1v + j2v) - direct).abs() <= 1e-10,
            "case {case}: J = {} vs direct {direct}",
            j1v + j2v
        );

        let j2r = j2_regrouped(&spec, &data, &cand_cps, &cand_params, &true_cps, &truth).unwrap();
        assert!(
            (j2v - j2r).abs() <= 1e-10,
            "case {case}: {j2v} vs regrouped {j2r}"
        );

        assert!(j1v <= 1e-10, "case {case}: J1 = {j1v} must be non-positive");
    }
}

#[test]
fn j_terms_vanish_at_truth() {
    let (spec, truth, true_cps, data) = random_j_instance(0xABC, 30, 1);
    let j1v = j1(&spec, &true_cps, &truth, &true_cps, &truth).unwrap();
    let j2v = j2(&spec, &data, &true_cps, &truth, &true_cps, &truth).unwrap();
    assert_eq!(j1v, 0.0);
    assert_eq!(j2v, 0.0);
}

#[test]
fn argmax_of_loglik_equals_argmax_of_j_on_tiny_instance() {
    // exhaustive (configuration x coarse parameter grid) search: the two
    // objectives differ by a constant, so their argmaxes coincide
    let fam: Arc<dyn SegmentFamily> = Arc::new(NormalKnownVar::new(1.0).unwrap());
    let bounds = ParameterBox::new(
        BlockBounds::empty(),
        vec![
            BlockBounds::new(vec![-4.0], vec![4.0]).unwrap(),
            BlockBounds::new(vec![-4.0], vec![4.0]).unwrap(),
        ],
    );
    let spec = ModelSpec::new(vec![fam.clone(), fam], Some(bounds)).unwrap();
    let data = Dataset::univariate(vec![0.1, -0.2, 0.05, 2.2, 1.9, 2.05, 1.8, 2.3]).unwrap();
    let n = data.n();
    let true_cps = ChangePointConfig::new(vec![3], n).unwrap();
    let truth = ParameterState::new(vec![], vec![vec![0.0], vec![2.0]]);

    let grid: Vec<f64> = (-8..=8).map(|i| i as f64 * 0.5).collect();
    let mut best_l = f64::NEG_INFINITY;
    let mut best_j = f64::NEG_INFINITY;
    let mut arg_l = None;
    let mut arg_j = None;
    for b in 1..n {
        let cps = ChangePointConfig::new(vec![b], n).unwrap();
        for t1 in &grid {
            for t2 in &grid {
                let params = ParameterState::new(vec![], vec![vec![*t1], vec![*t2]]);
                let l = full_loglik(&spec, &data, &cps, &params).unwrap();
                let jv = j1(&spec, &cps, &params, &true_cps, &truth).unwrap()
                    + j2(&spec, &data, &cps, &params, &true_cps, &truth).unwrap();
                if l > best_l {
                    best_l = l;
                    arg_l = Some((b, *t1, *t2));
                }
                if jv > best_j {
                    best_j = jv;
                    arg_j = Some((b, *t1, *t2));
                }
            }
        }
    }
    assert_eq!(arg_l, arg_j, "objectives must share their maximizer");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn overlap_marginals_are_segment_lengths(
        n in 6usize..60,
        seed in 0u64..10_000,
    ) {
        let mut r = rng(seed);
        let k = r.random_range(1..=3usize).min(n - 2);
        let draw = |r: &mut rand_chacha::ChaCha8Rng| {
            let mut cuts: Vec<usize> = Vec::new();
            while cuts.len() < k {
                let c = r.random_range(1..n);
                if !cuts.contains(&c) {
                    cuts.push(c);
                }
            }
            cuts.sort_unstable();
            ChangePointConfig::new(cuts, n).unwrap()
        };
        let cand = draw(&mut r);
        let truth = draw(&mut r);
        let m = overlap_counts(n, &cand, &truth).unwrap();

        let cand_lengths: Vec<usize> = (0..=k).map(|j| cand.segment_range(j).len()).collect();
        let true_lengths: Vec<usize> = (0..=k).map(|j| truth.segment_range(j).len()).collect();
        prop_assert_eq!(m.row_sums(), cand_lengths);
        prop_assert_eq!(m.col_sums(), true_lengths);
        prop_assert_eq!(m.total(), n);
    }
}

#[test]
fn full_loglik_names_offending_observation() {
    // a configuration that assigns a negative draw to the exponential
    // segment names the row in its error
    let families: Vec<Arc<dyn SegmentFamily>> = vec![
        Arc::new(NormalKnownVar::new(1.0).unwrap()),
        Arc::new(cpmle_core::Exponential::new()),
    ];
    let spec = ModelSpec::new(families, None).unwrap();
    let data = Dataset::univariate(vec![0.5, -0.7, 1.0, 2.0]).unwrap();
    let cps = ChangePointConfig::new(vec![1], 4).unwrap();
    let params = ParameterState::new(vec![], vec![vec![0.0], vec![1.0]]);
    let err = full_loglik(&spec, &data, &cps, &params).unwrap_err();
    let text = err.to_string();
    assert!(text.contains("index 1"), "{text}");
    assert!(text.contains("exponential"), "{text}");
}

#[test]
fn overlap_rejects_mismatched_configurations() {
    let a = ChangePointConfig::new(vec![3], 10).unwrap();
    let b = ChangePointConfig::new(vec![3], 12).unwrap();
    assert!(overlap_counts(10, &a, &b).is_err());
    let c = ChangePointConfig::new(vec![2, 5], 10).unwrap();
    assert!(overlap_counts(10, &a, &c).is_err());
}
