//! Shared test oracles, independent of the library's own numeric routes.

#![allow(dead_code)]

use cpmle_core::{
    BlockBounds, ChangePointConfig, Dataset, Exponential, ModelSpec, NormalKnownVar, ParameterBox,
    ParameterState, Poisson, SegmentFamily,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// 10-point Gauss-Legendre nodes and weights on [-1, 1].
const GL_NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_3,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_14,
];

/// Composite fixed-panel Gauss-Legendre quadrature: an integration route
/// with nothing in common with the library's adaptive Simpson.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let half = 0.5 * h;
        let mut acc = 0.0;
        for i in 0..5 {
            acc += GL_WEIGHTS[i] * (f(mid + half * GL_NODES[i]) + f(mid - half * GL_NODES[i]));
        }
        total += acc * half;
    }
    total
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A univariate d = 0 family drawn uniformly from the built-ins that take
/// no common parameter.
pub fn random_d0_family(rng: &mut ChaCha8Rng) -> Arc<dyn SegmentFamily> {
    match rng.random_range(0..3u8) {
        0 => Arc::new(NormalKnownVar::new(rng.random_range(0.5..2.0)).unwrap()),
        1 => Arc::new(Exponential::new()),
        _ => Arc::new(Poisson::new()),
    }
}

/// In-support parameter draw for a d = 0 built-in family, kept inside the
/// explicit test box below.
pub fn random_theta_for(family: &dyn SegmentFamily, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match family.kind() {
        cpmle_core::FamilyKind::NormalKnownVar => vec![rng.random_range(-3.0..3.0)],
        cpmle_core::FamilyKind::Exponential => vec![rng.random_range(0.3..4.0)],
        cpmle_core::FamilyKind::Poisson => vec![rng.random_range(0.5..8.0)],
        other => panic!("not a d = 0 family: {other:?}"),
    }
}

/// Explicit generous box for a d = 0 family.
pub fn theta_box_for(family: &dyn SegmentFamily) -> BlockBounds {
    match family.kind() {
        cpmle_core::FamilyKind::NormalKnownVar => {
            BlockBounds::new(vec![-50.0], vec![50.0]).unwrap()
        }
        cpmle_core::FamilyKind::Exponential => BlockBounds::new(vec![1e-4], vec![1e4]).unwrap(),
        cpmle_core::FamilyKind::Poisson => BlockBounds::new(vec![1e-6], vec![1e4]).unwrap(),
        other => panic!("not a d = 0 family: {other:?}"),
    }
}

/// A random mixed-family d = 0 model with k change points, its true
/// parameters, and a dataset drawn from it.
pub fn random_d0_instance(
    seed: u64,
    n: usize,
    k: usize,
) -> (ModelSpec, ParameterState, ChangePointConfig, Dataset) {
    random_instance_with(seed, n, k, random_d0_family)
}

/// Like [`random_d0_instance`] but drawing every segment family from one
/// support-compatible pool, so the J functional's cross-expectations exist
/// for arbitrary candidate configurations.
pub fn random_j_instance(
    seed: u64,
    n: usize,
    k: usize,
) -> (ModelSpec, ParameterState, ChangePointConfig, Dataset) {
    let pool = seed % 3;
    random_instance_with(seed, n, k, move |r| match pool {
        0 => Arc::new(NormalKnownVar::new(r.random_range(0.5..2.0)).unwrap()),
        1 => Arc::new(Exponential::new()),
        _ => Arc::new(Poisson::new()),
    })
}

fn random_instance_with(
    seed: u64,
    n: usize,
    k: usize,
    mut draw_family: impl FnMut(&mut ChaCha8Rng) -> Arc<dyn SegmentFamily>,
) -> (ModelSpec, ParameterState, ChangePointConfig, Dataset) {
    let mut r = rng(seed);
    let families: Vec<Arc<dyn SegmentFamily>> = (0..=k).map(|_| draw_family(&mut r)).collect();
    let thetas: Vec<Vec<f64>> = families
        .iter()
        .map(|f| random_theta_for(f.as_ref(), &mut r))
        .collect();
    let boxes: Vec<BlockBounds> = families.iter().map(|f| theta_box_for(f.as_ref())).collect();
    let bounds = ParameterBox::new(BlockBounds::empty(), boxes);
    let spec = ModelSpec::new(families, Some(bounds)).unwrap();
    // boundaries: k distinct interior cuts
    let mut cuts: Vec<usize> = Vec::new();
    while cuts.len() < k {
        let c = r.random_range(1..n);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    let cps = ChangePointConfig::new(cuts, n).unwrap();
    let truth = ParameterState::new(Vec::new(), thetas);
    let mut values = Vec::with_capacity(n);
    for j in 0..=k {
        let family = spec.family(j);
        for _ in cps.segment_range(j) {
            let mut buf = Vec::with_capacity(1);
            family
                .sample_into(&[], &truth.thetas[j], &mut r, &mut buf)
                .unwrap();
            values.push(buf[0]);
        }
    }
    let data = Dataset::univariate(values).unwrap();
    (spec, truth, cps, data)
}
