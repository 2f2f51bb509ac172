//! The verification bundle: numerical checks that anchor the theory-facing
//! machinery. Used by the command-line `verify` subcommand and by tests.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{brute_force_fit, fit, FitOptions};
use crate::family::{Exponential, NormalKnownVar, Poisson, SegmentFamily};
use crate::likelihood::{
    deviation_bound_check, full_loglik, j1, j2, j2_regrouped, kl_v, kl_v_numeric,
    separation_constants,
};
use crate::model::{ChangePointConfig, ModelSpec};
use crate::optim::GridSearch;
use crate::params::{BlockBounds, ParameterBox, ParameterState};
use crate::rng::stream_rng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::sync::Arc;

const VERIFY_SALT: u64 = 0x5652; // "VR"

/// Probe budgets for [`run_bundle`].
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub bound_probes: usize,
    pub kl_pairs: usize,
    pub dp_instances: usize,
    pub j_probes: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            bound_probes: 10_000,
            kl_pairs: 25,
            dp_instances: 25,
            j_probes: 50,
            seed: 0,
        }
    }
}

/// One pass/fail row of the bundle.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyRow {
    pub check: String,
    pub pass: bool,
    pub detail: String,
}

/// Bundle outcome; `pass` is the conjunction of the rows.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyOutcome {
    pub rows: Vec<VerifyRow>,
    pub pass: bool,
}

/// The built-in verification benchmark: two unit-variance normal segments
/// with means 0 and 1, boundary at the middle of n = 200, and an explicit
/// parameter box.
pub fn default_benchmark() -> (ModelSpec, ParameterState, ChangePointConfig) {
    let fam: Arc<dyn SegmentFamily> =
        Arc::new(NormalKnownVar::new(1.0).expect("positive variance"));
    let theta = BlockBounds::new(vec![-3.0], vec![4.0]).expect("static bounds");
    let bounds = ParameterBox::new(BlockBounds::empty(), vec![theta.clone(), theta]);
    let spec = ModelSpec::new(vec![fam.clone(), fam], Some(bounds)).expect("static model");
    let truth = ParameterState::new(vec![], vec![vec![0.0], vec![1.0]]);
    let cps = ChangePointConfig::new(vec![100], 200).expect("static configuration");
    (spec, truth, cps)
}

fn d0_family(r: &mut ChaCha8Rng) -> (Arc<dyn SegmentFamily>, BlockBounds) {
    match r.random_range(0..3u8) {
        0 => (
            Arc::new(NormalKnownVar::new(r.random_range(0.5..2.0)).expect("positive variance")),
            BlockBounds::new(vec![-50.0], vec![50.0]).expect("static bounds"),
        ),
        1 => (
            Arc::new(Exponential::new()),
            BlockBounds::new(vec![1e-4], vec![1e4]).expect("static bounds"),
        ),
        _ => (
            Arc::new(Poisson::new()),
            BlockBounds::new(vec![1e-6], vec![1e4]).expect("static bounds"),
        ),
    }
}

fn d0_theta(family: &dyn SegmentFamily, r: &mut ChaCha8Rng) -> Vec<f64> {
    match family.kind() {
        crate::family::FamilyKind::NormalKnownVar => vec![r.random_range(-3.0..3.0)],
        crate::family::FamilyKind::Exponential => vec![r.random_range(0.3..4.0)],
        _ => vec![r.random_range(0.5..8.0)],
    }
}

fn random_cuts(r: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut cuts: Vec<usize> = Vec::new();
    while cuts.len() < k {
        let c = r.random_range(1..n);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    cuts
}

struct Instance {
    spec: ModelSpec,
    truth: ParameterState,
    cps: ChangePointConfig,
    data: Dataset,
}

fn random_instance(
    r: &mut ChaCha8Rng,
    n: usize,
    k: usize,
    same_support_pool: bool,
) -> Result<Instance> {
    let pool = r.random_range(0..3u8);
    let mut families: Vec<Arc<dyn SegmentFamily>> = Vec::with_capacity(k + 1);
    let mut boxes = Vec::with_capacity(k + 1);
    for _ in 0..=k {
        let (fam, bounds) = if same_support_pool {
            match pool {
                0 => (
                    Arc::new(NormalKnownVar::new(r.random_range(0.5..2.0))?)
                        as Arc<dyn SegmentFamily>,
                    BlockBounds::new(vec![-50.0], vec![50.0])?,
                ),
                1 => (
                    Arc::new(Exponential::new()) as Arc<dyn SegmentFamily>,
                    BlockBounds::new(vec![1e-4], vec![1e4])?,
                ),
                _ => (
                    Arc::new(Poisson::new()) as Arc<dyn SegmentFamily>,
                    BlockBounds::new(vec![1e-6], vec![1e4])?,
                ),
            }
        } else {
            d0_family(r)
        };
        families.push(fam);
        boxes.push(bounds);
    }
    let thetas: Vec<Vec<f64>> = families.iter().map(|f| d0_theta(f.as_ref(), r)).collect();
    let bounds = ParameterBox::new(BlockBounds::empty(), boxes);
    let spec = ModelSpec::new(families, Some(bounds))?;
    let cps = ChangePointConfig::new(random_cuts(r, n, k), n)?;
    let truth = ParameterState::new(Vec::new(), thetas);
    let mut values = Vec::with_capacity(n);
    for j in 0..=k {
        for _ in cps.segment_range(j) {
            let mut buf = Vec::with_capacity(1);
            spec.family(j)
                .sample_into(&[], &truth.thetas[j], r, &mut buf)?;
            values.push(buf[0]);
        }
    }
    Ok(Instance {
        spec,
        truth,
        cps,
        data: Dataset::univariate(values)?,
    })
}

/// Runs the bundle against a true model with an explicit box: the
/// deviation-bound constants and probe check, closed-form-vs-numeric
/// divergence differences, dynamic-program-vs-exhaustive equivalence, and
/// the J identity.
///
/// An identifiability failure of the supplied model propagates as an error;
/// ordinary check failures are rows with `pass = false`.
pub fn run_bundle(
    spec: &ModelSpec,
    truth: &ParameterState,
    true_cps: &ChangePointConfig,
    options: &VerifyOptions,
) -> Result<VerifyOutcome> {
    let mut rows = Vec::new();

    // deviation-bound constants and probes
    let constants = separation_constants(spec, truth, true_cps, &GridSearch::default())?;
    match deviation_bound_check(spec, truth, true_cps, &constants, options.bound_probes, options.seed) {
        Ok(report) => rows.push(VerifyRow {
            check: format!("J1 deviation bound ({} probes)", report.probes),
            pass: true,
            detail: format!(
                "zero violations; worst slack {:.3e}; C1 = {:.4e}, C2 = {:.4e}, G-bar = {:.4e}, rho-sup = {:.4e}",
                report.worst_slack, constants.c1, constants.c2, constants.g_bar, constants.rho_sup
            ),
        }),
        Err(Error::CheckFailed(detail)) => rows.push(VerifyRow {
            check: format!("J1 deviation bound ({} probes)", options.bound_probes),
            pass: false,
            detail,
        }),
        Err(other) => return Err(other),
    }

    // closed-form vs numeric divergence per univariate family
    let mut r = stream_rng(options.seed, 1, 0, VERIFY_SALT);
    let mut worst_kl = 0.0f64;
    for _ in 0..options.kl_pairs {
        let n1 = NormalKnownVar::new(r.random_range(0.4..2.5))?;
        let n2 = NormalKnownVar::new(r.random_range(0.4..2.5))?;
        let a = [r.random_range(-2.0..2.0)];
        let b = [r.random_range(-2.0..2.0)];
        let closed = kl_v(&n1, &[], &a, &n2, &[], &b)?;
        let numeric = kl_v_numeric(&n1, &[], &a, &n2, &[], &b)?.value;
        worst_kl = worst_kl.max((closed - numeric).abs());

        let e = Exponential::new();
        let ra = [r.random_range(0.3..4.0)];
        let rb = [r.random_range(0.3..4.0)];
        let closed = kl_v(&e, &[], &ra, &e, &[], &rb)?;
        let numeric = kl_v_numeric(&e, &[], &ra, &e, &[], &rb)?.value;
        worst_kl = worst_kl.max((closed - numeric).abs());

        let p = Poisson::new();
        let ma = [r.random_range(0.5..8.0)];
        let mb = [r.random_range(0.5..8.0)];
        let closed = kl_v(&p, &[], &ma, &p, &[], &mb)?;
        let numeric = kl_v_numeric(&p, &[], &ma, &p, &[], &mb)?.value;
        worst_kl = worst_kl.max((closed - numeric).abs());
    }
    rows.push(VerifyRow {
        check: format!(
            "closed-form vs numeric divergence ({} pairs/family)",
            options.kl_pairs
        ),
        pass: worst_kl <= 1e-8,
        detail: format!("worst difference {worst_kl:.3e} (tolerance 1e-8)"),
    });

    // dynamic program vs exhaustive enumeration
    let mut r = stream_rng(options.seed, 2, 0, VERIFY_SALT);
    let mut dp_failures = 0usize;
    let mut worst_gap = 0.0f64;
    for _ in 0..options.dp_instances {
        let n = r.random_range(8..=16usize);
        let k = r.random_range(1..=2usize);
        let inst = random_instance(&mut r, n, k, false)?;
        let fitted = fit(&inst.spec, &inst.data, &FitOptions::default())?;
        let bf = brute_force_fit(&inst.spec, &inst.data, &[vec![]], &FitOptions::default())?;
        let gap = (fitted.loglik - bf.loglik).abs();
        worst_gap = worst_gap.max(gap);
        if gap > 1e-9 || fitted.change_points.boundaries() != bf.change_points.boundaries() {
            dp_failures += 1;
        }
    }
    rows.push(VerifyRow {
        check: format!(
            "dynamic program vs exhaustive search ({} instances)",
            options.dp_instances
        ),
        pass: dp_failures == 0,
        detail: format!("{dp_failures} mismatches; worst log-likelihood gap {worst_gap:.3e}"),
    });

    // J identity probes
    let mut r = stream_rng(options.seed, 3, 0, VERIFY_SALT);
    let mut worst_identity = 0.0f64;
    let mut worst_regroup = 0.0f64;
    for _ in 0..options.j_probes {
        let n = r.random_range(15..=40usize);
        let k = r.random_range(1..=2usize);
        let inst = random_instance(&mut r, n, k, true)?;
        let cand_cps = ChangePointConfig::new(random_cuts(&mut r, n, k), n)?;
        let cand_thetas = (0..inst.spec.n_segments())
            .map(|j| d0_theta(inst.spec.family(j), &mut r))
            .collect();
        let cand = ParameterState::new(Vec::new(), cand_thetas);
        let j1v = j1(&inst.spec, &cand_cps, &cand, &inst.cps, &inst.truth)?;
        let j2v = j2(
            &inst.spec,
            &inst.data,
            &cand_cps,
            &cand,
            &inst.cps,
            &inst.truth,
        )?;
        let direct = (full_loglik(&inst.spec, &inst.data, &cand_cps, &cand)?
            - full_loglik(&inst.spec, &inst.data, &inst.cps, &inst.truth)?)
            / n as f64;
        worst_identity = worst_identity.max(((j1v + j2v) - direct).abs());
        let j2r = j2_regrouped(
            &inst.spec,
            &inst.data,
            &cand_cps,
            &cand,
            &inst.cps,
            &inst.truth,
        )?;
        worst_regroup = worst_regroup.max((j2v - j2r).abs());
    }
    rows.push(VerifyRow {
        check: format!("J identity ({} probes)", options.j_probes),
        pass: worst_identity <= 1e-10 && worst_regroup <= 1e-10,
        detail: format!(
            "worst identity gap {worst_identity:.3e}, worst regrouping gap {worst_regroup:.3e} (tolerance 1e-10)"
        ),
    });

    let pass = rows.iter().all(|row| row.pass);
    Ok(VerifyOutcome { rows, pass })
}
