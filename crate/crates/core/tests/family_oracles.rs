//! Oracle checks for the built-in segment families: finite-difference
//! gradients, grid-search inner maximizers, density normalization, and
//! sampling round trips.

#![allow(
    clippy::needless_range_loop,
    clippy::type_complexity,
    clippy::too_many_arguments
)]

mod common;

use common::{gauss_legendre, rng};
use cpmle_core::{
    sample, segment_mle_theta, BlockBounds, Dataset, Exponential, MvNormalCommonCov,
    NormalCommonVar, NormalKnownVar, Poisson, SegmentFamily,
};
use rand::Rng;

const LN_2PI: f64 = 1.8378770664093453;

struct Instance {
    family: Box<dyn SegmentFamily>,
    psi: Vec<f64>,
    theta: Vec<f64>,
    x: Vec<f64>,
}

/// Five random in-box parameter/observation draws per family.
fn random_instances(seed: u64) -> Vec<Instance> {
    let mut r = rng(seed);
    let mut out: Vec<Instance> = Vec::new();
    for rep in 0..5 {
        out.push(Instance {
            family: Box::new(NormalKnownVar::new(0.5 + rep as f64 * 0.4).unwrap()),
            psi: vec![],
            theta: vec![r.random_range(-2.0..2.0)],
            x: vec![r.random_range(-3.0..3.0)],
        });
        out.push(Instance {
            family: Box::new(NormalCommonVar::new()),
            psi: vec![r.random_range(0.3..3.0)],
            theta: vec![r.random_range(-2.0..2.0)],
            x: vec![r.random_range(-3.0..3.0)],
        });
        out.push(Instance {
            family: Box::new(Exponential::new()),
            psi: vec![],
            theta: vec![r.random_range(0.3..4.0)],
            x: vec![r.random_range(0.01..3.0)],
        });
        out.push(Instance {
            family: Box::new(Poisson::new()),
            psi: vec![],
            theta: vec![r.random_range(0.5..6.0)],
            x: vec![r.random_range(0..9u32) as f64],
        });
        let l = [
            r.random_range(0.5..1.5),
            r.random_range(-0.4..0.4),
            r.random_range(0.5..1.5),
        ];
        out.push(Instance {
            family: Box::new(MvNormalCommonCov::new(2).unwrap()),
            psi: l.to_vec(),
            theta: vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)],
            x: vec![r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)],
        });
    }
    out
}

/// Central finite difference of the log density in packed coordinates.
fn fd_gradient(inst: &Instance) -> Vec<f64> {
    let d = inst.psi.len();
    let dim = d + inst.theta.len();
    let mut grad = vec![0.0; dim];
    let h = 1e-5;
    for c in 0..dim {
        let mut psi_hi = inst.psi.clone();
        let mut psi_lo = inst.psi.clone();
        let mut th_hi = inst.theta.clone();
        let mut th_lo = inst.theta.clone();
        if c < d {
            psi_hi[c] += h;
            psi_lo[c] -= h;
        } else {
            th_hi[c - d] += h;
            th_lo[c - d] -= h;
        }
        let up = inst.family.log_density(&psi_hi, &th_hi, &inst.x).unwrap();
        let dn = inst.family.log_density(&psi_lo, &th_lo, &inst.x).unwrap();
        grad[c] = (up - dn) / (2.0 * h);
    }
    grad
}

#[test]
fn gradients_match_finite_differences() {
    for inst in random_instances(0xFD) {
        let analytic = inst
            .family
            .grad_log_density(&inst.psi, &inst.theta, &inst.x)
            .unwrap();
        let numeric = fd_gradient(&inst);
        for (a, n) in analytic.iter().zip(&numeric) {
            let tol = 1e-6 * (1.0 + a.abs());
            assert!(
                (a - n).abs() <= tol,
                "{}: analytic {a} vs finite-difference {n}",
                inst.family.name()
            );
        }
    }
}

#[test]
fn hessians_match_finite_differences_of_gradient() {
    for inst in random_instances(0x4E55) {
        let h_analytic = inst
            .family
            .hess_log_density(&inst.psi, &inst.theta, &inst.x)
            .unwrap();
        let d = inst.psi.len();
        let dim = d + inst.theta.len();
        let step = 1e-5;
        for c in 0..dim {
            let mut psi_hi = inst.psi.clone();
            let mut psi_lo = inst.psi.clone();
            let mut th_hi = inst.theta.clone();
            let mut th_lo = inst.theta.clone();
            if c < d {
                psi_hi[c] += step;
                psi_lo[c] -= step;
            } else {
                th_hi[c - d] += step;
                th_lo[c - d] -= step;
            }
            let gp = inst
                .family
                .grad_log_density(&psi_hi, &th_hi, &inst.x)
                .unwrap();
            let gm = inst
                .family
                .grad_log_density(&psi_lo, &th_lo, &inst.x)
                .unwrap();
            for rix in 0..dim {
                let fd = (gp[rix] - gm[rix]) / (2.0 * step);
                let tol = 2e-5 * (1.0 + fd.abs());
                assert!(
                    (h_analytic[(rix, c)] - fd).abs() <= tol,
                    "{}: hessian ({rix},{c}) {} vs {fd}",
                    inst.family.name(),
                    h_analytic[(rix, c)]
                );
            }
        }
    }
}

#[test]
fn log_density_trivial_values() {
    let normal = NormalKnownVar::new(1.0).unwrap();
    let at_mode = normal.log_density(&[], &[0.0], &[0.0]).unwrap();
    assert!((at_mode + 0.5 * LN_2PI).abs() < 1e-15);

    let exp = Exponential::new();
    assert_eq!(exp.log_density(&[], &[1.0], &[0.0]).unwrap(), 0.0);

    let grad = normal.grad_log_density(&[], &[0.0], &[1.0]).unwrap();
    assert_eq!(grad, vec![1.0]);

    let e2 = exp.grad_log_density(&[], &[2.0], &[1.0]).unwrap();
    assert!((e2[0] + 0.5).abs() < 1e-15);
}

#[test]
fn out_of_support_and_out_of_domain_errors() {
    let exp = Exponential::new();
    assert!(exp.validate_params(&[], &[-1.0]).is_err());
    let poi = Poisson::new();
    let err = poi.log_density(&[], &[2.0], &[1.5]).unwrap_err();
    assert!(err.to_string().contains("poisson"));
}

#[test]
fn univariate_densities_integrate_to_one() {
    let mut r = rng(0x1A7E);
    for _ in 0..3 {
        let var = r.random_range(0.4..3.0);
        let mean = r.random_range(-2.0..2.0);
        let normal = NormalKnownVar::new(var).unwrap();
        let mass = gauss_legendre(
            |x| normal.log_density(&[], &[mean], &[x]).unwrap().exp(),
            mean - 14.0 * var.sqrt(),
            mean + 14.0 * var.sqrt(),
            400,
        );
        assert!((mass - 1.0).abs() < 1e-6, "normal mass {mass}");

        let rate = r.random_range(0.3..4.0);
        let exp = Exponential::new();
        let mass = gauss_legendre(
            |x| exp.log_density(&[], &[rate], &[x]).unwrap().exp(),
            0.0,
            60.0 / rate,
            400,
        );
        assert!((mass - 1.0).abs() < 1e-6, "exponential mass {mass}");

        let lambda = r.random_range(0.5..8.0);
        let poi = Poisson::new();
        let mut mass = 0.0;
        for k in 0..200u32 {
            mass += poi.log_density(&[], &[lambda], &[k as f64]).unwrap().exp();
        }
        assert!((mass - 1.0).abs() < 1e-9, "poisson mass {mass}");
    }
}

#[test]
fn sampling_is_deterministic_and_lands_in_clt_bands() {
    let normal = NormalKnownVar::new(1.0).unwrap();
    let a = sample(&normal, &[], &[0.0], 100_000, 77).unwrap();
    let b = sample(&normal, &[], &[0.0], 100_000, 77).unwrap();
    assert_eq!(a, b);
    let mean = a.rows().map(|x| x[0]).sum::<f64>() / a.n() as f64;
    assert!(
        mean.abs() < 4.0 / (a.n() as f64).sqrt(),
        "normal mean {mean}"
    );

    let exp = Exponential::new();
    let s = sample(&exp, &[], &[1.0], 100_000, 13).unwrap();
    let mean = s.rows().map(|x| x[0]).sum::<f64>() / s.n() as f64;
    assert!((mean - 1.0).abs() < 0.01, "exponential mean {mean}");

    let poi = Poisson::new();
    let s = sample(&poi, &[], &[3.0], 100_000, 5).unwrap();
    let mean = s.rows().map(|x| x[0]).sum::<f64>() / s.n() as f64;
    assert!(
        (mean - 3.0).abs() < 4.0 * (3.0f64 / 100_000.0).sqrt(),
        "poisson mean {mean}"
    );

    let mvn = MvNormalCommonCov::new(2).unwrap();
    let s = sample(&mvn, &[1.0, 0.3, 0.8], &[1.0, -1.0], 100_000, 21).unwrap();
    let m0 = s.rows().map(|x| x[0]).sum::<f64>() / s.n() as f64;
    let m1 = s.rows().map(|x| x[1]).sum::<f64>() / s.n() as f64;
    assert!((m0 - 1.0).abs() < 0.02 && (m1 + 1.0).abs() < 0.02);
}

#[test]
fn segment_mle_closed_forms() {
    let ncv = NormalCommonVar::new();
    let data = Dataset::univariate(vec![1.0, 3.0]).unwrap();
    let bounds = BlockBounds::new(vec![-50.0], vec![50.0]).unwrap();
    let (theta, _) = segment_mle_theta(&ncv, &[1.0], &data, 0..2, &bounds).unwrap();
    assert_eq!(theta, vec![2.0]);

    let exp = Exponential::new();
    let data = Dataset::univariate(vec![0.5, 1.5]).unwrap();
    let bounds = BlockBounds::new(vec![1e-4], vec![1e4]).unwrap();
    let (theta, _) = segment_mle_theta(&exp, &[], &data, 0..2, &bounds).unwrap();
    assert!((theta[0] - 1.0).abs() < 1e-15);
}

#[test]
fn poisson_mle_matches_dense_grid_search() {
    let poi = Poisson::new();
    let draws = sample(&poi, &[], &[2.5], 10, 99).unwrap();
    let bounds = BlockBounds::new(vec![0.1], vec![20.0]).unwrap();
    let (theta, loglik) = segment_mle_theta(&poi, &[], &draws, 0..10, &bounds).unwrap();

    // dense grid over the box at step 1e-4
    let eval = |lambda: f64| -> f64 {
        draws
            .rows()
            .map(|x| poi.log_density(&[], &[lambda], x).unwrap())
            .sum()
    };
    let mut best = f64::NEG_INFINITY;
    let mut best_lambda = 0.1;
    let mut lambda = 0.1;
    while lambda <= 20.0 {
        let v = eval(lambda);
        if v > best {
            best = v;
            best_lambda = lambda;
        }
        lambda += 1e-4;
    }
    assert!(
        (loglik - best).abs() <= 1e-6,
        "mle loglik {loglik} vs grid {best} (grid argmax {best_lambda}, mle {})",
        theta[0]
    );
    assert!(
        loglik >= best - 1e-12,
        "closed form must not lose to the grid"
    );
}

#[test]
fn mle_respects_box_and_reports_stationarity() {
    // box that clips the sample mean: gradient must point out of the box
    let ncv = NormalKnownVar::new(1.0).unwrap();
    let data = Dataset::univariate(vec![5.0, 7.0]).unwrap();
    let bounds = BlockBounds::new(vec![-1.0], vec![1.0]).unwrap();
    let (theta, _) = segment_mle_theta(&ncv, &[], &data, 0..2, &bounds).unwrap();
    assert_eq!(theta, vec![1.0]);

    // interior solution has tiny gradient norm
    let exp = Exponential::new();
    let draws = sample(&exp, &[], &[2.0], 50, 3).unwrap();
    let bounds = BlockBounds::new(vec![1e-4], vec![1e4]).unwrap();
    let (theta, loglik) = segment_mle_theta(&exp, &[], &draws, 0..50, &bounds).unwrap();
    let grad: f64 = draws.rows().map(|x| 1.0 / theta[0] - x[0]).sum();
    assert!(grad.abs() <= 1e-8 * (1.0 + loglik.abs()), "gradient {grad}");
}

#[test]
fn sample_then_mle_recovers_generator() {
    let cases: Vec<(Box<dyn SegmentFamily>, Vec<f64>, Vec<f64>, f64)> = vec![
        (
            Box::new(NormalKnownVar::new(1.0).unwrap()),
            vec![],
            vec![0.7],
            1.0,
        ),
        (
            Box::new(NormalCommonVar::new()),
            vec![2.0],
            vec![-0.4],
            2.0f64.sqrt(),
        ),
        (Box::new(Exponential::new()), vec![], vec![1.7], 1.7),
        (Box::new(Poisson::new()), vec![], vec![3.3], 3.3f64.sqrt()),
    ];
    for (family, psi, theta, sd_scale) in cases {
        let n = 100_000usize;
        let draws = sample(family.as_ref(), &psi, &theta, n, 31).unwrap();
        let bounds = match family.kind() {
            cpmle_core::FamilyKind::Exponential => BlockBounds::new(vec![1e-4], vec![1e4]).unwrap(),
            cpmle_core::FamilyKind::Poisson => BlockBounds::new(vec![1e-6], vec![1e4]).unwrap(),
            _ => BlockBounds::new(vec![-50.0], vec![50.0]).unwrap(),
        };
        let (fitted, _) = segment_mle_theta(family.as_ref(), &psi, &draws, 0..n, &bounds).unwrap();
        // crude five-standard-error band on the estimator
        let band = 5.0 * sd_scale * theta[0].abs().max(1.0) / (n as f64).sqrt();
        assert!(
            (fitted[0] - theta[0]).abs() <= band,
            "{}: recovered {} for generator {}",
            family.name(),
            fitted[0],
            theta[0]
        );
    }
}
