//! Scenario generation and the Monte Carlo experiments that put the
//! asymptotic guarantees (consistency, 1/n rate, limiting normality) and
//! the profiled-likelihood counterexample statistic on a numerical footing.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{fit, FitOptions};
use crate::family::{NormalCommonVar, NormalKnownVar, SegmentFamily};
use crate::inference::{normal_quantile_two_sided, standard_normal_cdf};
use crate::likelihood::g_bar;
use crate::model::{ChangePointConfig, ModelSpec};
use crate::optim::{golden_section_max, GridSearch};
use crate::params::{BlockBounds, ParameterBox, ParameterState};
use crate::rng::stream_rng;
use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

const GENERATE_SALT: u64 = 0x47454e; // "GEN"
const PROFILED_RATIO_SALT: u64 = 0x5052; // "PR"

/// Tail-probability target for the rate experiment at the largest delta and
/// largest n; calibrated by pilot runs of the bundled mean-shift scenario.
pub const RATE_TAIL_TARGET: f64 = 0.10;

/// Maximum tolerated fraction of failed replication fits.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

/// A complete simulation design: the model, its true parameters, the true
/// change-point fractions (constant in n), the ladder of sample sizes, and
/// the replication budget under a root seed.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub spec: ModelSpec,
    pub truth: ParameterState,
    pub lambda0: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub root_seed: u64,
}

impl ScenarioSpec {
    pub fn new(
        spec: ModelSpec,
        truth: ParameterState,
        lambda0: Vec<f64>,
        sample_sizes: Vec<usize>,
        replications: usize,
        root_seed: u64,
    ) -> Result<Self> {
        if lambda0.len() != spec.k() {
            return Err(Error::invalid_input(format!(
                "lambda0 has {} entries, model has k = {}",
                lambda0.len(),
                spec.k()
            )));
        }
        let mut prev = 0.0;
        for &l in &lambda0 {
            if !(prev < l && l < 1.0) {
                return Err(Error::invalid_input(
                    "lambda0 must be strictly increasing inside (0, 1)",
                ));
            }
            prev = l;
        }
        if replications == 0 {
            return Err(Error::invalid_input("replication count must be >= 1"));
        }
        if sample_sizes.is_empty() {
            return Err(Error::invalid_input("at least one sample size required"));
        }
        Ok(ScenarioSpec {
            spec,
            truth,
            lambda0,
            sample_sizes,
            replications,
            root_seed,
        })
    }

    /// True boundaries floor(n lambda0_j) for a given n.
    pub fn true_cps_for(&self, n: usize) -> Result<ChangePointConfig> {
        let boundaries: Vec<usize> = self
            .lambda0
            .iter()
            .map(|l| (n as f64 * l).floor() as usize)
            .collect();
        ChangePointConfig::new(boundaries, n).map_err(|_| {
            Error::invalid_input(format!(
                "n = {n} makes the floored true boundaries degenerate"
            ))
        })
    }
}

/// Draws the scenario's dataset for one (n, replication) cell,
/// deterministic in (root seed, n, rep).
pub fn generate(scenario: &ScenarioSpec, n: usize, rep: usize) -> Result<Dataset> {
    let cps = scenario.true_cps_for(n)?;
    let mut rng = stream_rng(scenario.root_seed, n as u64, rep as u64, GENERATE_SALT);
    let mut values = Vec::with_capacity(n * scenario.spec.obs_dim());
    for j in 0..scenario.spec.n_segments() {
        let family = scenario.spec.family(j);
        let psi = scenario.spec.psi_for_segment(j, &scenario.truth.psi);
        for _ in cps.segment_range(j) {
            family.sample_into(
                psi,
                &scenario.truth.thetas[j],
                &mut rng as &mut dyn RngCore,
                &mut values,
            )?;
        }
    }
    Dataset::new(values, scenario.spec.obs_dim())
}

/// One replication's error summary.
#[derive(Debug, Clone, Serialize)]
pub struct RepRecord {
    pub rep: usize,
    /// max_j |lambda_hat_j - lambda0_j|
    pub lambda_err: f64,
    /// n * lambda_err
    pub n_err: f64,
    /// per-segment sup-norm error of theta_hat
    pub theta_err: Vec<f64>,
    /// sup-norm error of psi_hat when a common parameter exists
    pub psi_err: Option<f64>,
    /// standardized errors (phi_hat - phi0) / SE per packed coordinate,
    /// present when the run collects inference
    pub z: Option<Vec<f64>>,
    /// per-coordinate Wald interval coverage of the truth
    pub covered: Option<Vec<bool>>,
    pub boundaries: Vec<usize>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn median_of(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    median(&v)
}

fn fit_replications(
    scenario: &ScenarioSpec,
    n: usize,
    with_inference: bool,
    level: f64,
) -> Result<(Vec<RepRecord>, usize)> {
    let true_cps = scenario.true_cps_for(n)?;
    let true_fracs = true_cps.fractions();
    let truth_packed = scenario.truth.pack();
    let z_crit = normal_quantile_two_sided(level)?;
    let results: Vec<Option<RepRecord>> = (0..scenario.replications)
        .into_par_iter()
        .map(|rep| {
            let data = generate(scenario, n, rep).ok()?;
            let options = FitOptions {
                compute_inference: with_inference,
                ..FitOptions::default()
            };
            let fitted = fit(&scenario.spec, &data, &options).ok()?;
            let lambda_err = fitted
                .change_points
                .fractions()
                .iter()
                .zip(&true_fracs)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            // integer boundary miss: n * lambda_err without float division noise
            let n_err = fitted
                .change_points
                .boundaries()
                .iter()
                .zip(true_cps.boundaries())
                .map(|(a, b)| a.abs_diff(*b))
                .max()
                .unwrap_or(0) as f64;
            let theta_err = fitted
                .params
                .thetas
                .iter()
                .zip(&scenario.truth.thetas)
                .map(|(a, b)| {
                    a.iter()
                        .zip(b)
                        .map(|(x, y)| (x - y).abs())
                        .fold(0.0, f64::max)
                })
                .collect();
            let psi_err = if scenario.spec.psi_dim() > 0 {
                Some(
                    fitted
                        .params
                        .psi
                        .iter()
                        .zip(&scenario.truth.psi)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max),
                )
            } else {
                None
            };
            let (z, covered) = if with_inference {
                let packed = fitted.params.pack();
                let z: Vec<f64> = packed
                    .iter()
                    .zip(&truth_packed)
                    .zip(&fitted.std_errors)
                    .map(|((est, tru), se)| (est - tru) / se)
                    .collect();
                let covered = z.iter().map(|zi| zi.abs() <= z_crit).collect();
                (Some(z), Some(covered))
            } else {
                (None, None)
            };
            Some(RepRecord {
                rep,
                lambda_err,
                n_err,
                theta_err,
                psi_err,
                z,
                covered,
                boundaries: fitted.change_points.boundaries().to_vec(),
            })
        })
        .collect();
    let mut records = Vec::with_capacity(scenario.replications);
    let mut failures = 0usize;
    for r in results {
        match r {
            Some(rec) => records.push(rec),
            None => failures += 1,
        }
    }
    Ok((records, failures))
}

fn identifiability_precheck(scenario: &ScenarioSpec) -> Result<()> {
    if scenario.spec.k() == 0 {
        return Ok(());
    }
    let (_, g) = g_bar(&scenario.spec, &scenario.truth, &GridSearch::default())?;
    if g >= -1e-9 {
        return Err(Error::Identifiability(format!(
            "scenario fails the separation precheck: G-bar = {g:.3e} >= 0"
        )));
    }
    Ok(())
}

/// Per-n summary of an error-consistency run.
#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyLevel {
    pub n: usize,
    pub replications: usize,
    pub failures: usize,
    pub median_lambda_err: f64,
    pub mean_lambda_err: f64,
    pub median_theta_err: Vec<f64>,
    pub median_psi_err: Option<f64>,
    pub reps: Vec<RepRecord>,
}

/// Result of the consistency experiment across the n ladder.
#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub levels: Vec<ConsistencyLevel>,
    pub lambda_median_strictly_decreasing: bool,
    pub theta_medians_strictly_decreasing: Vec<bool>,
    pub psi_median_strictly_decreasing: Option<bool>,
    pub failure_fraction_ok: bool,
    pub pass: bool,
}

/// Fits every replication at each sample size and checks that the error
/// medians decrease along the ladder.
pub fn run_consistency(scenario: &ScenarioSpec) -> Result<ConsistencyReport> {
    if scenario.sample_sizes.len() < 2 || scenario.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid_input(
            "consistency runs need at least two strictly increasing sample sizes",
        ));
    }
    identifiability_precheck(scenario)?;
    let mut levels = Vec::with_capacity(scenario.sample_sizes.len());
    let mut total_failures = 0usize;
    for &n in &scenario.sample_sizes {
        let (reps, failures) = fit_replications(scenario, n, false, 0.95)?;
        total_failures += failures;
        let median_lambda_err = median_of(reps.iter().map(|r| r.lambda_err));
        let mean_lambda_err =
            reps.iter().map(|r| r.lambda_err).sum::<f64>() / reps.len().max(1) as f64;
        let segs = scenario.spec.n_segments();
        let median_theta_err = (0..segs)
            .map(|j| median_of(reps.iter().map(|r| r.theta_err[j])))
            .collect();
        let median_psi_err = if scenario.spec.psi_dim() > 0 {
            Some(median_of(reps.iter().filter_map(|r| r.psi_err)))
        } else {
            None
        };
        levels.push(ConsistencyLevel {
            n,
            replications: scenario.replications,
            failures,
            median_lambda_err,
            mean_lambda_err,
            median_theta_err,
            median_psi_err,
            reps,
        });
    }
    let strictly_decreasing = |xs: Vec<f64>| xs.windows(2).all(|w| w[1] < w[0]);
    let lambda_median_strictly_decreasing =
        strictly_decreasing(levels.iter().map(|l| l.median_lambda_err).collect());
    let theta_medians_strictly_decreasing: Vec<bool> = (0..scenario.spec.n_segments())
        .map(|j| strictly_decreasing(levels.iter().map(|l| l.median_theta_err[j]).collect()))
        .collect();
    let psi_median_strictly_decreasing = if scenario.spec.psi_dim() > 0 {
        Some(strictly_decreasing(
            levels.iter().filter_map(|l| l.median_psi_err).collect(),
        ))
    } else {
        None
    };
    let total_attempts = scenario.replications * scenario.sample_sizes.len();
    let failure_fraction_ok =
        (total_failures as f64) <= MAX_FAILURE_FRACTION * total_attempts as f64;
    let pass = lambda_median_strictly_decreasing
        && theta_medians_strictly_decreasing.iter().all(|b| *b)
        && psi_median_strictly_decreasing.unwrap_or(true)
        && failure_fraction_ok;
    Ok(ConsistencyReport {
        levels,
        lambda_median_strictly_decreasing,
        theta_medians_strictly_decreasing,
        psi_median_strictly_decreasing,
        failure_fraction_ok,
        pass,
    })
}

/// One tail-probability estimate.
#[derive(Debug, Clone, Serialize)]
pub struct TailEstimate {
    pub delta: f64,
    pub probability: f64,
    pub std_error: f64,
}

/// Per-n tail table for the rate experiment.
#[derive(Debug, Clone, Serialize)]
pub struct RateLevel {
    pub n: usize,
    pub failures: usize,
    pub tails: Vec<TailEstimate>,
    pub reps: Vec<RepRecord>,
}

/// Result of the convergence-rate experiment: empirical
/// P(n ||lambda_hat - lambda0||_inf >= delta) along the n ladder.
#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    /// The tightness property being checked is a double limit with no
    /// canonical finite-sample test; this run uses the recorded surrogate.
    pub surrogate: &'static str,
    pub delta_grid: Vec<f64>,
    pub levels: Vec<RateLevel>,
    /// Per delta: tail estimates never increase along the ladder beyond a
    /// two-standard-error guard.
    pub monotone_within_guard: Vec<bool>,
    pub largest_delta_final_probability: f64,
    pub tail_target: f64,
    pub largest_delta_ok: bool,
    pub failure_fraction_ok: bool,
    pub pass: bool,
}

/// Tabulates tail probabilities of the scaled boundary error and checks
/// tightness along the n ladder.
pub fn run_rate(scenario: &ScenarioSpec, delta_grid: &[f64]) -> Result<RateReport> {
    if scenario.sample_sizes.len() < 2 || scenario.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid_input(
            "rate runs need at least two strictly increasing sample sizes",
        ));
    }
    if delta_grid.is_empty() || delta_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid_input(
            "delta grid must be strictly increasing",
        ));
    }
    identifiability_precheck(scenario)?;
    let mut levels = Vec::with_capacity(scenario.sample_sizes.len());
    let mut total_failures = 0usize;
    for &n in &scenario.sample_sizes {
        let (reps, failures) = fit_replications(scenario, n, false, 0.95)?;
        total_failures += failures;
        let count = reps.len() as f64;
        let tails = delta_grid
            .iter()
            .map(|&delta| {
                let p = reps.iter().filter(|r| r.n_err >= delta).count() as f64 / count;
                TailEstimate {
                    delta,
                    probability: p,
                    std_error: (p * (1.0 - p) / count).sqrt(),
                }
            })
            .collect();
        levels.push(RateLevel {
            n,
            failures,
            tails,
            reps,
        });
    }
    let monotone_within_guard: Vec<bool> = (0..delta_grid.len())
        .map(|di| {
            levels.windows(2).all(|w| {
                let a = &w[0].tails[di];
                let b = &w[1].tails[di];
                let guard = 2.0 * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
                b.probability <= a.probability + guard
            })
        })
        .collect();
    let largest_delta_final_probability = levels
        .last()
        .and_then(|l| l.tails.last())
        .map(|t| t.probability)
        .unwrap_or(f64::NAN);
    let largest_delta_ok = largest_delta_final_probability <= RATE_TAIL_TARGET;
    let total_attempts = scenario.replications * scenario.sample_sizes.len();
    let failure_fraction_ok =
        (total_failures as f64) <= MAX_FAILURE_FRACTION * total_attempts as f64;
    let pass = monotone_within_guard.iter().all(|b| *b) && largest_delta_ok && failure_fraction_ok;
    Ok(RateReport {
        surrogate: "tail estimates non-increasing in n within two binomial standard errors, \
                    and the largest-delta tail at the largest n below the recorded target",
        delta_grid: delta_grid.to_vec(),
        levels,
        monotone_within_guard,
        largest_delta_final_probability,
        tail_target: RATE_TAIL_TARGET,
        largest_delta_ok,
        failure_fraction_ok,
        pass,
    })
}

/// Per-n summary for the limiting-normality experiment.
#[derive(Debug, Clone, Serialize)]
pub struct NormalityLevel {
    pub n: usize,
    pub failures: usize,
    /// Per packed coordinate: empirical Wald coverage at the requested level.
    pub coverage: Vec<f64>,
    /// Per packed coordinate: mean standardized error.
    pub mean_z: Vec<f64>,
    /// Mean standardized error pooled over all coordinates.
    pub mean_z_pooled: f64,
    /// Per packed coordinate: Kolmogorov-Smirnov distance of the
    /// standardized errors to the standard normal.
    pub ks_distance: Vec<f64>,
    pub reps: Vec<RepRecord>,
}

/// Result of the limiting-normality experiment.
#[derive(Debug, Clone, Serialize)]
pub struct NormalityReport {
    pub level: f64,
    pub levels: Vec<NormalityLevel>,
    pub failure_fraction_ok: bool,
}

fn ks_distance_to_normal(z: &mut [f64]) -> f64 {
    z.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = z.len() as f64;
    let mut d = 0.0f64;
    for (i, zi) in z.iter().enumerate() {
        let cdf = standard_normal_cdf(*zi);
        d = d.max((cdf - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - cdf).abs());
    }
    d
}

/// Collects standardized estimation errors and Wald coverage at each n.
pub fn run_normality(scenario: &ScenarioSpec, level: f64) -> Result<NormalityReport> {
    if !(0.0 < level && level < 1.0) {
        return Err(Error::invalid_input("confidence level must be in (0, 1)"));
    }
    identifiability_precheck(scenario)?;
    let mut levels = Vec::with_capacity(scenario.sample_sizes.len());
    let mut total_failures = 0usize;
    let dim = scenario.spec.packed_dim();
    for &n in &scenario.sample_sizes {
        let (reps, failures) = fit_replications(scenario, n, true, level)?;
        total_failures += failures;
        let count = reps.len() as f64;
        let mut coverage = vec![0.0; dim];
        let mut mean_z = vec![0.0; dim];
        let mut z_cols: Vec<Vec<f64>> = vec![Vec::with_capacity(reps.len()); dim];
        for r in &reps {
            let z = r.z.as_ref().expect("normality run collects z");
            let cov = r.covered.as_ref().expect("normality run collects coverage");
            for c in 0..dim {
                coverage[c] += if cov[c] { 1.0 } else { 0.0 };
                mean_z[c] += z[c];
                z_cols[c].push(z[c]);
            }
        }
        for c in 0..dim {
            coverage[c] /= count;
            mean_z[c] /= count;
        }
        let mean_z_pooled = mean_z.iter().sum::<f64>() / dim as f64;
        let ks_distance = z_cols
            .iter_mut()
            .map(|col| ks_distance_to_normal(col))
            .collect();
        levels.push(NormalityLevel {
            n,
            failures,
            coverage,
            mean_z,
            mean_z_pooled,
            ks_distance,
            reps,
        });
    }
    let total_attempts = scenario.replications * scenario.sample_sizes.len();
    let failure_fraction_ok =
        (total_failures as f64) <= MAX_FAILURE_FRACTION * total_attempts as f64;
    Ok(NormalityReport {
        level,
        levels,
        failure_fraction_ok,
    })
}

/// One point of the profiled log-likelihood-ratio demonstration.
#[derive(Debug, Clone, Serialize)]
pub struct ProfiledRatioPoint {
    pub m: usize,
    pub sample_mean: f64,
    pub statistic_closed_form: f64,
    pub statistic_numeric_profile: f64,
    pub gap: f64,
}

/// Mean check of the demonstration statistic at one m.
#[derive(Debug, Clone, Serialize)]
pub struct ProfiledRatioMeanCheck {
    pub m: usize,
    pub replications: usize,
    pub sample_mean: f64,
    /// Exact standard error of the sample mean under the chi-square(1)/2
    /// identity: sqrt(1/2 / replications).
    pub std_error: f64,
    pub within_five_se: bool,
}

/// Trace of the profiled-ratio demonstration: for unit-variance normal
/// segments, sup over the first-segment mean of the post-change
/// log-likelihood-ratio sum equals (m/2)(mean - theta2)^2, a non-negative
/// statistic whose expectation stays 1/2 for every m instead of diverging
/// to minus infinity.
#[derive(Debug, Clone, Serialize)]
pub struct ProfiledRatioTrace {
    pub theta2_0: f64,
    pub points: Vec<ProfiledRatioPoint>,
    pub max_profile_gap: f64,
    pub all_nonnegative: bool,
    pub mean_checks: Vec<ProfiledRatioMeanCheck>,
    pub pass: bool,
}

/// Runs the demonstration over an increasing m grid with a fixed seed.
pub fn profiled_ratio_demo(
    m_grid: &[usize],
    theta2_0: f64,
    seed: u64,
) -> Result<ProfiledRatioTrace> {
    if m_grid.is_empty() || m_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid_input("m grid must be strictly increasing"));
    }
    let family = NormalKnownVar::new(1.0)?;
    let mut points = Vec::with_capacity(m_grid.len());
    for (idx, &m) in m_grid.iter().enumerate() {
        let mut rng = stream_rng(seed, m as u64, idx as u64, PROFILED_RATIO_SALT);
        let mut draws = Vec::with_capacity(m);
        for _ in 0..m {
            family.sample_into(&[], &[theta2_0], &mut rng as &mut dyn RngCore, &mut draws)?;
        }
        let mean = draws.iter().sum::<f64>() / m as f64;
        let closed = 0.5 * m as f64 * (mean - theta2_0).powi(2);
        // numeric profile over theta1 of the per-draw log-ratio sum
        let objective = |theta1: f64| {
            draws
                .iter()
                .map(|x| -0.5 * (x - theta1).powi(2) + 0.5 * (x - theta2_0).powi(2))
                .sum::<f64>()
        };
        let lo = mean - 10.0;
        let hi = mean + 10.0;
        let (_, numeric) = golden_section_max(objective, lo, hi, 1e-11);
        points.push(ProfiledRatioPoint {
            m,
            sample_mean: mean,
            statistic_closed_form: closed,
            statistic_numeric_profile: numeric,
            gap: (closed - numeric).abs(),
        });
    }
    let max_profile_gap = points.iter().map(|p| p.gap).fold(0.0, f64::max);
    let all_nonnegative = points.iter().all(|p| p.statistic_closed_form >= 0.0);

    const MEAN_CHECK_REPS: usize = 10_000;
    let mean_checks: Vec<ProfiledRatioMeanCheck> = m_grid
        .par_iter()
        .map(|&m| {
            let sum: f64 = (0..MEAN_CHECK_REPS)
                .into_par_iter()
                .map(|rep| {
                    let mut rng =
                        stream_rng(seed, m as u64, 1000 + rep as u64, PROFILED_RATIO_SALT);
                    let mut acc = 0.0;
                    let mut buf = Vec::with_capacity(1);
                    for _ in 0..m {
                        buf.clear();
                        family
                            .sample_into(&[], &[theta2_0], &mut rng as &mut dyn RngCore, &mut buf)
                            .expect("unit normal sampling cannot fail");
                        acc += buf[0];
                    }
                    let mean = acc / m as f64;
                    0.5 * m as f64 * (mean - theta2_0).powi(2)
                })
                .sum();
            let sample_mean = sum / MEAN_CHECK_REPS as f64;
            let std_error = (0.5 / MEAN_CHECK_REPS as f64).sqrt();
            ProfiledRatioMeanCheck {
                m,
                replications: MEAN_CHECK_REPS,
                sample_mean,
                std_error,
                within_five_se: (sample_mean - 0.5).abs() <= 5.0 * std_error,
            }
        })
        .collect();

    let pass =
        max_profile_gap <= 1e-8 && all_nonnegative && mean_checks.iter().all(|c| c.within_five_se);
    Ok(ProfiledRatioTrace {
        theta2_0,
        points,
        max_profile_gap,
        all_nonnegative,
        mean_checks,
        pass,
    })
}

/// Two-segment univariate normal scenario with a mean shift at lambda = 0.5.
///
/// `common_variance` selects the shared-variance family (psi = variance)
/// over the known-unit-variance family.
pub fn two_segment_normal_scenario(
    shift: f64,
    common_variance: bool,
    sample_sizes: Vec<usize>,
    replications: usize,
    root_seed: u64,
) -> Result<ScenarioSpec> {
    let theta_bounds = BlockBounds::new(vec![-8.0], vec![8.0 + shift.abs()])?;
    let (spec, truth) = if common_variance {
        let fam: Arc<dyn SegmentFamily> = Arc::new(NormalCommonVar::new());
        let psi_bounds = BlockBounds::new(vec![0.02], vec![50.0])?;
        let bounds = ParameterBox::new(psi_bounds, vec![theta_bounds.clone(), theta_bounds]);
        let spec = ModelSpec::new(vec![fam.clone(), fam], Some(bounds))?;
        let truth = ParameterState::new(vec![1.0], vec![vec![0.0], vec![shift]]);
        (spec, truth)
    } else {
        let fam: Arc<dyn SegmentFamily> = Arc::new(NormalKnownVar::new(1.0)?);
        let bounds = ParameterBox::new(
            BlockBounds::empty(),
            vec![theta_bounds.clone(), theta_bounds],
        );
        let spec = ModelSpec::new(vec![fam.clone(), fam], Some(bounds))?;
        let truth = ParameterState::new(vec![], vec![vec![0.0], vec![shift]]);
        (spec, truth)
    };
    ScenarioSpec::new(
        spec,
        truth,
        vec![0.5],
        sample_sizes,
        replications,
        root_seed,
    )
}

/// The bundled quick scenario: a desk-scale mean-shift benchmark that
/// completes in seconds. The shift of one standard deviation keeps the
/// boundary estimator's error distribution spread out, so every error
/// median (lambda included) is informative at these sample sizes.
pub fn scenario_normal_shift_small(root_seed: u64) -> Result<ScenarioSpec> {
    two_segment_normal_scenario(1.0, true, vec![100, 400], 200, root_seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generate_is_deterministic_and_segmented() {
        let scenario = two_segment_normal_scenario(2.0, false, vec![100], 4, 9).unwrap();
        let a = generate(&scenario, 100, 1).unwrap();
        let b = generate(&scenario, 100, 1).unwrap();
        assert_eq!(a, b);
        let c = generate(&scenario, 100, 2).unwrap();
        assert_ne!(a, c);
        // segment boundaries at floor(100 * 0.5) = 50
        let cps = scenario.true_cps_for(100).unwrap();
        assert_eq!(cps.boundaries(), &[50]);
    }

    #[test]
    fn degenerate_boundaries_error_at_tiny_n() {
        let scenario = ScenarioSpec::new(
            two_segment_normal_scenario(2.0, false, vec![100], 1, 0)
                .unwrap()
                .spec,
            ParameterState::new(vec![], vec![vec![0.0], vec![2.0]]),
            vec![0.004],
            vec![100],
            1,
            0,
        )
        .unwrap();
        assert!(scenario.true_cps_for(100).is_err());
    }

    #[test]
    fn zero_shift_fails_identifiability_precheck() {
        let scenario = two_segment_normal_scenario(0.0, false, vec![50, 100], 5, 3).unwrap();
        let err = run_consistency(&scenario).unwrap_err();
        assert!(matches!(err, Error::Identifiability(_)));
    }

    #[test]
    fn profiled_ratio_statistic_nonnegative_and_matches() {
        let trace = profiled_ratio_demo(&[10, 100], 1.0, 42).unwrap();
        assert!(trace.all_nonnegative);
        assert!(
            trace.max_profile_gap <= 1e-8,
            "gap = {}",
            trace.max_profile_gap
        );
    }
}
