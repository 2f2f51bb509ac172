//! Exact joint maximum likelihood for the segmentation, the within-segment
//! parameters, and the common parameter.
//!
//! For a fixed common parameter the segmentation problem is solved exactly
//! by order-constrained dynamic programming over interval costs
//! c_j(s, t; psi) = max_theta sum log f_j. A common parameter, when present,
//! is handled by alternating the exact segmentation step with a joint
//! projected-Newton step in (psi, theta) at fixed boundaries, from several
//! starts. Ties between equal-likelihood segmentations resolve to the
//! lexicographically smallest boundary vector.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::family::{
    ascent_direction, projected_gradient, segment_mle_with_eval, CommonParam, SegmentCostEval,
};
use crate::inference::{invert_spd, plugin_info, InfoMatrix};
use crate::model::{ChangePointConfig, ModelSpec};
use crate::params::{BlockBounds, ParameterBox, ParameterState};
use nalgebra::{Cholesky, DMatrix};

/// Options for [`fit`].
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Additional psi starting points beside the pooled whole-sample start.
    pub psi_starts: Vec<Vec<f64>>,
    pub max_outer_iters: usize,
    pub tol: f64,
    pub min_segment_len: usize,
    /// Compute the information matrix and standard errors on the result.
    pub compute_inference: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            psi_starts: Vec::new(),
            max_outer_iters: 50,
            tol: 1e-8,
            min_segment_len: 1,
            compute_inference: true,
        }
    }
}

/// Convergence and sanity diagnostics attached to a fit.
#[derive(Debug, Clone, Default)]
pub struct FitDiagnostics {
    /// Log-likelihood after each accepted step of the winning start;
    /// non-decreasing by construction.
    pub loglik_trace: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
    /// Packed-coordinate labels sitting on a box bound at the solution.
    pub boundary_active: Vec<String>,
    /// Smallest sup-norm gap between fitted theta blocks of adjacent
    /// segments that share a family kind; `None` when no such pair exists.
    pub neighbor_min_gap: Option<f64>,
    /// False when some same-kind adjacent pair has an (numerically)
    /// indistinct fitted theta.
    pub neighbors_distinct: bool,
    pub n_starts: usize,
    /// Starts that reached the best log-likelihood (within tolerance) at a
    /// different boundary vector.
    pub extra_local_maxima: usize,
    pub info_condition: Option<f64>,
}

/// Joint maximum likelihood estimate with inference byproducts.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub change_points: ChangePointConfig,
    pub params: ParameterState,
    pub loglik: f64,
    pub info: InfoMatrix,
    pub std_errors: Vec<f64>,
    pub diagnostics: FitDiagnostics,
}

struct CostContext<'a> {
    evals: Vec<Box<dyn SegmentCostEval>>,
    bounds: &'a ParameterBox,
}

impl<'a> CostContext<'a> {
    fn build(spec: &ModelSpec, data: &Dataset, bounds: &'a ParameterBox) -> Result<Self> {
        let mut evals = Vec::with_capacity(spec.n_segments());
        for j in 0..spec.n_segments() {
            evals.push(spec.family(j).cost_evaluator(data)?);
        }
        Ok(CostContext { evals, bounds })
    }

    /// max_theta cost of segment j over rows [s, t) at fixed psi.
    fn cost(&self, spec: &ModelSpec, j: usize, s: usize, t: usize, psi: &[f64]) -> Result<f64> {
        let psi_j = spec.psi_for_segment(j, psi);
        let bounds = &self.bounds.thetas[j];
        let value = match self.evals[j].best_cost(s, t, psi_j, bounds) {
            Some(v) => v,
            None => segment_mle_with_eval(self.evals[j].as_ref(), psi_j, s, t, bounds)?.1,
        };
        if value.is_nan() {
            return Err(Error::Numeric {
                index: s,
                detail: format!("segment {} cost over rows {s}..{t} is NaN", j + 1),
            });
        }
        Ok(value)
    }

    fn theta_hat(
        &self,
        spec: &ModelSpec,
        j: usize,
        s: usize,
        t: usize,
        psi: &[f64],
    ) -> Result<Vec<f64>> {
        let psi_j = spec.psi_for_segment(j, psi);
        let (theta, _) =
            segment_mle_with_eval(self.evals[j].as_ref(), psi_j, s, t, &self.bounds.thetas[j])?;
        Ok(theta)
    }

    fn cost_at(
        &self,
        spec: &ModelSpec,
        j: usize,
        s: usize,
        t: usize,
        psi: &[f64],
        theta: &[f64],
    ) -> f64 {
        self.evals[j].cost_at(s, t, spec.psi_for_segment(j, psi), theta)
    }
}

/// Strict-improvement comparison for segmentation totals. Values within a
/// relative tie tolerance count as equal, so equal-likelihood
/// configurations resolve to the lexicographically smallest boundary
/// vector even when their float totals differ in the last few ulps
/// (partition sums of identical per-point terms round differently).
const TIE_REL_TOL: f64 = 1e-11;

fn beats(candidate: f64, incumbent: f64) -> bool {
    if incumbent == f64::NEG_INFINITY {
        return candidate > f64::NEG_INFINITY;
    }
    candidate > incumbent + TIE_REL_TOL * (1.0 + incumbent.abs())
}

fn check_feasible(spec: &ModelSpec, data: &Dataset, min_len: usize) -> Result<()> {
    spec.check_data(data)?;
    if min_len == 0 {
        return Err(Error::invalid_input("minimum segment length must be >= 1"));
    }
    if data.n() < spec.n_segments() * min_len {
        return Err(Error::invalid_input(format!(
            "n = {} cannot hold {} segments of length >= {min_len}",
            data.n(),
            spec.n_segments()
        )));
    }
    Ok(())
}

/// Exact maximizer over all ordered boundary configurations at fixed psi.
///
/// Backward dynamic program `S[j][s]` = best attainable log-likelihood of
/// segments j..=k+1 over rows [s, n), with the per-stage argmax stored at
/// its smallest maximizer so the forward reconstruction yields the
/// lexicographically smallest optimal boundary vector.
pub fn fit_fixed_psi(
    spec: &ModelSpec,
    data: &Dataset,
    psi: &[f64],
    min_segment_len: usize,
) -> Result<(ChangePointConfig, Vec<Vec<f64>>, f64)> {
    check_feasible(spec, data, min_segment_len)?;
    let bounds = spec.resolved_bounds(data)?;
    if psi.len() != spec.psi_dim() {
        return Err(Error::parameter(format!(
            "psi has dimension {}, model expects {}",
            psi.len(),
            spec.psi_dim()
        )));
    }
    if spec.psi_dim() > 0 && !bounds.psi.contains(psi) {
        return Err(Error::parameter("psi outside the declared box".to_string()));
    }
    let ctx = CostContext::build(spec, data, &bounds)?;
    fit_fixed_psi_with(spec, data.n(), &ctx, psi, min_segment_len)
}

#[allow(clippy::needless_range_loop)] // parallel index tables: the DP recurrence reads clearest with explicit indices
fn fit_fixed_psi_with(
    spec: &ModelSpec,
    n: usize,
    ctx: &CostContext<'_>,
    psi: &[f64],
    min_len: usize,
) -> Result<(ChangePointConfig, Vec<Vec<f64>>, f64)> {
    let k = spec.k();
    if k == 0 {
        let theta = ctx.theta_hat(spec, 0, 0, n, psi)?;
        let value = ctx.cost_at(spec, 0, 0, n, psi, &theta);
        if value == f64::NEG_INFINITY {
            return Err(Error::invalid_input(
                "the whole sample has zero likelihood under the single segment family",
            ));
        }
        return Ok((ChangePointConfig::single_segment(n)?, vec![theta], value));
    }

    // stage j (1-based) consumes rows [s, t); reachable starts for stage j
    // are s in [(j-1) L, n - (k + 2 - j) L]
    let stage_lo = |j: usize| (j - 1) * min_len;
    let stage_hi = |j: usize| n - (k + 2 - j) * min_len;

    // base stage k+1: S[s] = cost of the last segment over [s, n)
    let mut suffix = vec![f64::NEG_INFINITY; n + 1];
    for s in stage_lo(k + 1)..=stage_hi(k + 1) {
        suffix[s] = ctx.cost(spec, k, s, n, psi)?;
    }

    // interior stages k down to 2, recording smallest argmax
    let mut arg: Vec<Vec<usize>> = vec![Vec::new(); k + 1];
    for j in (2..=k).rev() {
        let mut next = vec![f64::NEG_INFINITY; n + 1];
        let mut arg_j = vec![usize::MAX; n + 1];
        for s in stage_lo(j)..=stage_hi(j) {
            let mut best = f64::NEG_INFINITY;
            let mut best_t = usize::MAX;
            for t in (s + min_len)..=(n - (k + 1 - j) * min_len) {
                let value = ctx.cost(spec, j - 1, s, t, psi)? + suffix[t];
                if beats(value, best) {
                    best = value;
                    best_t = t;
                }
            }
            next[s] = best;
            arg_j[s] = best_t;
        }
        arg[j] = arg_j;
        suffix = next;
    }

    // stage 1: only s = 0 is reachable
    let mut best = f64::NEG_INFINITY;
    let mut best_t = usize::MAX;
    for t in min_len..=(n - k * min_len) {
        let value = ctx.cost(spec, 0, 0, t, psi)? + suffix[t];
        if beats(value, best) {
            best = value;
            best_t = t;
        }
    }
    if best_t == usize::MAX || best == f64::NEG_INFINITY {
        return Err(Error::invalid_input(
            "every segmentation has zero likelihood; the segment supports cannot tile the data",
        ));
    }

    let mut boundaries = Vec::with_capacity(k);
    boundaries.push(best_t);
    let mut s = best_t;
    for j in 2..=k {
        let t = arg[j][s];
        if t == usize::MAX {
            return Err(Error::internal("dangling backtrack pointer"));
        }
        boundaries.push(t);
        s = t;
    }
    let cps = ChangePointConfig::new(boundaries, n)?;

    let mut thetas = Vec::with_capacity(k + 1);
    for j in 0..=k {
        let r = cps.segment_range(j);
        thetas.push(ctx.theta_hat(spec, j, r.start, r.end, psi)?);
    }
    Ok((cps, thetas, best))
}

const BRUTE_FORCE_GUARD: f64 = 1e6;

fn binomial_approx(n: usize, k: usize) -> f64 {
    let mut acc = 1.0f64;
    for i in 0..k {
        acc *= (n - i) as f64 / (i + 1) as f64;
        if acc > 1e18 {
            return acc;
        }
    }
    acc
}

/// Exhaustive reference maximizer: every boundary configuration crossed
/// with every psi in `psi_grid`, inner theta maximization per segment.
///
/// Guarded to instances with at most 10^6 configurations. Configurations
/// are enumerated in lexicographic boundary order with strict improvement,
/// and per-configuration totals fold segment costs right to left, so ties
/// resolve identically to the dynamic program.
pub fn brute_force_fit(
    spec: &ModelSpec,
    data: &Dataset,
    psi_grid: &[Vec<f64>],
    options: &FitOptions,
) -> Result<FitResult> {
    check_feasible(spec, data, options.min_segment_len)?;
    let n = data.n();
    let k = spec.k();
    let configs = binomial_approx(n - 1, k);
    if configs > BRUTE_FORCE_GUARD {
        return Err(Error::SizeLimit(format!(
            "about {configs:.3e} boundary configurations exceed the exhaustive guard of {BRUTE_FORCE_GUARD:.0e}"
        )));
    }
    if psi_grid.is_empty() {
        return Err(Error::invalid_input("psi grid must be non-empty"));
    }
    let bounds = spec.resolved_bounds(data)?;
    let ctx = CostContext::build(spec, data, &bounds)?;

    let mut best: Option<(Vec<usize>, Vec<f64>, f64)> = None;
    for psi in psi_grid {
        if psi.len() != spec.psi_dim() {
            return Err(Error::parameter(format!(
                "psi grid entry has dimension {}, model expects {}",
                psi.len(),
                spec.psi_dim()
            )));
        }
        let mut boundaries = vec![0usize; k];
        enumerate_configs(
            spec,
            &ctx,
            psi,
            n,
            options.min_segment_len,
            0,
            0,
            &mut boundaries,
            &mut best,
        )?;
    }
    let (boundaries, best_psi, loglik) =
        match best {
            Some(b) if b.2 > f64::NEG_INFINITY => b,
            _ => return Err(Error::invalid_input(
                "every segmentation has zero likelihood; the segment supports cannot tile the data",
            )),
        };
    let cps = ChangePointConfig::new(boundaries, n)?;
    let mut thetas = Vec::with_capacity(k + 1);
    for j in 0..=k {
        let r = cps.segment_range(j);
        thetas.push(ctx.theta_hat(spec, j, r.start, r.end, &best_psi)?);
    }
    let params = ParameterState::new(best_psi, thetas);
    finalize_result(
        spec,
        data,
        cps,
        params,
        loglik,
        FitDiagnostics {
            loglik_trace: vec![loglik],
            converged: true,
            n_starts: psi_grid.len(),
            ..FitDiagnostics::default()
        },
        options,
    )
}

#[allow(clippy::too_many_arguments)]
fn enumerate_configs(
    spec: &ModelSpec,
    ctx: &CostContext<'_>,
    psi: &[f64],
    n: usize,
    min_len: usize,
    level: usize,
    start: usize,
    boundaries: &mut Vec<usize>,
    best: &mut Option<(Vec<usize>, Vec<f64>, f64)>,
) -> Result<()> {
    let k = spec.k();
    if level == k {
        // right-to-left fold matches the dynamic program's additions exactly
        let ext: Vec<usize> = std::iter::once(0)
            .chain(boundaries.iter().copied())
            .chain(std::iter::once(n))
            .collect();
        let mut total = 0.0;
        for j in (0..=k).rev() {
            total += ctx.cost(spec, j, ext[j], ext[j + 1], psi)?;
        }
        let improved = match best {
            Some((_, _, cur)) => beats(total, *cur),
            None => true,
        };
        if improved {
            *best = Some((boundaries.clone(), psi.to_vec(), total));
        }
        return Ok(());
    }
    let lo = start.max(level * min_len) + min_len;
    let hi = n - (k - level) * min_len;
    for b in lo..=hi {
        boundaries[level] = b;
        enumerate_configs(spec, ctx, psi, n, min_len, level + 1, b, boundaries, best)?;
    }
    boundaries.truncate(k);
    Ok(())
}

/// Pooled whole-sample start for the common parameter.
fn pooled_psi_start(spec: &ModelSpec, data: &Dataset, bounds: &ParameterBox) -> Result<Vec<f64>> {
    match spec.common() {
        CommonParam::None => Ok(Vec::new()),
        CommonParam::Variance => {
            let n = data.n() as f64;
            let mean = data.rows().map(|r| r[0]).sum::<f64>() / n;
            let var = data.rows().map(|r| (r[0] - mean).powi(2)).sum::<f64>() / n;
            Ok(bounds.psi.clamp(&[var.max(1e-12)]))
        }
        CommonParam::CholCovariance(p) => {
            let n = data.n() as f64;
            let mut mean = vec![0.0; p];
            for row in data.rows() {
                for q in 0..p {
                    mean[q] += row[q];
                }
            }
            for m in &mut mean {
                *m /= n;
            }
            let mut cov = DMatrix::zeros(p, p);
            for row in data.rows() {
                for a in 0..p {
                    for b in 0..p {
                        cov[(a, b)] += (row[a] - mean[a]) * (row[b] - mean[b]);
                    }
                }
            }
            cov /= n;
            let jitter = 1e-8 * (cov.trace() / p as f64).max(1e-12);
            let mut attempt = cov.clone();
            for _ in 0..12 {
                if let Some(chol) = Cholesky::new(attempt.clone()) {
                    let packed = crate::family::pack_chol(&chol.l());
                    return Ok(bounds.psi.clamp(&packed));
                }
                for i in 0..p {
                    attempt[(i, i)] += jitter;
                }
            }
            Err(Error::internal(
                "pooled covariance is not positive definite",
            ))
        }
    }
}

/// Joint projected-Newton ascent over the packed (psi, theta) vector at
/// fixed boundaries. Returns the improved state and log-likelihood;
/// the log-likelihood never decreases from the starting point.
#[allow(clippy::needless_range_loop)]
fn joint_newton(
    spec: &ModelSpec,
    data: &Dataset,
    ctx: &CostContext<'_>,
    cps: &ChangePointConfig,
    state: &ParameterState,
    bounds: &ParameterBox,
    max_iters: usize,
) -> Result<(ParameterState, f64)> {
    let d = spec.psi_dim();
    let theta_dims = spec.theta_dims();
    let packed_dim = spec.packed_dim();

    let packed_bounds = {
        let mut lo = bounds.psi.lower().to_vec();
        let mut hi = bounds.psi.upper().to_vec();
        for b in &bounds.thetas {
            lo.extend_from_slice(b.lower());
            hi.extend_from_slice(b.upper());
        }
        BlockBounds::new(lo, hi)?
    };

    let loglik_of = |state: &ParameterState| -> f64 {
        (0..spec.n_segments()).rev().fold(0.0, |acc, j| {
            let r = cps.segment_range(j);
            ctx.cost_at(spec, j, r.start, r.end, &state.psi, &state.thetas[j]) + acc
        })
    };

    let mut current = state.clone();
    let mut value = loglik_of(&current);

    for _ in 0..max_iters {
        // assemble the packed gradient and Hessian from per-observation terms
        let mut grad = vec![0.0; packed_dim];
        let mut hess = DMatrix::zeros(packed_dim, packed_dim);
        let mut theta_offset = d;
        for j in 0..spec.n_segments() {
            let family = spec.family(j);
            let psi_j = spec.psi_for_segment(j, &current.psi);
            let dj = theta_dims[j];
            let fam_d = psi_j.len();
            for i in cps.segment_range(j) {
                let g = family.grad_log_density(psi_j, &current.thetas[j], data.row(i))?;
                let h = family.hess_log_density(psi_j, &current.thetas[j], data.row(i))?;
                for a in 0..fam_d {
                    grad[a] += g[a];
                    for b in 0..fam_d {
                        hess[(a, b)] += h[(a, b)];
                    }
                    for b in 0..dj {
                        hess[(a, theta_offset + b)] += h[(a, fam_d + b)];
                        hess[(theta_offset + b, a)] += h[(fam_d + b, a)];
                    }
                }
                for a in 0..dj {
                    grad[theta_offset + a] += g[fam_d + a];
                    for b in 0..dj {
                        hess[(theta_offset + a, theta_offset + b)] += h[(fam_d + a, fam_d + b)];
                    }
                }
            }
            theta_offset += dj;
        }

        let packed = current.pack();
        let pg = projected_gradient(&grad, &packed, &packed_bounds);
        let pg_norm = pg.iter().map(|g| g * g).sum::<f64>().sqrt();
        if pg_norm <= 1e-10 * (1.0 + value.abs()) {
            break;
        }
        let direction = ascent_direction(&hess, &grad);
        let mut alpha = 1.0;
        let mut improved = false;
        for _ in 0..60 {
            let trial_packed: Vec<f64> = packed
                .iter()
                .zip(&direction)
                .map(|(x, d)| x + alpha * d)
                .collect();
            let trial_packed = packed_bounds.clamp(&trial_packed);
            let trial = ParameterState::unpack(&trial_packed, d, &theta_dims)?;
            let trial_value = loglik_of(&trial);
            if trial_value > value {
                current = trial;
                value = trial_value;
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok((current, value))
}

/// Joint MLE of boundaries, segment parameters, and the common parameter.
///
/// Without a common parameter a single exact dynamic program suffices.
/// Otherwise the profile loop alternates the exact segmentation at fixed
/// psi with joint Newton refinement at fixed boundaries, from the pooled
/// whole-sample psi start plus any user-provided starts, and returns the
/// best run.
pub fn fit(spec: &ModelSpec, data: &Dataset, options: &FitOptions) -> Result<FitResult> {
    check_feasible(spec, data, options.min_segment_len)?;
    let bounds = spec.resolved_bounds(data)?;
    let ctx = CostContext::build(spec, data, &bounds)?;
    let d = spec.psi_dim();

    if d == 0 {
        let (cps, thetas, loglik) =
            fit_fixed_psi_with(spec, data.n(), &ctx, &[], options.min_segment_len)?;
        let params = ParameterState::new(Vec::new(), thetas);
        let diagnostics = FitDiagnostics {
            loglik_trace: vec![loglik],
            outer_iterations: 1,
            converged: true,
            n_starts: 1,
            ..FitDiagnostics::default()
        };
        return finalize_result(spec, data, cps, params, loglik, diagnostics, options);
    }

    let mut starts = vec![pooled_psi_start(spec, data, &bounds)?];
    for s in &options.psi_starts {
        if s.len() != d {
            return Err(Error::parameter(format!(
                "psi start has dimension {}, model expects {d}",
                s.len()
            )));
        }
        let clamped = bounds.psi.clamp(s);
        if !starts.iter().any(|existing| existing == &clamped) {
            starts.push(clamped);
        }
    }

    struct StartOutcome {
        cps: ChangePointConfig,
        params: ParameterState,
        loglik: f64,
        trace: Vec<f64>,
        iterations: usize,
        converged: bool,
    }

    let mut outcomes: Vec<StartOutcome> = Vec::with_capacity(starts.len());
    let mut failures: Vec<Error> = Vec::new();
    for start in &starts {
        let run = || -> Result<StartOutcome> {
            let mut psi = start.clone();
            let mut trace = Vec::new();
            let mut prev_loglik = f64::NEG_INFINITY;
            let mut prev_boundaries: Option<Vec<usize>> = None;
            let mut converged = false;
            let mut last: Option<(ChangePointConfig, ParameterState, f64)> = None;
            let mut iterations = 0;
            for _ in 0..options.max_outer_iters {
                iterations += 1;
                let (cps, thetas, dp_loglik) =
                    fit_fixed_psi_with(spec, data.n(), &ctx, &psi, options.min_segment_len)?;
                trace.push(dp_loglik);
                let state = ParameterState::new(psi.clone(), thetas);
                let (refined, refined_loglik) =
                    joint_newton(spec, data, &ctx, &cps, &state, &bounds, 100)?;
                trace.push(refined_loglik);

                let boundaries_unchanged = prev_boundaries
                    .as_ref()
                    .map(|b| b.as_slice() == cps.boundaries())
                    .unwrap_or(false);
                let psi_step: f64 = refined
                    .psi
                    .iter()
                    .zip(&psi)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                let gain = refined_loglik - prev_loglik;
                prev_boundaries = Some(cps.boundaries().to_vec());
                psi = refined.psi.clone();
                last = Some((cps, refined, refined_loglik));
                prev_loglik = refined_loglik;
                if gain.abs() < options.tol * (1.0 + refined_loglik.abs())
                    || (boundaries_unchanged && psi_step < options.tol)
                {
                    converged = true;
                    break;
                }
            }
            let (cps, params, loglik) =
                last.ok_or_else(|| Error::internal("empty profile loop"))?;
            // the trace must be non-decreasing: the DP re-solve at the new psi
            // can only improve on the Newton value, and Newton only accepts ascent
            for w in trace.windows(2) {
                if w[1] < w[0] - 1e-9 * (1.0 + w[0].abs()) {
                    return Err(Error::internal(format!(
                        "profile loop decreased the log-likelihood: {} -> {}",
                        w[0], w[1]
                    )));
                }
            }
            Ok(StartOutcome {
                cps,
                params,
                loglik,
                trace,
                iterations,
                converged,
            })
        };
        match run() {
            Ok(outcome) => outcomes.push(outcome),
            Err(e @ Error::Internal(_)) => return Err(e),
            Err(e) => failures.push(e),
        }
    }

    if outcomes.is_empty() {
        let detail = failures
            .first()
            .map(|e| e.to_string())
            .unwrap_or_else(|| "no starts".to_string());
        return Err(Error::Optimization {
            detail: format!(
                "all {} psi starts failed; first failure: {detail}",
                starts.len()
            ),
            best: Vec::new(),
            grad_norm: f64::NAN,
        });
    }

    let best_idx = outcomes
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| {
            a.loglik
                .partial_cmp(&b.loglik)
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .map(|(i, _)| i)
        .unwrap();
    let best_loglik = outcomes[best_idx].loglik;
    let extra_local_maxima = outcomes
        .iter()
        .enumerate()
        .filter(|(i, o)| {
            *i != best_idx
                && (best_loglik - o.loglik).abs() <= options.tol * (1.0 + best_loglik.abs())
                && o.cps.boundaries() != outcomes[best_idx].cps.boundaries()
        })
        .count();
    let winner = &outcomes[best_idx];
    let diagnostics = FitDiagnostics {
        loglik_trace: winner.trace.clone(),
        outer_iterations: winner.iterations,
        converged: winner.converged,
        n_starts: starts.len(),
        extra_local_maxima,
        ..FitDiagnostics::default()
    };
    finalize_result(
        spec,
        data,
        winner.cps.clone(),
        winner.params.clone(),
        winner.loglik,
        diagnostics,
        options,
    )
}

fn finalize_result(
    spec: &ModelSpec,
    data: &Dataset,
    cps: ChangePointConfig,
    params: ParameterState,
    loglik: f64,
    mut diagnostics: FitDiagnostics,
    options: &FitOptions,
) -> Result<FitResult> {
    let bounds = spec.resolved_bounds(data)?;

    // boundary-activity flags over packed coordinates
    let labels = packed_labels(spec);
    let packed = params.pack();
    let packed_bounds = {
        let mut lo = bounds.psi.lower().to_vec();
        let mut hi = bounds.psi.upper().to_vec();
        for b in &bounds.thetas {
            lo.extend_from_slice(b.lower());
            hi.extend_from_slice(b.upper());
        }
        BlockBounds::new(lo, hi)?
    };
    diagnostics.boundary_active = packed_bounds
        .active_bounds(&packed, 1e-9)
        .into_iter()
        .zip(&labels)
        .filter(|&(active, _label)| active)
        .map(|(_active, label)| label.clone())
        .collect();

    // neighbor distinctness for same-kind adjacent families
    let mut min_gap: Option<f64> = None;
    for j in 0..spec.k() {
        if spec.family(j).kind() == spec.family(j + 1).kind() {
            let gap = params.thetas[j]
                .iter()
                .zip(&params.thetas[j + 1])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            min_gap = Some(min_gap.map_or(gap, |g: f64| g.min(gap)));
        }
    }
    diagnostics.neighbor_min_gap = min_gap;
    diagnostics.neighbors_distinct = min_gap.is_none_or(|g| g > 1e-6);

    let (info, std_errors) = if options.compute_inference {
        let info = plugin_info(spec, data, &cps, &params)?;
        match invert_spd(info.full()) {
            Ok(inverse) => {
                diagnostics.info_condition = Some(inverse.condition);
                let se = (0..packed.len())
                    .map(|c| inverse.matrix[(c, c)].max(0.0).sqrt())
                    .collect();
                (info, se)
            }
            Err(_) => {
                diagnostics.info_condition = None;
                let dim = packed.len();
                (info, vec![f64::NAN; dim])
            }
        }
    } else {
        (
            InfoMatrix::zero(spec.psi_dim(), spec.theta_dims()),
            vec![f64::NAN; packed.len()],
        )
    };

    Ok(FitResult {
        change_points: cps,
        params,
        loglik,
        info,
        std_errors,
        diagnostics,
    })
}

/// Labels of the packed parameter coordinates: `psi[c]`, then `theta{j}[c]`.
pub fn packed_labels(spec: &ModelSpec) -> Vec<String> {
    let mut labels = Vec::with_capacity(spec.packed_dim());
    for c in 0..spec.psi_dim() {
        labels.push(format!("psi[{c}]"));
    }
    for (j, dj) in spec.theta_dims().iter().enumerate() {
        for c in 0..*dj {
            labels.push(format!("theta{}[{c}]", j + 1));
        }
    }
    labels
}

/// Verification helper: the log-likelihood of a fit recomputed through the
/// plain per-observation path.
pub fn recomputed_loglik(spec: &ModelSpec, data: &Dataset, fit: &FitResult) -> Result<f64> {
    crate::likelihood::full_loglik(spec, data, &fit.change_points, &fit.params)
}
