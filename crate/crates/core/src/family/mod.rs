//! Segment densities and their evaluators.
//!
//! Every built-in family is an exponential family: its log density is
//! affine in a fixed set of sufficient statistics of the observation.
//! That structure is what makes interval costs O(1) after a prefix pass
//! over the data, gives closed-form inner maximizers and cross
//! expectations, and supplies the moment bounds the Monte Carlo
//! experiments lean on.

mod exponential;
mod mvnormal;
mod normal;
mod poisson;

pub use exponential::Exponential;
pub use mvnormal::{chol_index, pack_chol, unpack_chol, MvNormalCommonCov};
pub use normal::{NormalCommonVar, NormalKnownVar};
pub use poisson::Poisson;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::params::BlockBounds;
use nalgebra::DMatrix;
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Debug;
use std::ops::Range;

/// Enumerated kinds of the built-in segment families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    NormalKnownVar,
    NormalCommonVar,
    Exponential,
    Poisson,
    MvNormalCommonCov,
}

/// Support of a segment density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    Real,
    /// Non-negative half line `[0, inf)`.
    NonNegativeReal,
    /// Non-negative integers (stored as f64 observations).
    NonNegativeInt,
    RealVector(usize),
}

impl Support {
    /// Whether a candidate density with support `self` is finite almost
    /// everywhere under a true density with support `truth`.
    pub fn covers(&self, truth: &Support) -> bool {
        match (self, truth) {
            (Support::Real, Support::Real)
            | (Support::Real, Support::NonNegativeReal)
            | (Support::Real, Support::NonNegativeInt)
            | (Support::NonNegativeReal, Support::NonNegativeReal)
            | (Support::NonNegativeReal, Support::NonNegativeInt)
            | (Support::NonNegativeInt, Support::NonNegativeInt) => true,
            (Support::RealVector(a), Support::RealVector(b)) => a == b,
            _ => false,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Support::NonNegativeInt)
    }
}

/// Role of the common parameter block for a family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommonParam {
    /// The family does not read the common block.
    None,
    /// Scalar variance shared across segments.
    Variance,
    /// Lower-triangular Cholesky factor of a shared covariance, packed
    /// row-major; dimension p(p+1)/2 for observation dimension p.
    CholCovariance(usize),
}

impl CommonParam {
    pub fn dim(&self) -> usize {
        match self {
            CommonParam::None => 0,
            CommonParam::Variance => 1,
            CommonParam::CholCovariance(p) => p * (p + 1) / 2,
        }
    }
}

/// Moment summary of a (true) segment distribution, sufficient for the
/// closed-form cross expectations used by the divergence machinery.
#[derive(Debug, Clone)]
pub struct TruthProfile {
    pub support: Support,
    pub mean: Vec<f64>,
    /// Covariance matrix (1x1 for univariate families).
    pub cov: DMatrix<f64>,
    /// E[ln Gamma(X+1)] for integer-supported distributions.
    pub e_ln_factorial: Option<f64>,
}

impl TruthProfile {
    pub fn var(&self) -> f64 {
        self.cov[(0, 0)]
    }

    pub fn sd(&self) -> f64 {
        self.var().sqrt()
    }
}

/// Interval cost evaluator over a fixed dataset: sums of segment
/// log-densities over contiguous row ranges, with closed-form inner
/// maximizers where the family admits them. Built on prefix sums of the
/// family's sufficient statistics so a single interval query is O(1) in
/// the interval length.
pub trait SegmentCostEval: Send + Sync {
    fn theta_dim(&self) -> usize;

    /// Whether every observation in rows `s..t` lies in the family's
    /// support. An interval containing a foreign observation has zero
    /// likelihood under this family, so its cost is minus infinity.
    fn interval_valid(&self, _s: usize, _t: usize) -> bool {
        true
    }

    /// Sum of log f(psi, theta; x_i) over rows `s..t`.
    fn cost_at(&self, s: usize, t: usize, psi: &[f64], theta: &[f64]) -> f64;

    /// Gradient of [`cost_at`](Self::cost_at) with respect to theta.
    fn grad_theta(&self, s: usize, t: usize, psi: &[f64], theta: &[f64]) -> Vec<f64>;

    /// Hessian of [`cost_at`](Self::cost_at) with respect to theta.
    fn hess_theta(&self, s: usize, t: usize, psi: &[f64], theta: &[f64]) -> DMatrix<f64>;

    /// Unconstrained maximizer of the interval log-likelihood in theta,
    /// when a closed form exists.
    fn closed_form_mle(&self, s: usize, t: usize, psi: &[f64]) -> Option<Vec<f64>>;

    /// Allocation-free maximized interval cost, when the family can clamp
    /// its closed form against the box inline. `None` falls back to the
    /// general maximizer. This is the dynamic program's hot path.
    fn best_cost(&self, _s: usize, _t: usize, _psi: &[f64], _bounds: &BlockBounds) -> Option<f64> {
        None
    }
}

/// A parametric segment density f(psi, theta; x) together with the
/// evaluators the estimation and verification machinery needs.
///
/// Gradients are packed common-block-first: the first `common_param().dim()`
/// entries differentiate with respect to psi, the rest with respect to theta.
pub trait SegmentFamily: Send + Sync + Debug {
    fn kind(&self) -> FamilyKind;

    /// Short human-readable identifier used in error messages.
    fn name(&self) -> String;

    fn obs_dim(&self) -> usize;

    fn theta_dim(&self) -> usize;

    fn common_param(&self) -> CommonParam;

    fn support(&self) -> Support;

    fn in_support(&self, x: &[f64]) -> bool;

    /// Domain-level parameter validation (positivity, Cholesky diagonal, ...).
    /// Box membership is enforced at the model level, not here.
    fn validate_params(&self, psi: &[f64], theta: &[f64]) -> Result<()>;

    fn log_density(&self, psi: &[f64], theta: &[f64], x: &[f64]) -> Result<f64>;

    /// Gradient of the log density in packed (psi, theta) coordinates.
    fn grad_log_density(&self, psi: &[f64], theta: &[f64], x: &[f64]) -> Result<Vec<f64>>;

    /// Hessian of the log density in packed (psi, theta) coordinates.
    ///
    /// The default implementation central-differences the analytic gradient
    /// and symmetrizes; families with simple second derivatives override it.
    fn hess_log_density(&self, psi: &[f64], theta: &[f64], x: &[f64]) -> Result<DMatrix<f64>> {
        fd_hessian_from_grad(self, psi, theta, x)
    }

    /// Draws one observation, appending `obs_dim` values to `out`.
    fn sample_into(
        &self,
        psi: &[f64],
        theta: &[f64],
        rng: &mut dyn RngCore,
        out: &mut Vec<f64>,
    ) -> Result<()>;

    /// Moment summary used for closed-form expectations, when available.
    fn truth_profile(&self, psi: &[f64], theta: &[f64]) -> Result<Option<TruthProfile>>;

    /// Closed-form E[log f(psi, theta; X)] for X described by `truth`,
    /// or `None` when the family has no closed form against that profile.
    fn expected_log_density(
        &self,
        psi: &[f64],
        theta: &[f64],
        truth: &TruthProfile,
    ) -> Result<Option<f64>>;

    /// Builds the O(1)-per-interval cost evaluator over `data`.
    fn cost_evaluator(&self, data: &Dataset) -> Result<Box<dyn SegmentCostEval>>;

    /// Data-driven default bounds for theta (used when the model omits a box).
    fn default_theta_bounds(&self, data: &Dataset) -> Result<BlockBounds>;

    /// Data-driven default bounds for this family's common block.
    fn default_psi_bounds(&self, data: &Dataset) -> Result<BlockBounds>;

    /// Family-specific validity constraints on user-supplied bounds.
    fn validate_bounds(&self, _theta: &BlockBounds, _psi: &BlockBounds) -> Result<()> {
        Ok(())
    }
}

/// Central-difference Hessian of the packed log-density gradient.
pub(crate) fn fd_hessian_from_grad<F: SegmentFamily + ?Sized>(
    family: &F,
    psi: &[f64],
    theta: &[f64],
    x: &[f64],
) -> Result<DMatrix<f64>> {
    let d = psi.len();
    let dim = d + theta.len();
    let mut h = DMatrix::zeros(dim, dim);
    let mut psi_hi = psi.to_vec();
    let mut psi_lo = psi.to_vec();
    let mut th_hi = theta.to_vec();
    let mut th_lo = theta.to_vec();
    for c in 0..dim {
        let (base, idx) = if c < d {
            (psi[c], c)
        } else {
            (theta[c - d], c - d)
        };
        let step = 1e-6 * (1.0 + base.abs());
        let (gp, gm) = if c < d {
            psi_hi[idx] = base + step;
            psi_lo[idx] = base - step;
            let gp = family.grad_log_density(&psi_hi, theta, x)?;
            let gm = family.grad_log_density(&psi_lo, theta, x)?;
            psi_hi[idx] = base;
            psi_lo[idx] = base;
            (gp, gm)
        } else {
            th_hi[idx] = base + step;
            th_lo[idx] = base - step;
            let gp = family.grad_log_density(psi, &th_hi, x)?;
            let gm = family.grad_log_density(psi, &th_lo, x)?;
            th_hi[idx] = base;
            th_lo[idx] = base;
            (gp, gm)
        };
        for r in 0..dim {
            h[(r, c)] = (gp[r] - gm[r]) / (2.0 * step);
        }
    }
    // symmetrize
    let ht = h.transpose();
    Ok((h + ht) * 0.5)
}

/// Draws `count` i.i.d. observations, deterministic in `seed`.
pub fn sample(
    family: &dyn SegmentFamily,
    psi: &[f64],
    theta: &[f64],
    count: usize,
    seed: u64,
) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::invalid_input("sample count must be >= 1"));
    }
    family.validate_params(psi, theta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(count * family.obs_dim());
    for _ in 0..count {
        family.sample_into(psi, theta, &mut rng, &mut values)?;
    }
    Dataset::new(values, family.obs_dim())
}

/// Maximizes the interval log-likelihood in theta over `bounds` for fixed
/// psi and returns the maximizer with the maximized value.
///
/// Closed forms are used (clamped to the box) where the family provides
/// them; otherwise a safeguarded projected Newton iteration runs from the
/// clamped closed form or the box midpoint.
pub fn segment_mle_theta(
    family: &dyn SegmentFamily,
    psi: &[f64],
    data: &Dataset,
    rows: Range<usize>,
    bounds: &BlockBounds,
) -> Result<(Vec<f64>, f64)> {
    if rows.is_empty() || rows.end > data.n() {
        return Err(Error::invalid_input(format!(
            "invalid row range {rows:?} for n={}",
            data.n()
        )));
    }
    let eval = family.cost_evaluator(data)?;
    segment_mle_with_eval(eval.as_ref(), psi, rows.start, rows.end, bounds)
}

/// Same as [`segment_mle_theta`] for a prebuilt cost evaluator.
pub fn segment_mle_with_eval(
    eval: &dyn SegmentCostEval,
    psi: &[f64],
    s: usize,
    t: usize,
    bounds: &BlockBounds,
) -> Result<(Vec<f64>, f64)> {
    debug_assert_eq!(eval.theta_dim(), bounds.dim());
    if !eval.interval_valid(s, t) {
        return Ok((bounds.midpoint(), f64::NEG_INFINITY));
    }
    if eval.theta_dim() == 0 {
        return Ok((Vec::new(), eval.cost_at(s, t, psi, &[])));
    }
    let start = match eval.closed_form_mle(s, t, psi) {
        Some(unconstrained) => {
            let clamped = bounds.clamp(&unconstrained);
            if clamped == unconstrained {
                let value = eval.cost_at(s, t, psi, &clamped);
                return Ok((clamped, value));
            }
            clamped
        }
        None => bounds.midpoint(),
    };
    projected_newton_theta(eval, psi, s, t, bounds, start)
}

const NEWTON_MAX_ITERS: usize = 100;
const NEWTON_GRAD_TOL: f64 = 1e-10;

/// Box-projected safeguarded Newton ascent on the interval log-likelihood.
fn projected_newton_theta(
    eval: &dyn SegmentCostEval,
    psi: &[f64],
    s: usize,
    t: usize,
    bounds: &BlockBounds,
    start: Vec<f64>,
) -> Result<(Vec<f64>, f64)> {
    let mut theta = bounds.clamp(&start);
    let mut value = eval.cost_at(s, t, psi, &theta);
    for _ in 0..NEWTON_MAX_ITERS {
        let grad = eval.grad_theta(s, t, psi, &theta);
        let pg = projected_gradient(&grad, &theta, bounds);
        let pg_norm = norm(&pg);
        if pg_norm <= NEWTON_GRAD_TOL * (1.0 + value.abs()) {
            return Ok((theta, value));
        }
        let hess = eval.hess_theta(s, t, psi, &theta);
        let direction = ascent_direction(&hess, &grad);
        let mut alpha = 1.0;
        let mut improved = false;
        for _ in 0..60 {
            let trial: Vec<f64> = theta
                .iter()
                .zip(&direction)
                .map(|(x, d)| x + alpha * d)
                .collect();
            let trial = bounds.clamp(&trial);
            let trial_value = eval.cost_at(s, t, psi, &trial);
            if trial_value > value {
                theta = trial;
                value = trial_value;
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !improved {
            // No ascent along the (possibly damped) Newton direction: either
            // converged on the boundary or the surface is flat here.
            return Ok((theta, value));
        }
    }
    let grad = eval.grad_theta(s, t, psi, &theta);
    let pg_norm = norm(&projected_gradient(&grad, &theta, bounds));
    if pg_norm <= 1e-6 * (1.0 + value.abs()) {
        // Accept a slightly loose stationary point rather than fail.
        return Ok((theta, value));
    }
    Err(Error::Optimization {
        detail: "segment theta maximization did not converge".to_string(),
        best: theta,
        grad_norm: pg_norm,
    })
}

/// Newton ascent direction with Levenberg-style damping when the negated
/// Hessian is not positive definite.
pub(crate) fn ascent_direction(hess: &DMatrix<f64>, grad: &[f64]) -> Vec<f64> {
    let dim = grad.len();
    let g = nalgebra::DVector::from_column_slice(grad);
    let neg_h = -hess.clone();
    let scale = neg_h.diagonal().amax().max(1.0);
    let mut tau = 0.0;
    for _ in 0..40 {
        let mut m = neg_h.clone();
        for i in 0..dim {
            m[(i, i)] += tau;
        }
        if let Some(chol) = nalgebra::Cholesky::new(m) {
            let d = chol.solve(&g);
            return d.iter().copied().collect();
        }
        tau = if tau == 0.0 { 1e-8 * scale } else { tau * 10.0 };
    }
    // Fall back to steepest ascent.
    grad.to_vec()
}

/// Gradient with components pointing out of the box at active bounds zeroed.
pub(crate) fn projected_gradient(grad: &[f64], x: &[f64], bounds: &BlockBounds) -> Vec<f64> {
    let lo = bounds.lower();
    let hi = bounds.upper();
    grad.iter()
        .enumerate()
        .map(|(i, g)| {
            let scale = (hi[i] - lo[i]).abs().max(1.0);
            let at_lo = (x[i] - lo[i]).abs() <= 1e-12 * scale;
            let at_hi = (hi[i] - x[i]).abs() <= 1e-12 * scale;
            if (at_lo && *g < 0.0) || (at_hi && *g > 0.0) {
                0.0
            } else {
                *g
            }
        })
        .collect()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn mean_and_range(values: impl Iterator<Item = f64>) -> (f64, f64, f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        min = min.min(v);
        max = max.max(v);
        sum += v;
        count += 1;
    }
    let mean = sum / count as f64;
    (mean, min, max, max - min)
}

/// Default mean-style bounds: generous multiple of the observed range.
pub(crate) fn default_mean_bounds(min: f64, max: f64, range: f64) -> (f64, f64) {
    let spread = if range > 0.0 {
        range
    } else {
        min.abs().max(1.0)
    };
    (min - 10.0 * spread, max + 10.0 * spread)
}

/// Default variance-style bounds around the sample variance.
pub(crate) fn default_variance_bounds(sample_var: f64) -> (f64, f64) {
    let s2 = if sample_var > 0.0 { sample_var } else { 1.0 };
    (1e-6 * s2, 1e6 * s2)
}
