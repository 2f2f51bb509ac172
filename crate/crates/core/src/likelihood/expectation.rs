use crate::error::{Error, Result};
use crate::family::SegmentFamily;
use crate::quadrature::adaptive_simpson;
use crate::rng::stream_rng;
use rand::RngCore;

const QUAD_TOL: f64 = 1e-11;
const QUAD_SD_WINDOW: f64 = 45.0;
const MC_DRAWS: usize = 1_000_000;
const MC_SALT: u64 = 0x4d43; // "MC"

/// How an expectation was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrationMethod {
    ClosedForm,
    Quadrature,
    Series,
    MonteCarlo,
}

/// An expectation value with its evaluation route and, for Monte Carlo,
/// the standard error of the estimate.
#[derive(Debug, Clone)]
pub struct Expectation {
    pub value: f64,
    pub std_error: Option<f64>,
    pub method: IntegrationMethod,
}

/// E[log f_c(psi_c, theta_c; X)] for X distributed as f_t(psi_t, theta_t).
///
/// Closed forms are used whenever the candidate family provides one against
/// the truth's moment profile; otherwise the expectation falls back to
/// adaptive quadrature (continuous univariate truths), direct series
/// summation (integer-supported truths), or seeded Monte Carlo with a
/// reported standard error (multivariate truths).
pub fn expected_log_density(
    cand: &dyn SegmentFamily,
    cand_psi: &[f64],
    cand_theta: &[f64],
    truth: &dyn SegmentFamily,
    truth_psi: &[f64],
    truth_theta: &[f64],
) -> Result<Expectation> {
    cand.validate_params(cand_psi, cand_theta)?;
    truth.validate_params(truth_psi, truth_theta)?;
    if !cand.support().covers(&truth.support()) {
        return Err(Error::invalid_input(format!(
            "support of {} does not cover support of {}; the integral diverges",
            cand.name(),
            truth.name()
        )));
    }
    if let Some(profile) = truth.truth_profile(truth_psi, truth_theta)? {
        if let Some(value) = cand.expected_log_density(cand_psi, cand_theta, &profile)? {
            return Ok(Expectation {
                value,
                std_error: None,
                method: IntegrationMethod::ClosedForm,
            });
        }
    }
    expected_log_density_numeric(cand, cand_psi, cand_theta, truth, truth_psi, truth_theta)
}

/// The non-closed-form evaluation route, exposed separately so callers can
/// cross-check closed forms against it.
pub fn expected_log_density_numeric(
    cand: &dyn SegmentFamily,
    cand_psi: &[f64],
    cand_theta: &[f64],
    truth: &dyn SegmentFamily,
    truth_psi: &[f64],
    truth_theta: &[f64],
) -> Result<Expectation> {
    cand.validate_params(cand_psi, cand_theta)?;
    truth.validate_params(truth_psi, truth_theta)?;
    if !cand.support().covers(&truth.support()) {
        return Err(Error::invalid_input(format!(
            "support of {} does not cover support of {}; the integral diverges",
            cand.name(),
            truth.name()
        )));
    }
    let profile = truth.truth_profile(truth_psi, truth_theta)?;
    if truth.support().is_discrete() {
        let mean = profile
            .as_ref()
            .map(|p| p.mean[0])
            .ok_or_else(|| Error::invalid_input("series summation needs a moment profile"))?;
        let sd = profile.as_ref().map(|p| p.sd()).unwrap_or(1.0);
        let lo = ((mean - 50.0 * sd - 60.0).floor().max(0.0)) as u64;
        let hi = (mean + 50.0 * sd + 60.0).ceil() as u64;
        let mut acc = 0.0;
        let mut mass = 0.0;
        for x in lo..=hi {
            let point = [x as f64];
            let pmf = truth.log_density(truth_psi, truth_theta, &point)?.exp();
            if pmf == 0.0 {
                continue;
            }
            mass += pmf;
            acc += pmf * cand.log_density(cand_psi, cand_theta, &point)?;
        }
        if 1.0 - mass > 1e-9 {
            return Err(Error::Integration {
                detail: "series summation window missed probability mass".to_string(),
                achieved: 1.0 - mass,
            });
        }
        return Ok(Expectation {
            value: acc,
            std_error: None,
            method: IntegrationMethod::Series,
        });
    }
    if truth.obs_dim() == 1 {
        let profile = profile.ok_or_else(|| {
            Error::invalid_input("quadrature needs a moment profile for its integration window")
        })?;
        let mean = profile.mean[0];
        let sd = profile.sd().max(1e-12);
        let support_lo = match truth.support() {
            crate::family::Support::NonNegativeReal => Some(0.0),
            _ => None,
        };
        let mut lo = mean - QUAD_SD_WINDOW * sd;
        if let Some(s) = support_lo {
            lo = lo.max(s);
        }
        let hi = mean + QUAD_SD_WINDOW * sd;
        let integrand = |x: f64| {
            let point = [x];
            let ft = truth
                .log_density(truth_psi, truth_theta, &point)
                .map(f64::exp)
                .unwrap_or(0.0);
            if ft == 0.0 {
                return 0.0;
            }
            match cand.log_density(cand_psi, cand_theta, &point) {
                Ok(lf) => ft * lf,
                Err(_) => 0.0,
            }
        };
        let value = adaptive_simpson(&integrand, lo, hi, QUAD_TOL)?;
        return Ok(Expectation {
            value,
            std_error: None,
            method: IntegrationMethod::Quadrature,
        });
    }
    // multivariate: seeded Monte Carlo with reported standard error
    let mut rng = stream_rng(
        MC_SALT,
        hash_params(truth_psi, truth_theta),
        hash_params(cand_psi, cand_theta),
        0,
    );
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut buf = Vec::with_capacity(truth.obs_dim());
    for _ in 0..MC_DRAWS {
        buf.clear();
        truth.sample_into(
            truth_psi,
            truth_theta,
            &mut rng as &mut dyn RngCore,
            &mut buf,
        )?;
        let lf = cand.log_density(cand_psi, cand_theta, &buf)?;
        sum += lf;
        sum_sq += lf * lf;
    }
    let n = MC_DRAWS as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    Ok(Expectation {
        value: mean,
        std_error: Some((var / n).sqrt()),
        method: IntegrationMethod::MonteCarlo,
    })
}

fn hash_params(psi: &[f64], theta: &[f64]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for v in psi.iter().chain(theta) {
        h ^= v.to_bits();
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// The discrepancy functional v: the expected log-likelihood ratio of the
/// candidate density against the true density, under the true density.
/// Non-positive, and zero exactly when the densities coincide.
pub fn kl_v(
    cand: &dyn SegmentFamily,
    cand_psi: &[f64],
    cand_theta: &[f64],
    truth: &dyn SegmentFamily,
    truth_psi: &[f64],
    truth_theta: &[f64],
) -> Result<f64> {
    Ok(kl_v_detailed(cand, cand_psi, cand_theta, truth, truth_psi, truth_theta)?.value)
}

/// [`kl_v`] with the evaluation route and the combined standard error when
/// either expectation is Monte Carlo.
pub fn kl_v_detailed(
    cand: &dyn SegmentFamily,
    cand_psi: &[f64],
    cand_theta: &[f64],
    truth: &dyn SegmentFamily,
    truth_psi: &[f64],
    truth_theta: &[f64],
) -> Result<Expectation> {
    let cross = expected_log_density(cand, cand_psi, cand_theta, truth, truth_psi, truth_theta)?;
    let own = expected_log_density(truth, truth_psi, truth_theta, truth, truth_psi, truth_theta)?;
    Ok(combine(cross, own))
}

/// [`kl_v`] forced through the numeric route (quadrature, series, or Monte
/// Carlo), bypassing all closed forms.
pub fn kl_v_numeric(
    cand: &dyn SegmentFamily,
    cand_psi: &[f64],
    cand_theta: &[f64],
    truth: &dyn SegmentFamily,
    truth_psi: &[f64],
    truth_theta: &[f64],
) -> Result<Expectation> {
    let cross =
        expected_log_density_numeric(cand, cand_psi, cand_theta, truth, truth_psi, truth_theta)?;
    let own =
        expected_log_density_numeric(truth, truth_psi, truth_theta, truth, truth_psi, truth_theta)?;
    Ok(combine(cross, own))
}

fn combine(cross: Expectation, own: Expectation) -> Expectation {
    let std_error = match (cross.std_error, own.std_error) {
        (None, None) => None,
        (a, b) => Some((a.unwrap_or(0.0).powi(2) + b.unwrap_or(0.0).powi(2)).sqrt()),
    };
    let method = match (cross.method, own.method) {
        (IntegrationMethod::MonteCarlo, _) | (_, IntegrationMethod::MonteCarlo) => {
            IntegrationMethod::MonteCarlo
        }
        (IntegrationMethod::Quadrature, _) | (_, IntegrationMethod::Quadrature) => {
            IntegrationMethod::Quadrature
        }
        (IntegrationMethod::Series, _) | (_, IntegrationMethod::Series) => {
            IntegrationMethod::Series
        }
        _ => IntegrationMethod::ClosedForm,
    };
    Expectation {
        value: cross.value - own.value,
        std_error,
        method,
    }
}
