//! The likelihood surface and its decomposition: the full log-likelihood,
//! the scaled objective J = J1 + J2 built from candidate/true segment
//! overlaps, the discrepancy functional v, and the separation constants
//! behind the deviation bound on J1.

mod expectation;
mod separation;

pub use expectation::{
    expected_log_density, expected_log_density_numeric, kl_v, kl_v_detailed, kl_v_numeric,
    Expectation, IntegrationMethod,
};
pub use separation::{
    deviation_bound_check, g_bar, rho, rho_sup, separation_constants, DeviationBoundReport,
    SeparationConstants,
};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{ChangePointConfig, ModelSpec};
use crate::params::ParameterState;

/// Counts of observations shared by candidate segment j and true segment i.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapMatrix {
    segments: usize,
    counts: Vec<usize>,
}

impl OverlapMatrix {
    /// Entry (j, i): observations in candidate segment j drawn from true
    /// segment i (0-based segment indices).
    pub fn get(&self, j: usize, i: usize) -> usize {
        self.counts[j * self.segments + i]
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn row_sums(&self) -> Vec<usize> {
        (0..self.segments)
            .map(|j| (0..self.segments).map(|i| self.get(j, i)).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<usize> {
        (0..self.segments)
            .map(|i| (0..self.segments).map(|j| self.get(j, i)).sum())
            .collect()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Interval-intersection cardinalities between a candidate and the true
/// segmentation of the same n observations.
pub fn overlap_counts(
    n: usize,
    cps: &ChangePointConfig,
    true_cps: &ChangePointConfig,
) -> Result<OverlapMatrix> {
    if cps.n() != n || true_cps.n() != n {
        return Err(Error::invalid_input(format!(
            "configurations cover n = {} and n = {}, expected {n}",
            cps.n(),
            true_cps.n()
        )));
    }
    if cps.k() != true_cps.k() {
        return Err(Error::invalid_input(format!(
            "configurations have k = {} and k = {}",
            cps.k(),
            true_cps.k()
        )));
    }
    let segments = cps.k() + 1;
    let a = cps.extended();
    let b = true_cps.extended();
    let mut counts = vec![0usize; segments * segments];
    for j in 0..segments {
        for i in 0..segments {
            let lo = a[j].max(b[i]);
            let hi = a[j + 1].min(b[i + 1]);
            counts[j * segments + i] = hi.saturating_sub(lo);
        }
    }
    Ok(OverlapMatrix { segments, counts })
}

/// Full log-likelihood of the segmentation: sum over segments j of the
/// segment-j log density over the rows that configuration assigns to j.
pub fn full_loglik(
    spec: &ModelSpec,
    data: &Dataset,
    cps: &ChangePointConfig,
    params: &ParameterState,
) -> Result<f64> {
    spec.check_data(data)?;
    if cps.n() != data.n() {
        return Err(Error::invalid_input(format!(
            "configuration covers n = {}, data has n = {}",
            cps.n(),
            data.n()
        )));
    }
    if cps.k() != spec.k() {
        return Err(Error::invalid_input(format!(
            "configuration has k = {}, model has k = {}",
            cps.k(),
            spec.k()
        )));
    }
    let bounds = spec.resolved_bounds(data)?;
    spec.check_state(&bounds, params)?;
    let mut total = 0.0;
    for j in 0..spec.n_segments() {
        let psi = spec.psi_for_segment(j, &params.psi);
        let family = spec.family(j);
        for i in cps.segment_range(j) {
            let ld = family
                .log_density(psi, &params.thetas[j], data.row(i))
                .map_err(|e| match e {
                    Error::OutOfSupport { family, detail, .. } => Error::OutOfSupport {
                        family,
                        index: Some(i),
                        detail,
                    },
                    other => Error::invalid_input(format!("segment {}: {other}", j + 1)),
                })?;
            total += ld;
        }
    }
    Ok(total)
}

/// Cross-expectation tables under the true segment distributions:
/// `cross[j][i]` = E[log f_j(psi, theta_j; X)] and `own[i]` =
/// E[log f_i(psi0, theta0_i; X)] for X from true segment i.
///
/// Only cells with positive overlap are evaluated; the J terms weight the
/// remaining cells by zero, and for mixed-support models those cells may
/// not even have a finite integral.
#[allow(clippy::needless_range_loop)]
pub(crate) fn expectation_tables(
    spec: &ModelSpec,
    params: &ParameterState,
    true_params: &ParameterState,
    needed: &OverlapMatrix,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let segments = spec.n_segments();
    let mut cross = vec![vec![f64::NAN; segments]; segments];
    let mut own = vec![0.0; segments];
    for i in 0..segments {
        let truth = spec.family(i);
        let truth_psi = spec.psi_for_segment(i, &true_params.psi);
        own[i] = expected_log_density(
            truth,
            truth_psi,
            &true_params.thetas[i],
            truth,
            truth_psi,
            &true_params.thetas[i],
        )?
        .value;
        for j in 0..segments {
            if needed.get(j, i) == 0 {
                continue;
            }
            let cand = spec.family(j);
            let cand_psi = spec.psi_for_segment(j, &params.psi);
            cross[j][i] = expected_log_density(
                cand,
                cand_psi,
                &params.thetas[j],
                truth,
                truth_psi,
                &true_params.thetas[i],
            )?
            .value;
        }
    }
    Ok((cross, own))
}

/// J1: the overlap-weighted sum of the discrepancies v between candidate
/// segment densities and true segment densities. Always non-positive.
#[allow(clippy::needless_range_loop)]
pub fn j1(
    spec: &ModelSpec,
    cps: &ChangePointConfig,
    params: &ParameterState,
    true_cps: &ChangePointConfig,
    true_params: &ParameterState,
) -> Result<f64> {
    let n = cps.n();
    let overlap = overlap_counts(n, cps, true_cps)?;
    let (cross, own) = expectation_tables(spec, params, true_params, &overlap)?;
    let mut total = 0.0;
    for j in 0..spec.n_segments() {
        for i in 0..spec.n_segments() {
            let weight = overlap.get(j, i) as f64 / n as f64;
            if weight > 0.0 {
                total += weight * (cross[j][i] - own[i]);
            }
        }
    }
    Ok(total)
}

/// J2: the difference of the centered log-likelihood sums, candidate
/// assignment minus true assignment, each observation centered at its
/// expectation under the true distribution of that index.
#[allow(clippy::needless_range_loop)]
pub fn j2(
    spec: &ModelSpec,
    data: &Dataset,
    cps: &ChangePointConfig,
    params: &ParameterState,
    true_cps: &ChangePointConfig,
    true_params: &ParameterState,
) -> Result<f64> {
    let n = data.n() as f64;
    let overlap = overlap_counts(data.n(), cps, true_cps)?;
    let (cross, own) = expectation_tables(spec, params, true_params, &overlap)?;
    let true_ext = true_cps.extended();
    let true_segment_of = |i: usize| -> usize {
        // index of the true segment containing row i
        match true_ext.binary_search(&(i + 1)) {
            Ok(pos) => pos.saturating_sub(1).min(true_cps.k()),
            Err(pos) => pos - 1,
        }
    };
    let mut term1 = 0.0;
    for j in 0..spec.n_segments() {
        let psi = spec.psi_for_segment(j, &params.psi);
        let family = spec.family(j);
        for i in cps.segment_range(j) {
            let lf = family.log_density(psi, &params.thetas[j], data.row(i))?;
            term1 += lf - cross[j][true_segment_of(i)];
        }
    }
    let mut term2 = 0.0;
    for j in 0..spec.n_segments() {
        let psi = spec.psi_for_segment(j, &true_params.psi);
        let family = spec.family(j);
        for i in true_cps.segment_range(j) {
            let lf = family.log_density(psi, &true_params.thetas[j], data.row(i))?;
            term2 += lf - own[j];
        }
    }
    Ok((term1 - term2) / n)
}

/// J2 evaluated by regrouping the centered sums over the overlap cells
/// shared by candidate segment j and true segment i. Algebraically equal
/// to [`j2`]; kept as a separate summation route for verification.
pub fn j2_regrouped(
    spec: &ModelSpec,
    data: &Dataset,
    cps: &ChangePointConfig,
    params: &ParameterState,
    true_cps: &ChangePointConfig,
    true_params: &ParameterState,
) -> Result<f64> {
    let n = data.n() as f64;
    let overlap = overlap_counts(data.n(), cps, true_cps)?;
    let (cross, own) = expectation_tables(spec, params, true_params, &overlap)?;
    let a = cps.extended();
    let b = true_cps.extended();
    let mut total = 0.0;
    for j in 0..spec.n_segments() {
        let cand_psi = spec.psi_for_segment(j, &params.psi);
        let cand = spec.family(j);
        for i in 0..spec.n_segments() {
            let lo = a[j].max(b[i]);
            let hi = a[j + 1].min(b[i + 1]);
            if lo >= hi {
                continue;
            }
            let truth_psi = spec.psi_for_segment(i, &true_params.psi);
            let truth = spec.family(i);
            let mut cell = 0.0;
            for t in lo..hi {
                let lf_cand = cand.log_density(cand_psi, &params.thetas[j], data.row(t))?;
                cell += lf_cand - cross[j][i];
            }
            for t in lo..hi {
                let lf_true = truth.log_density(truth_psi, &true_params.thetas[i], data.row(t))?;
                cell -= lf_true - own[i];
            }
            total += cell;
        }
    }
    Ok(total / n)
}
