//! Plug-in information matrix in outer-product-of-gradients form, its
//! block structure, and Wald intervals for the packed parameter vector.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{ChangePointConfig, ModelSpec};
use crate::params::ParameterState;
use nalgebra::{Cholesky, DMatrix};
use statrs::distribution::{ContinuousCDF, Normal};

/// The assembled plug-in information matrix with its block layout:
/// the psi block first, then one theta block per segment. Cross-theta
/// blocks are structurally zero.
#[derive(Debug, Clone)]
pub struct InfoMatrix {
    matrix: DMatrix<f64>,
    psi_dim: usize,
    theta_dims: Vec<usize>,
}

impl InfoMatrix {
    pub fn zero(psi_dim: usize, theta_dims: Vec<usize>) -> Self {
        let dim = psi_dim + theta_dims.iter().sum::<usize>();
        InfoMatrix {
            matrix: DMatrix::zeros(dim, dim),
            psi_dim,
            theta_dims,
        }
    }

    pub fn full(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn psi_dim(&self) -> usize {
        self.psi_dim
    }

    pub fn theta_dims(&self) -> &[usize] {
        &self.theta_dims
    }

    /// Packed offset of segment j's theta block.
    pub fn theta_offset(&self, j: usize) -> usize {
        self.psi_dim + self.theta_dims[..j].iter().sum::<usize>()
    }

    pub fn psi_psi(&self) -> DMatrix<f64> {
        self.matrix
            .view((0, 0), (self.psi_dim, self.psi_dim))
            .into()
    }

    pub fn psi_theta(&self, j: usize) -> DMatrix<f64> {
        let off = self.theta_offset(j);
        self.matrix
            .view((0, off), (self.psi_dim, self.theta_dims[j]))
            .into()
    }

    pub fn theta_theta(&self, j: usize) -> DMatrix<f64> {
        let off = self.theta_offset(j);
        self.matrix
            .view((off, off), (self.theta_dims[j], self.theta_dims[j]))
            .into()
    }
}

/// Per-observation score contribution of one segment, summed as packed
/// outer products over a row range with a fixed midpoint-split reduction
/// tree. The tree makes the sum independent of threading and bit-stable
/// under dataset duplication.
struct SegmentAccum {
    psi_psi: DMatrix<f64>,
    psi_theta: DMatrix<f64>,
    theta_theta: DMatrix<f64>,
}

fn segment_outer_products(
    spec: &ModelSpec,
    data: &Dataset,
    j: usize,
    params: &ParameterState,
    lo: usize,
    hi: usize,
) -> Result<SegmentAccum> {
    let family = spec.family(j);
    let psi = spec.psi_for_segment(j, &params.psi);
    let d = psi.len();
    let dj = family.theta_dim();
    if hi - lo == 1 {
        let g = family.grad_log_density(psi, &params.thetas[j], data.row(lo))?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                index: lo,
                detail: "non-finite score contribution".to_string(),
            });
        }
        let mut psi_psi = DMatrix::zeros(d, d);
        let mut psi_theta = DMatrix::zeros(d, dj);
        let mut theta_theta = DMatrix::zeros(dj, dj);
        for a in 0..d {
            for b in 0..d {
                psi_psi[(a, b)] = g[a] * g[b];
            }
            for b in 0..dj {
                psi_theta[(a, b)] = g[a] * g[d + b];
            }
        }
        for a in 0..dj {
            for b in 0..dj {
                theta_theta[(a, b)] = g[d + a] * g[d + b];
            }
        }
        return Ok(SegmentAccum {
            psi_psi,
            psi_theta,
            theta_theta,
        });
    }
    let mid = lo + (hi - lo) / 2;
    let left = segment_outer_products(spec, data, j, params, lo, mid)?;
    let right = segment_outer_products(spec, data, j, params, mid, hi)?;
    Ok(SegmentAccum {
        psi_psi: left.psi_psi + right.psi_psi,
        psi_theta: left.psi_theta + right.psi_theta,
        theta_theta: left.theta_theta + right.theta_theta,
    })
}

/// Plug-in information matrix at (cps, params): per-segment sums of
/// outer products of per-observation log-density gradients, with the psi
/// block accumulated over all segments and theta blocks over their own
/// segments only.
#[allow(clippy::needless_range_loop)]
pub fn plugin_info(
    spec: &ModelSpec,
    data: &Dataset,
    cps: &ChangePointConfig,
    params: &ParameterState,
) -> Result<InfoMatrix> {
    spec.check_data(data)?;
    if cps.n() != data.n() || cps.k() != spec.k() {
        return Err(Error::invalid_input(
            "configuration does not match the data/model".to_string(),
        ));
    }
    let d = spec.psi_dim();
    let theta_dims = spec.theta_dims();
    let mut info = InfoMatrix::zero(d, theta_dims.clone());
    for j in 0..spec.n_segments() {
        let r = cps.segment_range(j);
        let acc = segment_outer_products(spec, data, j, params, r.start, r.end)?;
        let fam_d = spec.psi_for_segment(j, &params.psi).len();
        let off = info.theta_offset(j);
        for a in 0..fam_d {
            for b in 0..fam_d {
                info.matrix[(a, b)] += acc.psi_psi[(a, b)];
            }
            for b in 0..theta_dims[j] {
                info.matrix[(a, off + b)] += acc.psi_theta[(a, b)];
                info.matrix[(off + b, a)] += acc.psi_theta[(a, b)];
            }
        }
        for a in 0..theta_dims[j] {
            for b in 0..theta_dims[j] {
                info.matrix[(off + a, off + b)] += acc.theta_theta[(a, b)];
            }
        }
    }
    Ok(info)
}

/// Negative-Hessian information matrix at the same point; a diagnostic
/// companion to the outer-product form.
#[allow(clippy::needless_range_loop)]
pub fn hessian_info(
    spec: &ModelSpec,
    data: &Dataset,
    cps: &ChangePointConfig,
    params: &ParameterState,
) -> Result<DMatrix<f64>> {
    let d = spec.psi_dim();
    let theta_dims = spec.theta_dims();
    let dim = spec.packed_dim();
    let mut out = DMatrix::zeros(dim, dim);
    let mut off = d;
    for j in 0..spec.n_segments() {
        let family = spec.family(j);
        let psi = spec.psi_for_segment(j, &params.psi);
        let fam_d = psi.len();
        let dj = theta_dims[j];
        for i in cps.segment_range(j) {
            let h = family.hess_log_density(psi, &params.thetas[j], data.row(i))?;
            for a in 0..fam_d {
                for b in 0..fam_d {
                    out[(a, b)] -= h[(a, b)];
                }
                for b in 0..dj {
                    out[(a, off + b)] -= h[(a, fam_d + b)];
                    out[(off + b, a)] -= h[(fam_d + b, a)];
                }
            }
            for a in 0..dj {
                for b in 0..dj {
                    out[(off + a, off + b)] -= h[(fam_d + a, fam_d + b)];
                }
            }
        }
        off += dj;
    }
    Ok(out)
}

/// Inverse of a symmetric positive-definite matrix via Cholesky, escalating
/// a diagonal jitter from 1e-10 of the diagonal scale when needed.
pub struct SpdInverse {
    pub matrix: DMatrix<f64>,
    pub condition: f64,
    pub jitter: f64,
}

pub fn invert_spd(m: &DMatrix<f64>) -> Result<SpdInverse> {
    let dim = m.nrows();
    if dim == 0 {
        return Err(Error::invalid_input("cannot invert an empty matrix"));
    }
    let scale = m.diagonal().amax().max(1e-300);
    let eigen = m.clone().symmetric_eigen();
    let min_ev = eigen.eigenvalues.min();
    let max_ev = eigen.eigenvalues.max();
    let condition = if min_ev > 0.0 {
        max_ev / min_ev
    } else {
        f64::INFINITY
    };
    let mut jitter = 0.0;
    for _ in 0..16 {
        let mut attempt = m.clone();
        for i in 0..dim {
            attempt[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(attempt) {
            return Ok(SpdInverse {
                matrix: chol.inverse(),
                condition,
                jitter,
            });
        }
        jitter = if jitter == 0.0 {
            1e-10 * scale
        } else {
            jitter * 10.0
        };
    }
    Err(Error::Singular { condition })
}

/// One per-coordinate confidence interval.
#[derive(Debug, Clone)]
pub struct WaldInterval {
    pub label: String,
    pub estimate: f64,
    pub std_error: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Two-sided quantile of the standard normal for a confidence level.
pub fn normal_quantile_two_sided(level: f64) -> Result<f64> {
    if !(0.0 < level && level < 1.0) {
        return Err(Error::invalid_input(format!(
            "confidence level must be in (0, 1), got {level}"
        )));
    }
    let normal = Normal::new(0.0, 1.0).map_err(|e| Error::internal(e.to_string()))?;
    Ok(normal.inverse_cdf(0.5 * (1.0 + level)))
}

/// Standard normal CDF (for standardized-error summaries).
pub fn standard_normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).map(|n| n.cdf(x)).unwrap_or(f64::NAN)
}

/// Per-coordinate Wald intervals phi_c +/- z sqrt([info^-1]_cc).
pub fn wald_intervals(
    spec: &ModelSpec,
    params: &ParameterState,
    info: &InfoMatrix,
    level: f64,
) -> Result<Vec<WaldInterval>> {
    let packed = params.pack();
    if packed.len() != info.dim() {
        return Err(Error::invalid_input(format!(
            "state has packed dimension {}, information matrix has {}",
            packed.len(),
            info.dim()
        )));
    }
    let z = normal_quantile_two_sided(level)?;
    let inverse = invert_spd(info.full())?;
    // a jitter-rescued inverse of an effectively singular matrix yields
    // meaningless interval widths; report it as singular instead
    if !inverse.condition.is_finite() || inverse.condition > 1e15 {
        return Err(Error::Singular {
            condition: inverse.condition,
        });
    }
    let labels = crate::estimator::packed_labels(spec);
    Ok(packed
        .iter()
        .enumerate()
        .map(|(c, est)| {
            let se = inverse.matrix[(c, c)].max(0.0).sqrt();
            WaldInterval {
                label: labels[c].clone(),
                estimate: *est,
                std_error: se,
                lower: est - z * se,
                upper: est + z * se,
            }
        })
        .collect())
}
