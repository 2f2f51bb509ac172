use super::{
    default_mean_bounds, mean_and_range, CommonParam, FamilyKind, SegmentCostEval, SegmentFamily,
    Support, TruthProfile,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::params::BlockBounds;
use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

const LN_2PI: f64 = 1.8378770664093453;

/// Packed index of entry (row, col), row >= col, in the row-major lower triangle.
pub fn chol_index(row: usize, col: usize) -> usize {
    row * (row + 1) / 2 + col
}

/// Expands a packed lower triangle into a full p x p matrix.
pub fn unpack_chol(psi: &[f64], p: usize) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(p, p);
    for row in 0..p {
        for col in 0..=row {
            l[(row, col)] = psi[chol_index(row, col)];
        }
    }
    l
}

/// Packs the lower triangle of a p x p matrix row-major.
pub fn pack_chol(l: &DMatrix<f64>) -> Vec<f64> {
    let p = l.nrows();
    let mut out = Vec::with_capacity(p * (p + 1) / 2);
    for row in 0..p {
        for col in 0..=row {
            out.push(l[(row, col)]);
        }
    }
    out
}

fn forward_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let p = l.nrows();
    let mut z = DVector::zeros(p);
    for i in 0..p {
        let mut acc = b[i];
        for j in 0..i {
            acc -= l[(i, j)] * z[j];
        }
        z[i] = acc / l[(i, i)];
    }
    z
}

fn backward_solve_transpose(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let p = l.nrows();
    let mut w = DVector::zeros(p);
    for i in (0..p).rev() {
        let mut acc = b[i];
        for j in (i + 1)..p {
            acc -= l[(j, i)] * w[j];
        }
        w[i] = acc / l[(i, i)];
    }
    w
}

fn precision_from_chol(l: &DMatrix<f64>) -> DMatrix<f64> {
    let p = l.nrows();
    let mut inv = DMatrix::zeros(p, p);
    for i in 0..p {
        let mut e = DVector::zeros(p);
        e[i] = 1.0;
        let z = forward_solve(l, &e);
        let col = backward_solve_transpose(l, &z);
        inv.set_column(i, &col);
    }
    // force exact symmetry
    let inv_t = inv.transpose();
    (inv + inv_t) * 0.5
}

/// p-variate normal segment with mean vector theta and a covariance matrix
/// common to all segments, parameterized by its packed Cholesky factor.
#[derive(Debug, Clone)]
pub struct MvNormalCommonCov {
    dim: usize,
}

impl MvNormalCommonCov {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 1 {
            return Err(Error::invalid_input("mvnormal dimension must be >= 1"));
        }
        Ok(MvNormalCommonCov { dim })
    }

    fn psi_dim(&self) -> usize {
        self.dim * (self.dim + 1) / 2
    }
}

struct MvnCost {
    p: usize,
    /// prefix sums of x
    s1: Vec<DVector<f64>>,
    /// prefix sums of x x^T
    s2: Vec<DMatrix<f64>>,
}

impl MvnCost {
    fn sums(&self, s: usize, t: usize) -> (f64, DVector<f64>, DMatrix<f64>) {
        let m = (t - s) as f64;
        let s1 = &self.s1[t] - &self.s1[s];
        let s2 = &self.s2[t] - &self.s2[s];
        (m, s1, s2)
    }
}

impl SegmentCostEval for MvnCost {
    fn theta_dim(&self) -> usize {
        self.p
    }

    fn cost_at(&self, s: usize, t: usize, psi: &[f64], theta: &[f64]) -> f64 {
        let l = unpack_chol(psi, self.p);
        let precision = precision_from_chol(&l);
        let (m, s1, s2) = self.sums(s, t);
        let mu = DVector::from_column_slice(theta);
        let centered =
            s2 - &s1 * mu.transpose() - &mu * s1.transpose() + (&mu * mu.transpose()) * m;
        let quad = (precision * centered).trace();
        let ln_det_l: f64 = (0..self.p).map(|i| l[(i, i)].ln()).sum();
        -m * (0.5 * self.p as f64 * LN_2PI + ln_det_l) - 0.5 * quad
    }

    fn grad_theta(&self, s: usize, t: usize, psi: &[f64], theta: &[f64]) -> Vec<f64> {
        let l = unpack_chol(psi, self.p);
        let precision = precision_from_chol(&l);
        let (m, s1, _) = self.sums(s, t);
        let mu = DVector::from_column_slice(theta);
        let g = precision * (s1 - mu * m);
        g.iter().copied().collect()
    }

    fn hess_theta(&self, s: usize, t: usize, psi: &[f64], _theta: &[f64]) -> DMatrix<f64> {
        let l = unpack_chol(psi, self.p);
        let precision = precision_from_chol(&l);
        let m = (t - s) as f64;
        precision * (-m)
    }

    fn closed_form_mle(&self, s: usize, t: usize, _psi: &[f64]) -> Option<Vec<f64>> {
        let (m, s1, _) = self.sums(s, t);
        Some((s1 / m).iter().copied().collect())
    }
}

impl SegmentFamily for MvNormalCommonCov {
    fn kind(&self) -> FamilyKind {
        FamilyKind::MvNormalCommonCov
    }

    fn name(&self) -> String {
        format!("mvnormal-common-cov(dim={})", self.dim)
    }

    fn obs_dim(&self) -> usize {
        self.dim
    }

    fn theta_dim(&self) -> usize {
        self.dim
    }

    fn common_param(&self) -> CommonParam {
        CommonParam::CholCovariance(self.dim)
    }

    fn support(&self) -> Support {
        Support::RealVector(self.dim)
    }

    fn in_support(&self, x: &[f64]) -> bool {
        x.len() == self.dim && x.iter().all(|v| v.is_finite())
    }

    fn validate_params(&self, psi: &[f64], theta: &[f64]) -> Result<()> {
        if psi.len() != self.psi_dim() {
            return Err(Error::parameter(format!(
                "{} expects psi of length {}, got {}",
                self.name(),
                self.psi_dim(),
                psi.len()
            )));
        }
        if theta.len() != self.dim {
            return Err(Error::parameter(format!(
                "{} expects theta of length {}, got {}",
                self.name(),
                self.dim,
                theta.len()
            )));
        }
        if psi.iter().any(|v| !v.is_finite()) || theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::parameter(format!(
                "{}: non-finite parameter",
                self.name()
            )));
        }
        for row in 0..self.dim {
            let d = psi[chol_index(row, row)];
            if d <= 0.0 {
                return Err(Error::parameter(format!(
                    "{}: Cholesky diagonal entry {row} must be positive, got {d}",
                    self.name()
                )));
            }
        }
        Ok(())
    }

    fn log_density(&self, psi: &[f64], theta: &[f64], x: &[f64]) -> Result<f64> {
        self.validate_params(psi, theta)?;
        let l = unpack_chol(psi, self.dim);
        let r = DVector::from_iterator(self.dim, x.iter().zip(theta).map(|(a, b)| a - b));
        let z = forward_solve(&l, &r);
        let ln_det_l: f64 = (0..self.dim).map(|i| l[(i, i)].ln()).sum();
        Ok(-0.5 * self.dim as f64 * LN_2PI - ln_det_l - 0.5 * z.norm_squared())
    }

    fn grad_log_density(&self, psi: &[f64], theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.validate_params(psi, theta)?;
        let l = unpack_chol(psi, self.dim);
        let r = DVector::from_iterator(self.dim, x.iter().zip(theta).map(|(a, b)| a - b));
        let z = forward_solve(&l, &r);
        let w = backward_solve_transpose(&l, &z);
        let mut grad = Vec::with_capacity(self.psi_dim() + self.dim);
        for row in 0..self.dim {
            for col in 0..=row {
                let mut g = z[col] * w[row];
                if row == col {
                    g -= 1.0 / l[(row, row)];
                }
                grad.push(g);
            }
        }
        grad.extend(w.iter().copied());
        Ok(grad)
    }

    fn sample_into(
        &self,
        psi: &[f64],
        theta: &[f64],
        rng: &mut dyn RngCore,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        self.validate_params(psi, theta)?;
        let l = unpack_chol(psi, self.dim);
        let z = DVector::from_iterator(self.dim, (0..self.dim).map(|_| StandardNormal.sample(rng)));
        let x = l * z;
        for (i, mu) in theta.iter().enumerate() {
            out.push(mu + x[i]);
        }
        Ok(())
    }

    fn truth_profile(&self, psi: &[f64], theta: &[f64]) -> Result<Option<TruthProfile>> {
        self.validate_params(psi, theta)?;
        let l = unpack_chol(psi, self.dim);
        let cov = &l * l.transpose();
        Ok(Some(TruthProfile {
            support: Support::RealVector(self.dim),
            mean: theta.to_vec(),
            cov,
            e_ln_factorial: None,
        }))
    }

    fn expected_log_density(
        &self,
        psi: &[f64],
        theta: &[f64],
        truth: &TruthProfile,
    ) -> Result<Option<f64>> {
        self.validate_params(psi, theta)?;
        if truth.mean.len() != self.dim || truth.support != Support::RealVector(self.dim) {
            return Ok(None);
        }
        let l = unpack_chol(psi, self.dim);
        let precision = precision_from_chol(&l);
        let trace = (&precision * &truth.cov).trace();
        let d = DVector::from_iterator(self.dim, truth.mean.iter().zip(theta).map(|(a, b)| a - b));
        let quad = (&precision * &d).dot(&d);
        let ln_det_l: f64 = (0..self.dim).map(|i| l[(i, i)].ln()).sum();
        Ok(Some(
            -0.5 * self.dim as f64 * LN_2PI - ln_det_l - 0.5 * (trace + quad),
        ))
    }

    fn cost_evaluator(&self, data: &Dataset) -> Result<Box<dyn SegmentCostEval>> {
        if data.dim() != self.dim {
            return Err(Error::invalid_input(format!(
                "{} expects observation dimension {}, got {}",
                self.name(),
                self.dim,
                data.dim()
            )));
        }
        let p = self.dim;
        let mut s1 = Vec::with_capacity(data.n() + 1);
        let mut s2 = Vec::with_capacity(data.n() + 1);
        s1.push(DVector::zeros(p));
        s2.push(DMatrix::zeros(p, p));
        for i in 0..data.n() {
            let x = DVector::from_column_slice(data.row(i));
            s1.push(&s1[i] + &x);
            s2.push(&s2[i] + &x * x.transpose());
        }
        Ok(Box::new(MvnCost { p, s1, s2 }))
    }

    fn default_theta_bounds(&self, data: &Dataset) -> Result<BlockBounds> {
        let mut lower = Vec::with_capacity(self.dim);
        let mut upper = Vec::with_capacity(self.dim);
        for q in 0..self.dim {
            let (_, min, max, range) = mean_and_range(data.rows().map(|r| r[q]));
            let (lo, hi) = default_mean_bounds(min, max, range);
            lower.push(lo);
            upper.push(hi);
        }
        BlockBounds::new(lower, upper)
    }

    #[allow(clippy::needless_range_loop)]
    fn default_psi_bounds(&self, data: &Dataset) -> Result<BlockBounds> {
        let p = self.dim;
        let n = data.n() as f64;
        let mut means = vec![0.0; p];
        for row in data.rows() {
            for q in 0..p {
                means[q] += row[q];
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut cov = DMatrix::zeros(p, p);
        for row in data.rows() {
            for a in 0..p {
                for b in 0..p {
                    cov[(a, b)] += (row[a] - means[a]) * (row[b] - means[b]);
                }
            }
        }
        cov /= n;
        let mut marginal_sd = Vec::with_capacity(p);
        for q in 0..p {
            let v: f64 = cov[(q, q)];
            marginal_sd.push(if v > 0.0 { v.sqrt() } else { 1.0 });
        }
        let mut lower = Vec::with_capacity(self.psi_dim());
        let mut upper = Vec::with_capacity(self.psi_dim());
        for row in 0..p {
            for col in 0..=row {
                if row == col {
                    lower.push(1e-3 * marginal_sd[row]);
                    upper.push(1e3 * marginal_sd[row]);
                } else {
                    let scale = 1e3 * (marginal_sd[row] * marginal_sd[col]).sqrt();
                    lower.push(-scale);
                    upper.push(scale);
                }
            }
        }
        BlockBounds::new(lower, upper)
    }

    fn validate_bounds(&self, _theta: &BlockBounds, psi: &BlockBounds) -> Result<()> {
        if psi.dim() != self.psi_dim() {
            return Err(Error::invalid_input(format!(
                "{} psi bounds must have dimension {}",
                self.name(),
                self.psi_dim()
            )));
        }
        for row in 0..self.dim {
            if psi.lower()[chol_index(row, row)] <= 0.0 {
                return Err(Error::invalid_input(format!(
                    "Cholesky diagonal bound {row} must have a positive lower bound"
                )));
            }
        }
        Ok(())
    }
}
