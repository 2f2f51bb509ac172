use super::{
    default_mean_bounds, default_variance_bounds, mean_and_range, CommonParam, FamilyKind,
    SegmentCostEval, SegmentFamily, Support, TruthProfile,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::params::BlockBounds;
use nalgebra::DMatrix;
use rand::RngCore;
use rand_distr::{Distribution, Normal};

const LN_2PI: f64 = 1.8378770664093453;

/// Prefix sums of x and x^2 over a univariate dataset.
#[derive(Debug, Clone)]
pub(crate) struct UniPrefix {
    sx: Vec<f64>,
    sxx: Vec<f64>,
}

impl UniPrefix {
    pub(crate) fn build(data: &Dataset, family: &str) -> Result<Self> {
        if data.dim() != 1 {
            return Err(Error::invalid_input(format!(
                "{family} expects univariate observations, got dimension {}",
                data.dim()
            )));
        }
        let n = data.n();
        let mut sx = Vec::with_capacity(n + 1);
        let mut sxx = Vec::with_capacity(n + 1);
        sx.push(0.0);
        sxx.push(0.0);
        for i in 0..n {
            let x = data.row(i)[0];
            sx.push(sx[i] + x);
            sxx.push(sxx[i] + x * x);
        }
        Ok(UniPrefix { sx, sxx })
    }

    pub(crate) fn count(&self, s: usize, t: usize) -> f64 {
        (t - s) as f64
    }

    pub(crate) fn sum(&self, s: usize, t: usize) -> f64 {
        self.sx[t] - self.sx[s]
    }

    pub(crate) fn sum_sq(&self, s: usize, t: usize) -> f64 {
        self.sxx[t] - self.sxx[s]
    }
}

fn normal_cost(prefix: &UniPrefix, s: usize, t: usize, var: f64, mean: f64) -> f64 {
    let m = prefix.count(s, t);
    let quad = prefix.sum_sq(s, t) - 2.0 * mean * prefix.sum(s, t) + m * mean * mean;
    -0.5 * m * (LN_2PI + var.ln()) - quad / (2.0 * var)
}

struct NormalCost {
    prefix: UniPrefix,
    /// Fixed variance for the known-variance variant; `None` reads psi.
    fixed_var: Option<f64>,
}

impl NormalCost {
    fn var(&self, psi: &[f64]) -> f64 {
        self.fixed_var.unwrap_or_else(|| psi[0])
    }
}

impl SegmentCostEval for NormalCost {
    fn theta_dim(&self) -> usize {
        1
    }

    fn cost_at(&self, s: usize, t: usize, psi: &[f64], theta: &[f64]) -> f64 {
        normal_cost(&self.prefix, s, t, self.var(psi), theta[0])
    }

    fn grad_theta(&self, s: usize, t: usize, psi: &[f64], theta: &[f64]) -> Vec<f64> {
        let m = self.prefix.count(s, t);
        vec![(self.prefix.sum(s, t) - m * theta[0]) / self.var(psi)]
    }

    fn hess_theta(&self, s: usize, t: usize, psi: &[f64], _theta: &[f64]) -> DMatrix<f64> {
        let m = self.prefix.count(s, t);
        DMatrix::from_element(1, 1, -m / self.var(psi))
    }

    fn closed_form_mle(&self, s: usize, t: usize, _psi: &[f64]) -> Option<Vec<f64>> {
        Some(vec![self.prefix.sum(s, t) / self.prefix.count(s, t)])
    }

    fn best_cost(&self, s: usize, t: usize, psi: &[f64], bounds: &BlockBounds) -> Option<f64> {
        let mean = self.prefix.sum(s, t) / self.prefix.count(s, t);
        let clamped = mean.max(bounds.lower()[0]).min(bounds.upper()[0]);
        Some(normal_cost(&self.prefix, s, t, self.var(psi), clamped))
    }
}

/// Univariate normal segment with unknown mean and a known, fixed variance.
#[derive(Debug, Clone)]
pub struct NormalKnownVar {
    var: f64,
}

impl NormalKnownVar {
    pub fn new(var: f64) -> Result<Self> {
        if !(var.is_finite() && var > 0.0) {
            return Err(Error::parameter(format!(
                "known variance must be positive, got {var}"
            )));
        }
        Ok(NormalKnownVar { var })
    }

    pub fn var(&self) -> f64 {
        self.var
    }
}

fn expected_normal_log_density(var: f64, mean: f64, truth: &TruthProfile) -> Result<Option<f64>> {
    if truth.mean.len() != 1 {
        return Ok(None);
    }
    let centered = truth.var() + (truth.mean[0] - mean).powi(2);
    Ok(Some(-0.5 * (LN_2PI + var.ln()) - centered / (2.0 * var)))
}

impl SegmentFamily for NormalKnownVar {
    fn kind(&self) -> FamilyKind {
        FamilyKind::NormalKnownVar
    }

    fn name(&self) -> String {
        format!("normal-known-var(var={})", self.var)
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn theta_dim(&self) -> usize {
        1
    }

    fn common_param(&self) -> CommonParam {
        CommonParam::None
    }

    fn support(&self) -> Support {
        Support::Real
    }

    fn in_support(&self, x: &[f64]) -> bool {
        x.len() == 1 && x[0].is_finite()
    }

    fn validate_params(&self, psi: &[f64], theta: &[f64]) -> Result<()> {
        if !psi.is_empty() {
            return Err(Error::parameter(format!(
                "{} takes no common parameter, got {} entries",
                self.name(),
                psi.len()
            )));
        }
        if theta.len() != 1 || !theta[0].is_finite() {
            return Err(Error::parameter(format!(
                "{} expects theta = [mean]",
                self.name()
            )));
        }
        Ok(())
    }

    fn log_density(&self, psi: &[f64], theta: &[f64], x: &[f64]) -> Result<f64> {
        self.validate_params(psi, theta)?;
        let r = x[0] - theta[0];
        Ok(-0.5 * (LN_2PI + self.var.ln()) - r * r / (2.0 * self.var))
    }

    fn grad_log_density(&self, psi: &[f64], theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.validate_params(psi, theta)?;
        Ok(vec![(x[0] - theta[0]) / self.var])
    }

    fn hess_log_density(&self, psi: &[f64], theta: &[f64], _x: &[f64]) -> Result<DMatrix<f64>> {
        self.validate_params(psi, theta)?;
        Ok(DMatrix::from_element(1, 1, -1.0 / self.var))
    }

    fn sample_into(
        &self,
        psi: &[f64],
        theta: &[f64],
        rng: &mut dyn RngCore,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        self.validate_params(psi, theta)?;
        let dist = Normal::new(theta[0], self.var.sqrt())
            .map_err(|e| Error::parameter(format!("{}: {e}", self.name())))?;
        out.push(dist.sample(rng));
        Ok(())
    }

    fn truth_profile(&self, psi: &[f64], theta: &[f64]) -> Result<Option<TruthProfile>> {
        self.validate_params(psi, theta)?;
        Ok(Some(TruthProfile {
            support: Support::Real,
            mean: vec![theta[0]],
            cov: DMatrix::from_element(1, 1, self.var),
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
        expected_normal_log_density(self.var, theta[0], truth)
    }

    fn cost_evaluator(&self, data: &Dataset) -> Result<Box<dyn SegmentCostEval>> {
        Ok(Box::new(NormalCost {
            prefix: UniPrefix::build(data, "normal-known-var")?,
            fixed_var: Some(self.var),
        }))
    }

    fn default_theta_bounds(&self, data: &Dataset) -> Result<BlockBounds> {
        let (_, min, max, range) = mean_and_range(data.rows().map(|r| r[0]));
        let (lo, hi) = default_mean_bounds(min, max, range);
        BlockBounds::new(vec![lo], vec![hi])
    }

    fn default_psi_bounds(&self, _data: &Dataset) -> Result<BlockBounds> {
        Ok(BlockBounds::empty())
    }
}

/// Univariate normal segment with unknown mean and a variance shared by
/// all segments through the common parameter.
#[derive(Debug, Clone, Default)]
pub struct NormalCommonVar;

impl NormalCommonVar {
    pub fn new() -> Self {
        NormalCommonVar
    }
}

impl SegmentFamily for NormalCommonVar {
    fn kind(&self) -> FamilyKind {
        FamilyKind::NormalCommonVar
    }

    fn name(&self) -> String {
        "normal-common-var".to_string()
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn theta_dim(&self) -> usize {
        1
    }

    fn common_param(&self) -> CommonParam {
        CommonParam::Variance
    }

    fn support(&self) -> Support {
        Support::Real
    }

    fn in_support(&self, x: &[f64]) -> bool {
        x.len() == 1 && x[0].is_finite()
    }

    fn validate_params(&self, psi: &[f64], theta: &[f64]) -> Result<()> {
        if psi.len() != 1 || !(psi[0].is_finite() && psi[0] > 0.0) {
            return Err(Error::parameter(format!(
                "{} expects psi = [variance > 0], got {psi:?}",
                self.name()
            )));
        }
        if theta.len() != 1 || !theta[0].is_finite() {
            return Err(Error::parameter(format!(
                "{} expects theta = [mean]",
                self.name()
            )));
        }
        Ok(())
    }

    fn log_density(&self, psi: &[f64], theta: &[f64], x: &[f64]) -> Result<f64> {
        self.validate_params(psi, theta)?;
        let var = psi[0];
        let r = x[0] - theta[0];
        Ok(-0.5 * (LN_2PI + var.ln()) - r * r / (2.0 * var))
    }

    fn grad_log_density(&self, psi: &[f64], theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.validate_params(psi, theta)?;
        let var = psi[0];
        let r = x[0] - theta[0];
        Ok(vec![-0.5 / var + r * r / (2.0 * var * var), r / var])
    }

    fn hess_log_density(&self, psi: &[f64], theta: &[f64], x: &[f64]) -> Result<DMatrix<f64>> {
        self.validate_params(psi, theta)?;
        let var = psi[0];
        let r = x[0] - theta[0];
        let mut h = DMatrix::zeros(2, 2);
        h[(0, 0)] = 0.5 / (var * var) - r * r / (var * var * var);
        h[(0, 1)] = -r / (var * var);
        h[(1, 0)] = h[(0, 1)];
        h[(1, 1)] = -1.0 / var;
        Ok(h)
    }

    fn sample_into(
        &self,
        psi: &[f64],
        theta: &[f64],
        rng: &mut dyn RngCore,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        self.validate_params(psi, theta)?;
        let dist = Normal::new(theta[0], psi[0].sqrt())
            .map_err(|e| Error::parameter(format!("{}: {e}", self.name())))?;
        out.push(dist.sample(rng));
        Ok(())
    }

    fn truth_profile(&self, psi: &[f64], theta: &[f64]) -> Result<Option<TruthProfile>> {
        self.validate_params(psi, theta)?;
        Ok(Some(TruthProfile {
            support: Support::Real,
            mean: vec![theta[0]],
            cov: DMatrix::from_element(1, 1, psi[0]),
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
        expected_normal_log_density(psi[0], theta[0], truth)
    }

    fn cost_evaluator(&self, data: &Dataset) -> Result<Box<dyn SegmentCostEval>> {
        Ok(Box::new(NormalCost {
            prefix: UniPrefix::build(data, "normal-common-var")?,
            fixed_var: None,
        }))
    }

    fn default_theta_bounds(&self, data: &Dataset) -> Result<BlockBounds> {
        let (_, min, max, range) = mean_and_range(data.rows().map(|r| r[0]));
        let (lo, hi) = default_mean_bounds(min, max, range);
        BlockBounds::new(vec![lo], vec![hi])
    }

    fn default_psi_bounds(&self, data: &Dataset) -> Result<BlockBounds> {
        let (mean, _, _, _) = mean_and_range(data.rows().map(|r| r[0]));
        let var = data.rows().map(|r| (r[0] - mean).powi(2)).sum::<f64>() / data.n() as f64;
        let (lo, hi) = default_variance_bounds(var);
        BlockBounds::new(vec![lo], vec![hi])
    }

    fn validate_bounds(&self, _theta: &BlockBounds, psi: &BlockBounds) -> Result<()> {
        if psi.dim() == 1 && psi.lower()[0] <= 0.0 {
            return Err(Error::invalid_input(
                "common variance bounds must have a positive lower bound",
            ));
        }
        Ok(())
    }
}
