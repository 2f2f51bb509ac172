use super::{
    mean_and_range, CommonParam, FamilyKind, SegmentCostEval, SegmentFamily, Support, TruthProfile,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::params::BlockBounds;
use nalgebra::DMatrix;
use rand::RngCore;
use rand_distr::{Distribution, Exp};

/// Exponential segment with rate parameter theta.
#[derive(Debug, Clone, Default)]
pub struct Exponential;

impl Exponential {
    pub fn new() -> Self {
        Exponential
    }
}

struct ExpCost {
    sx: Vec<f64>,
    /// prefix counts of out-of-support observations
    bad: Vec<usize>,
}

impl SegmentCostEval for ExpCost {
    fn theta_dim(&self) -> usize {
        1
    }

    fn interval_valid(&self, s: usize, t: usize) -> bool {
        self.bad[t] == self.bad[s]
    }

    fn cost_at(&self, s: usize, t: usize, _psi: &[f64], theta: &[f64]) -> f64 {
        if !self.interval_valid(s, t) {
            return f64::NEG_INFINITY;
        }
        let m = (t - s) as f64;
        m * theta[0].ln() - theta[0] * (self.sx[t] - self.sx[s])
    }

    fn grad_theta(&self, s: usize, t: usize, _psi: &[f64], theta: &[f64]) -> Vec<f64> {
        let m = (t - s) as f64;
        vec![m / theta[0] - (self.sx[t] - self.sx[s])]
    }

    fn hess_theta(&self, s: usize, t: usize, _psi: &[f64], theta: &[f64]) -> DMatrix<f64> {
        let m = (t - s) as f64;
        DMatrix::from_element(1, 1, -m / (theta[0] * theta[0]))
    }

    fn closed_form_mle(&self, s: usize, t: usize, _psi: &[f64]) -> Option<Vec<f64>> {
        let m = (t - s) as f64;
        Some(vec![m / (self.sx[t] - self.sx[s])])
    }

    fn best_cost(&self, s: usize, t: usize, psi: &[f64], bounds: &BlockBounds) -> Option<f64> {
        if !self.interval_valid(s, t) {
            return Some(f64::NEG_INFINITY);
        }
        let m = (t - s) as f64;
        // the interval log-likelihood is concave in the rate, so the box
        // clamp of the unconstrained maximizer is the constrained argmax
        let rate = (m / (self.sx[t] - self.sx[s]))
            .max(bounds.lower()[0])
            .min(bounds.upper()[0]);
        Some(self.cost_at(s, t, psi, &[rate]))
    }
}

impl SegmentFamily for Exponential {
    fn kind(&self) -> FamilyKind {
        FamilyKind::Exponential
    }

    fn name(&self) -> String {
        "exponential".to_string()
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
        Support::NonNegativeReal
    }

    fn in_support(&self, x: &[f64]) -> bool {
        x.len() == 1 && x[0].is_finite() && x[0] >= 0.0
    }

    fn validate_params(&self, psi: &[f64], theta: &[f64]) -> Result<()> {
        if !psi.is_empty() {
            return Err(Error::parameter(format!(
                "{} takes no common parameter",
                self.name()
            )));
        }
        if theta.len() != 1 || !(theta[0].is_finite() && theta[0] > 0.0) {
            return Err(Error::parameter(format!(
                "{} expects theta = [rate > 0], got {theta:?}",
                self.name()
            )));
        }
        Ok(())
    }

    fn log_density(&self, psi: &[f64], theta: &[f64], x: &[f64]) -> Result<f64> {
        self.validate_params(psi, theta)?;
        if !self.in_support(x) {
            return Err(Error::OutOfSupport {
                family: self.name(),
                index: None,
                detail: format!("{x:?} is negative"),
            });
        }
        Ok(theta[0].ln() - theta[0] * x[0])
    }

    fn grad_log_density(&self, psi: &[f64], theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.validate_params(psi, theta)?;
        if !self.in_support(x) {
            return Err(Error::OutOfSupport {
                family: self.name(),
                index: None,
                detail: format!("{x:?} is negative"),
            });
        }
        Ok(vec![1.0 / theta[0] - x[0]])
    }

    fn hess_log_density(&self, psi: &[f64], theta: &[f64], _x: &[f64]) -> Result<DMatrix<f64>> {
        self.validate_params(psi, theta)?;
        Ok(DMatrix::from_element(1, 1, -1.0 / (theta[0] * theta[0])))
    }

    fn sample_into(
        &self,
        psi: &[f64],
        theta: &[f64],
        rng: &mut dyn RngCore,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        self.validate_params(psi, theta)?;
        let dist =
            Exp::new(theta[0]).map_err(|e| Error::parameter(format!("{}: {e}", self.name())))?;
        out.push(dist.sample(rng));
        Ok(())
    }

    fn truth_profile(&self, psi: &[f64], theta: &[f64]) -> Result<Option<TruthProfile>> {
        self.validate_params(psi, theta)?;
        let mean = 1.0 / theta[0];
        Ok(Some(TruthProfile {
            support: Support::NonNegativeReal,
            mean: vec![mean],
            cov: DMatrix::from_element(1, 1, mean * mean),
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
        if truth.mean.len() != 1 || !self.support().covers(&truth.support) {
            return Ok(None);
        }
        Ok(Some(theta[0].ln() - theta[0] * truth.mean[0]))
    }

    fn cost_evaluator(&self, data: &Dataset) -> Result<Box<dyn SegmentCostEval>> {
        if data.dim() != 1 {
            return Err(Error::invalid_input(
                "exponential expects univariate observations",
            ));
        }
        let mut sx = Vec::with_capacity(data.n() + 1);
        let mut bad = Vec::with_capacity(data.n() + 1);
        sx.push(0.0);
        bad.push(0);
        for i in 0..data.n() {
            let x = data.row(i)[0];
            sx.push(sx[i] + x);
            bad.push(bad[i] + usize::from(x < 0.0));
        }
        Ok(Box::new(ExpCost { sx, bad }))
    }

    fn default_theta_bounds(&self, data: &Dataset) -> Result<BlockBounds> {
        let (mean, _, _, _) = mean_and_range(data.rows().map(|r| r[0]));
        let rate = if mean > 0.0 { 1.0 / mean } else { 1.0 };
        BlockBounds::new(vec![1e-6 * rate], vec![1e6 * rate])
    }

    fn default_psi_bounds(&self, _data: &Dataset) -> Result<BlockBounds> {
        Ok(BlockBounds::empty())
    }
}
