use super::{
    mean_and_range, CommonParam, FamilyKind, SegmentCostEval, SegmentFamily, Support, TruthProfile,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::params::BlockBounds;
use nalgebra::DMatrix;
use rand::RngCore;
use rand_distr::Distribution;
use statrs::function::gamma::ln_gamma;

const INT_TOL: f64 = 1e-9;

/// Poisson segment with mean parameter theta.
#[derive(Debug, Clone, Default)]
pub struct Poisson;

impl Poisson {
    pub fn new() -> Self {
        Poisson
    }
}

/// E[ln Gamma(X+1)] for X ~ Poisson(mean), by direct summation of the pmf
/// over the effective support window.
pub(crate) fn poisson_e_ln_factorial(mean: f64) -> f64 {
    let half_width = 50.0 * mean.sqrt() + 60.0;
    let lo = ((mean - half_width).floor().max(0.0)) as u64;
    let hi = (mean + half_width).ceil() as u64;
    let ln_mean = mean.ln();
    let mut acc = 0.0;
    for x in lo..=hi {
        let xf = x as f64;
        let ln_fact = ln_gamma(xf + 1.0);
        let ln_pmf = xf * ln_mean - mean - ln_fact;
        acc += ln_fact * ln_pmf.exp();
    }
    acc
}

struct PoissonCost {
    sx: Vec<f64>,
    s_ln_fact: Vec<f64>,
    /// prefix counts of out-of-support observations
    bad: Vec<usize>,
}

impl SegmentCostEval for PoissonCost {
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
        (self.sx[t] - self.sx[s]) * theta[0].ln()
            - m * theta[0]
            - (self.s_ln_fact[t] - self.s_ln_fact[s])
    }

    fn grad_theta(&self, s: usize, t: usize, _psi: &[f64], theta: &[f64]) -> Vec<f64> {
        let m = (t - s) as f64;
        vec![(self.sx[t] - self.sx[s]) / theta[0] - m]
    }

    fn hess_theta(&self, s: usize, t: usize, _psi: &[f64], theta: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, -(self.sx[t] - self.sx[s]) / (theta[0] * theta[0]))
    }

    fn closed_form_mle(&self, s: usize, t: usize, _psi: &[f64]) -> Option<Vec<f64>> {
        let m = (t - s) as f64;
        Some(vec![(self.sx[t] - self.sx[s]) / m])
    }

    fn best_cost(&self, s: usize, t: usize, psi: &[f64], bounds: &BlockBounds) -> Option<f64> {
        if !self.interval_valid(s, t) {
            return Some(f64::NEG_INFINITY);
        }
        let m = (t - s) as f64;
        let mean = ((self.sx[t] - self.sx[s]) / m)
            .max(bounds.lower()[0])
            .min(bounds.upper()[0]);
        Some(self.cost_at(s, t, psi, &[mean]))
    }
}

impl SegmentFamily for Poisson {
    fn kind(&self) -> FamilyKind {
        FamilyKind::Poisson
    }

    fn name(&self) -> String {
        "poisson".to_string()
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
        Support::NonNegativeInt
    }

    fn in_support(&self, x: &[f64]) -> bool {
        x.len() == 1 && x[0].is_finite() && x[0] >= 0.0 && (x[0] - x[0].round()).abs() <= INT_TOL
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
                "{} expects theta = [mean > 0], got {theta:?}",
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
                detail: format!("{x:?} is not a non-negative integer"),
            });
        }
        let xv = x[0].round();
        Ok(xv * theta[0].ln() - theta[0] - ln_gamma(xv + 1.0))
    }

    fn grad_log_density(&self, psi: &[f64], theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.validate_params(psi, theta)?;
        if !self.in_support(x) {
            return Err(Error::OutOfSupport {
                family: self.name(),
                index: None,
                detail: format!("{x:?} is not a non-negative integer"),
            });
        }
        Ok(vec![x[0].round() / theta[0] - 1.0])
    }

    fn hess_log_density(&self, psi: &[f64], theta: &[f64], x: &[f64]) -> Result<DMatrix<f64>> {
        self.validate_params(psi, theta)?;
        Ok(DMatrix::from_element(
            1,
            1,
            -x[0].round() / (theta[0] * theta[0]),
        ))
    }

    fn sample_into(
        &self,
        psi: &[f64],
        theta: &[f64],
        rng: &mut dyn RngCore,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        self.validate_params(psi, theta)?;
        let dist = rand_distr::Poisson::new(theta[0])
            .map_err(|e| Error::parameter(format!("{}: {e}", self.name())))?;
        out.push(dist.sample(rng));
        Ok(())
    }

    fn truth_profile(&self, psi: &[f64], theta: &[f64]) -> Result<Option<TruthProfile>> {
        self.validate_params(psi, theta)?;
        Ok(Some(TruthProfile {
            support: Support::NonNegativeInt,
            mean: vec![theta[0]],
            cov: DMatrix::from_element(1, 1, theta[0]),
            e_ln_factorial: Some(poisson_e_ln_factorial(theta[0])),
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
        match truth.e_ln_factorial {
            Some(e_ln_fact) => Ok(Some(truth.mean[0] * theta[0].ln() - theta[0] - e_ln_fact)),
            None => Ok(None),
        }
    }

    fn cost_evaluator(&self, data: &Dataset) -> Result<Box<dyn SegmentCostEval>> {
        if data.dim() != 1 {
            return Err(Error::invalid_input(
                "poisson expects univariate observations",
            ));
        }
        let mut sx = Vec::with_capacity(data.n() + 1);
        let mut s_ln_fact = Vec::with_capacity(data.n() + 1);
        let mut bad = Vec::with_capacity(data.n() + 1);
        sx.push(0.0);
        s_ln_fact.push(0.0);
        bad.push(0);
        for i in 0..data.n() {
            let x = data.row(i);
            let ok = self.in_support(x);
            let xv = if ok { x[0].round() } else { 0.0 };
            sx.push(sx[i] + xv);
            s_ln_fact.push(s_ln_fact[i] + if ok { ln_gamma(xv + 1.0) } else { 0.0 });
            bad.push(bad[i] + usize::from(!ok));
        }
        Ok(Box::new(PoissonCost { sx, s_ln_fact, bad }))
    }

    fn default_theta_bounds(&self, data: &Dataset) -> Result<BlockBounds> {
        let (mean, _, max, range) = mean_and_range(data.rows().map(|r| r[0]));
        let lo = (1e-6 * mean.max(1.0)).max(1e-9);
        let hi = (max + 10.0 * range.max(1.0)).max(1e6 * mean.max(1.0));
        BlockBounds::new(vec![lo], vec![hi])
    }

    fn default_psi_bounds(&self, _data: &Dataset) -> Result<BlockBounds> {
        Ok(BlockBounds::empty())
    }

    fn validate_bounds(&self, theta: &BlockBounds, _psi: &BlockBounds) -> Result<()> {
        if theta.dim() == 1 && theta.lower()[0] <= 0.0 {
            return Err(Error::invalid_input(
                "poisson mean bounds must have a positive lower bound",
            ));
        }
        Ok(())
    }
}
