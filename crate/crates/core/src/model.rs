use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::family::{CommonParam, SegmentFamily};
use crate::params::{BlockBounds, ParameterBox, ParameterState};
use std::ops::Range;
use std::sync::Arc;

/// An ordered interior boundary configuration 0 < n_1 < ... < n_k < n.
///
/// Boundary j is the count of observations in segments 1..=j, so segment j
/// covers zero-based rows `[n_{j-1}, n_j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangePointConfig {
    boundaries: Vec<usize>,
    n: usize,
}

impl ChangePointConfig {
    pub fn new(boundaries: Vec<usize>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid_input("n must be >= 1"));
        }
        let mut prev = 0usize;
        for (j, &b) in boundaries.iter().enumerate() {
            if b <= prev || b >= n {
                return Err(Error::invalid_input(format!(
                    "boundaries must satisfy 0 < n_1 < ... < n_k < n; boundary {} = {b} with n = {n}",
                    j + 1
                )));
            }
            prev = b;
        }
        Ok(ChangePointConfig { boundaries, n })
    }

    /// The k = 0 configuration (a single segment).
    pub fn single_segment(n: usize) -> Result<Self> {
        ChangePointConfig::new(Vec::new(), n)
    }

    pub fn k(&self) -> usize {
        self.boundaries.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    /// Change-point fractions lambda_j = n_j / n.
    pub fn fractions(&self) -> Vec<f64> {
        self.boundaries
            .iter()
            .map(|&b| b as f64 / self.n as f64)
            .collect()
    }

    /// Boundaries extended with the outer sentinels 0 and n.
    pub fn extended(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.boundaries.len() + 2);
        out.push(0);
        out.extend_from_slice(&self.boundaries);
        out.push(self.n);
        out
    }

    /// Zero-based row range of segment `j` (0-based, j in 0..=k).
    pub fn segment_range(&self, j: usize) -> Range<usize> {
        let ext = self.extended();
        ext[j]..ext[j + 1]
    }

    /// max_j |lambda_j - other_lambda_j| between two configurations.
    pub fn lambda_distance(&self, other: &ChangePointConfig) -> f64 {
        self.fractions()
            .iter()
            .zip(other.fractions())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// The model: k change points, k+1 ordered segment families, a common
/// parameter block shared across segments, and an optional explicit
/// parameter box.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    families: Vec<Arc<dyn SegmentFamily>>,
    bounds: Option<ParameterBox>,
    common: CommonParam,
    obs_dim: usize,
}

impl ModelSpec {
    pub fn new(
        families: Vec<Arc<dyn SegmentFamily>>,
        bounds: Option<ParameterBox>,
    ) -> Result<Self> {
        if families.is_empty() {
            return Err(Error::invalid_input(
                "a model needs at least one segment family",
            ));
        }
        let obs_dim = families[0].obs_dim();
        let mut common = CommonParam::None;
        for (j, f) in families.iter().enumerate() {
            if f.obs_dim() != obs_dim {
                return Err(Error::invalid_input(format!(
                    "segment {} has observation dimension {}, expected {obs_dim}",
                    j + 1,
                    f.obs_dim()
                )));
            }
            match (common, f.common_param()) {
                (_, CommonParam::None) => {}
                (CommonParam::None, c) => common = c,
                (a, b) if a == b => {}
                (a, b) => {
                    return Err(Error::invalid_input(format!(
                        "segment families disagree on the common parameter: {a:?} vs {b:?}"
                    )));
                }
            }
        }
        let spec = ModelSpec {
            families,
            bounds: None,
            common,
            obs_dim,
        };
        match bounds {
            Some(b) => spec.with_bounds(b),
            None => Ok(spec),
        }
    }

    /// Attaches an explicit parameter box after family-specific validation.
    pub fn with_bounds(mut self, bounds: ParameterBox) -> Result<Self> {
        if bounds.thetas.len() != self.families.len() {
            return Err(Error::invalid_input(format!(
                "box has {} theta blocks, model has {} segments",
                bounds.thetas.len(),
                self.families.len()
            )));
        }
        if bounds.psi.dim() != self.common.dim() {
            return Err(Error::invalid_input(format!(
                "box psi block has dimension {}, model common parameter has {}",
                bounds.psi.dim(),
                self.common.dim()
            )));
        }
        for (j, f) in self.families.iter().enumerate() {
            if bounds.thetas[j].dim() != f.theta_dim() {
                return Err(Error::invalid_input(format!(
                    "theta block {} has dimension {}, family {} expects {}",
                    j + 1,
                    bounds.thetas[j].dim(),
                    f.name(),
                    f.theta_dim()
                )));
            }
            f.validate_bounds(&bounds.thetas[j], &bounds.psi)?;
        }
        self.bounds = Some(bounds);
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.families.len() - 1
    }

    pub fn n_segments(&self) -> usize {
        self.families.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn common(&self) -> CommonParam {
        self.common
    }

    pub fn psi_dim(&self) -> usize {
        self.common.dim()
    }

    pub fn theta_dims(&self) -> Vec<usize> {
        self.families.iter().map(|f| f.theta_dim()).collect()
    }

    pub fn packed_dim(&self) -> usize {
        self.psi_dim() + self.theta_dims().iter().sum::<usize>()
    }

    /// Segment family of 0-based segment index `j`.
    pub fn family(&self, j: usize) -> &dyn SegmentFamily {
        self.families[j].as_ref()
    }

    pub fn families(&self) -> &[Arc<dyn SegmentFamily>] {
        &self.families
    }

    pub fn bounds(&self) -> Option<&ParameterBox> {
        self.bounds.as_ref()
    }

    /// The explicit box, or data-driven defaults for any missing block.
    pub fn resolved_bounds(&self, data: &Dataset) -> Result<ParameterBox> {
        if let Some(b) = &self.bounds {
            return Ok(b.clone());
        }
        let mut thetas = Vec::with_capacity(self.families.len());
        let mut psi: Option<BlockBounds> = None;
        for f in &self.families {
            thetas.push(f.default_theta_bounds(data)?);
            if f.common_param() != CommonParam::None && psi.is_none() {
                psi = Some(f.default_psi_bounds(data)?);
            }
        }
        Ok(ParameterBox::new(
            psi.unwrap_or_else(BlockBounds::empty),
            thetas,
        ))
    }

    /// Validates block dimensions, family-level domains, and box membership.
    pub fn check_state(&self, bounds: &ParameterBox, state: &ParameterState) -> Result<()> {
        if state.thetas.len() != self.families.len() {
            return Err(Error::parameter(format!(
                "state has {} theta blocks, model has {} segments",
                state.thetas.len(),
                self.families.len()
            )));
        }
        for (j, f) in self.families.iter().enumerate() {
            let psi_view: &[f64] = if f.common_param() == CommonParam::None {
                &[]
            } else {
                &state.psi
            };
            f.validate_params(psi_view, &state.thetas[j])
                .map_err(|e| Error::parameter(format!("segment {}: {e}", j + 1)))?;
        }
        if !bounds.contains(state) {
            return Err(Error::parameter(
                "parameter state outside the declared box".to_string(),
            ));
        }
        Ok(())
    }

    /// The psi slice a given segment family should see.
    pub fn psi_for_segment<'a>(&self, j: usize, psi: &'a [f64]) -> &'a [f64] {
        if self.families[j].common_param() == CommonParam::None {
            &[]
        } else {
            psi
        }
    }

    /// Validates that a dataset is dimensionally compatible and large enough.
    pub fn check_data(&self, data: &Dataset) -> Result<()> {
        if data.dim() != self.obs_dim {
            return Err(Error::invalid_input(format!(
                "data dimension {} does not match model dimension {}",
                data.dim(),
                self.obs_dim
            )));
        }
        if data.n() < self.n_segments() {
            return Err(Error::invalid_input(format!(
                "n = {} too small for {} non-empty segments",
                data.n(),
                self.n_segments()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{Exponential, NormalCommonVar, NormalKnownVar};

    #[test]
    fn rejects_non_monotone_boundaries() {
        assert!(ChangePointConfig::new(vec![3, 3], 10).is_err());
        assert!(ChangePointConfig::new(vec![0], 10).is_err());
        assert!(ChangePointConfig::new(vec![10], 10).is_err());
        assert!(ChangePointConfig::new(vec![4, 7], 10).is_ok());
    }

    #[test]
    fn fractions_are_exact_ratios() {
        let c = ChangePointConfig::new(vec![4], 10).unwrap();
        assert_eq!(c.fractions(), vec![0.4]);
        assert_eq!(c.segment_range(0), 0..4);
        assert_eq!(c.segment_range(1), 4..10);
    }

    #[test]
    fn mixed_common_param_kinds_rejected() {
        let err = ModelSpec::new(
            vec![
                Arc::new(NormalCommonVar::new()),
                Arc::new(crate::family::MvNormalCommonCov::new(1).unwrap()),
            ],
            None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("common parameter"));
    }

    #[test]
    fn psi_only_fed_to_families_that_use_it() {
        let spec = ModelSpec::new(
            vec![
                Arc::new(NormalCommonVar::new()),
                Arc::new(NormalKnownVar::new(1.0).unwrap()),
                Arc::new(Exponential::new()),
            ],
            None,
        )
        .unwrap();
        assert_eq!(spec.psi_dim(), 1);
        let psi = vec![2.0];
        assert_eq!(spec.psi_for_segment(0, &psi), &[2.0]);
        assert!(spec.psi_for_segment(1, &psi).is_empty());
        assert!(spec.psi_for_segment(2, &psi).is_empty());
    }
}
