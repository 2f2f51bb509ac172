use crate::error::{Error, Result};
use rand::Rng;

/// Finite componentwise bounds for one parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BlockBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::invalid_input("bound vectors differ in length"));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::invalid_input(format!(
                    "bounds must be finite (coordinate {i})"
                )));
            }
            if lo >= hi {
                return Err(Error::invalid_input(format!(
                    "lower bound {lo} not below upper bound {hi} (coordinate {i})"
                )));
            }
        }
        Ok(BlockBounds { lower, upper })
    }

    /// Zero-dimensional block (e.g. the common block of a model without one).
    pub fn empty() -> Self {
        BlockBounds {
            lower: Vec::new(),
            upper: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| v.max(*lo).min(*hi))
            .collect()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| rng.random_range(*lo..*hi))
            .collect()
    }

    /// True where the coordinate sits on (or numerically at) a bound.
    pub fn active_bounds(&self, x: &[f64], tol: f64) -> Vec<bool> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| {
                let scale = (hi - lo).abs().max(1.0);
                (v - lo).abs() <= tol * scale || (hi - v).abs() <= tol * scale
            })
            .collect()
    }
}

/// Compact parameter box: bounds for the common block and each segment block.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterBox {
    pub psi: BlockBounds,
    pub thetas: Vec<BlockBounds>,
}

impl ParameterBox {
    pub fn new(psi: BlockBounds, thetas: Vec<BlockBounds>) -> Self {
        ParameterBox { psi, thetas }
    }

    pub fn contains(&self, state: &ParameterState) -> bool {
        self.psi.contains(&state.psi)
            && state.thetas.len() == self.thetas.len()
            && state
                .thetas
                .iter()
                .zip(&self.thetas)
                .all(|(th, b)| b.contains(th))
    }

    pub fn clamp(&self, state: &ParameterState) -> ParameterState {
        ParameterState {
            psi: self.psi.clamp(&state.psi),
            thetas: state
                .thetas
                .iter()
                .zip(&self.thetas)
                .map(|(th, b)| b.clamp(th))
                .collect(),
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> ParameterState {
        ParameterState {
            psi: self.psi.sample_uniform(rng),
            thetas: self.thetas.iter().map(|b| b.sample_uniform(rng)).collect(),
        }
    }

    pub fn packed_dim(&self) -> usize {
        self.psi.dim() + self.thetas.iter().map(|b| b.dim()).sum::<usize>()
    }
}

/// One point in parameter space: the common block followed by the
/// per-segment blocks, in segment order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterState {
    pub psi: Vec<f64>,
    pub thetas: Vec<Vec<f64>>,
}

impl ParameterState {
    pub fn new(psi: Vec<f64>, thetas: Vec<Vec<f64>>) -> Self {
        ParameterState { psi, thetas }
    }

    pub fn packed_dim(&self) -> usize {
        self.psi.len() + self.thetas.iter().map(|t| t.len()).sum::<usize>()
    }

    /// Flattens to (psi, theta_1, ..., theta_{k+1}).
    pub fn pack(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.packed_dim());
        out.extend_from_slice(&self.psi);
        for th in &self.thetas {
            out.extend_from_slice(th);
        }
        out
    }

    /// Inverse of [`pack`](Self::pack) given the block dimensions.
    pub fn unpack(packed: &[f64], psi_dim: usize, theta_dims: &[usize]) -> Result<Self> {
        let total: usize = psi_dim + theta_dims.iter().sum::<usize>();
        if packed.len() != total {
            return Err(Error::invalid_input(format!(
                "packed vector has length {}, expected {total}",
                packed.len()
            )));
        }
        let psi = packed[..psi_dim].to_vec();
        let mut thetas = Vec::with_capacity(theta_dims.len());
        let mut offset = psi_dim;
        for &d in theta_dims {
            thetas.push(packed[offset..offset + d].to_vec());
            offset += d;
        }
        Ok(ParameterState { psi, thetas })
    }
}
