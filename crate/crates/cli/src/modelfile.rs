//! Model and scenario description files.
//!
//! A model file is TOML with a change-point count, either one `[family]`
//! table applied to all segments or a `[[segments]]` list of length k+1,
//! and optional explicit `[bounds]`:
//!
//! ```toml
//! k = 1
//!
//! [family]
//! kind = "normal-common-var"   # normal-known-var (var = ...), exponential,
//!                              # poisson, mvnormal-common-cov (dim = ...)
//!
//! [bounds]
//! psi = [[0.02, 50.0]]
//! theta = [[[-8.0, 8.0]], [[-8.0, 8.0]]]
//! ```
//!
//! A scenario file extends a model file with true parameters, sample sizes,
//! replication count, and the true change-point fractions:
//!
//! ```toml
//! k = 1
//! lambda0 = [0.5]
//! sample_sizes = [100, 400]
//! replications = 200
//!
//! [family]
//! kind = "normal-common-var"
//!
//! [truth]
//! psi = [1.0]
//! theta = [[0.0], [2.0]]
//!
//! [bounds]
//! psi = [[0.02, 50.0]]
//! theta = [[[-8.0, 8.0]], [[-8.0, 8.0]]]
//! ```

use anyhow::{bail, Context, Result};
use cpmle_core::{
    BlockBounds, Exponential, ModelSpec, MvNormalCommonCov, NormalCommonVar, NormalKnownVar,
    ParameterBox, ParameterState, Poisson, ScenarioSpec, SegmentFamily,
};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyDecl {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub var: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct BoundsDecl {
    pub psi: Option<Vec<[f64; 2]>>,
    pub theta: Option<Vec<Vec<[f64; 2]>>>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ModelFile {
    pub k: usize,
    pub family: Option<FamilyDecl>,
    pub segments: Option<Vec<FamilyDecl>>,
    pub bounds: Option<BoundsDecl>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct TruthDecl {
    #[serde(default)]
    pub psi: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ScenarioFile {
    #[serde(flatten)]
    pub model: ModelFile,
    pub lambda0: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub truth: TruthDecl,
}

pub fn family_from_decl(decl: &FamilyDecl) -> Result<Arc<dyn SegmentFamily>> {
    let fam: Arc<dyn SegmentFamily> = match decl.kind.as_str() {
        "normal-known-var" => {
            let var = decl
                .var
                .context("normal-known-var needs `var = <positive number>`")?;
            Arc::new(NormalKnownVar::new(var)?)
        }
        "normal-common-var" => Arc::new(NormalCommonVar::new()),
        "exponential" => Arc::new(Exponential::new()),
        "poisson" => Arc::new(Poisson::new()),
        "mvnormal-common-cov" => {
            let dim = decl
                .dim
                .context("mvnormal-common-cov needs `dim = <observation dimension>`")?;
            Arc::new(MvNormalCommonCov::new(dim)?)
        }
        other => bail!(
            "unknown family kind {other:?}; expected one of normal-known-var, \
             normal-common-var, exponential, poisson, mvnormal-common-cov"
        ),
    };
    Ok(fam)
}

fn block_bounds(pairs: &[[f64; 2]]) -> Result<BlockBounds> {
    let lower: Vec<f64> = pairs.iter().map(|p| p[0]).collect();
    let upper: Vec<f64> = pairs.iter().map(|p| p[1]).collect();
    Ok(BlockBounds::new(lower, upper)?)
}

/// Builds the model, allowing a `--k` override when the file uses a single
/// shared family declaration.
pub fn build_model(file: &ModelFile, k_override: Option<usize>) -> Result<ModelSpec> {
    let k = k_override.unwrap_or(file.k);
    let decls: Vec<FamilyDecl> = match (&file.family, &file.segments) {
        (Some(f), None) => vec![f.clone(); k + 1],
        (None, Some(list)) => {
            if list.len() != k + 1 {
                bail!(
                    "`segments` lists {} families but k = {k} needs {}",
                    list.len(),
                    k + 1
                );
            }
            list.clone()
        }
        (Some(_), Some(_)) => bail!("give either `family` or `segments`, not both"),
        (None, None) => bail!("model file needs a `family` table or a `segments` list"),
    };
    let families = decls
        .iter()
        .map(|d| family_from_decl(d))
        .collect::<Result<Vec<_>>>()?;
    let bounds = match &file.bounds {
        None => None,
        Some(b) => {
            let psi = match &b.psi {
                Some(pairs) => block_bounds(pairs)?,
                None => BlockBounds::empty(),
            };
            let theta = match &b.theta {
                Some(blocks) => {
                    if blocks.len() != k + 1 {
                        bail!(
                            "`bounds.theta` lists {} blocks, need {}",
                            blocks.len(),
                            k + 1
                        );
                    }
                    blocks
                        .iter()
                        .map(|pairs| block_bounds(pairs))
                        .collect::<Result<Vec<_>>>()?
                }
                None => bail!("`bounds` needs a `theta` list when present"),
            };
            Some(ParameterBox::new(psi, theta))
        }
    };
    Ok(ModelSpec::new(families, bounds)?)
}

pub fn load_model(path: &Path, k_override: Option<usize>) -> Result<(ModelSpec, ModelFile)> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let file: ModelFile = toml::from_str(&text)
        .with_context(|| format!("{}: invalid model description", path.display()))?;
    let spec = build_model(&file, k_override)?;
    Ok((spec, file))
}

/// Default model when only `--k` is given: a shared-variance normal on
/// every segment.
pub fn default_model(k: usize) -> Result<(ModelSpec, ModelFile)> {
    let file = ModelFile {
        k,
        family: Some(FamilyDecl {
            kind: "normal-common-var".to_string(),
            var: None,
            dim: None,
        }),
        segments: None,
        bounds: None,
    };
    let spec = build_model(&file, None)?;
    Ok((spec, file))
}

pub fn build_scenario(
    file: &ScenarioFile,
    seed: u64,
    reps_override: Option<usize>,
) -> Result<ScenarioSpec> {
    let spec = build_model(&file.model, None)?;
    let truth = ParameterState::new(file.truth.psi.clone(), file.truth.theta.clone());
    ScenarioSpec::new(
        spec,
        truth,
        file.lambda0.clone(),
        file.sample_sizes.clone(),
        reps_override.unwrap_or(file.replications),
        seed,
    )
    .map_err(anyhow::Error::from)
}

pub fn load_scenario(path: &Path, seed: u64, reps_override: Option<usize>) -> Result<ScenarioSpec> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let file: ScenarioFile = toml::from_str(&text)
        .with_context(|| format!("{}: invalid scenario description", path.display()))?;
    build_scenario(&file, seed, reps_override)
}
