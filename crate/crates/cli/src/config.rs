//! Run configuration, its digest, and the provenance stamped on outputs.

use std::path::Path;

use acsm_core::dynamics::Scheme;
use acsm_core::formats::Provenance;
use acsm_core::fpu_model::{ChainModel, FpuParams, ProjectionCoeffs};
use acsm_core::gibbs::{estimate_projection, PointSource};
use acsm_core::lie::{Observable, Polynomial};
use acsm_core::moments::DEFAULT_BLOCKS;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservableSpec {
    Etilde,
    Ktilde,
    E,
    K,
    H,
    Polynomial(Polynomial),
}

impl ObservableSpec {
    pub fn needs_projection(&self) -> bool {
        matches!(self, ObservableSpec::Etilde | ObservableSpec::Ktilde)
    }

    /// Builds the observable, estimating projection coefficients from `sample` when needed.
    pub fn build<S: PointSource + ?Sized>(&self, model: &ChainModel, sample: &S) -> acsm_core::Result<(Observable, Option<ProjectionCoeffs>)> {
        let proj = if self.needs_projection() {
            Some(estimate_projection(model, sample)?)
        } else {
            None
        };
        let obs = match self {
            ObservableSpec::Etilde => Observable::Etilde(proj.expect("estimated above")),
            ObservableSpec::Ktilde => Observable::Ktilde(proj.expect("estimated above")),
            ObservableSpec::E => Observable::E,
            ObservableSpec::K => Observable::K,
            ObservableSpec::H => Observable::H,
            ObservableSpec::Polynomial(p) => Observable::Poly(p.clone()),
        };
        obs.check(model)?;
        Ok((obs, proj))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Explicit time grid; must sit on multiples of `dt`.
    #[serde(default)]
    pub t_grid: Option<Vec<f64>>,
    /// Otherwise the grid `0, dt*stride, ...` up to `t_max`.
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_orders")]
    pub orders: Vec<usize>,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_drift")]
    pub drift_bound: f64,
    /// Initial conditions used for the ensemble average.
    #[serde(default = "default_verify_samples")]
    pub n_samples: usize,
}

fn default_t_max() -> f64 {
    1.0
}
fn default_stride() -> usize {
    10
}
fn default_orders() -> Vec<usize> {
    vec![0, 1, 2, 3]
}
fn default_drift() -> f64 {
    acsm_core::dynamics::DEFAULT_DRIFT_BOUND
}
fn default_verify_samples() -> usize {
    2000
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            t_grid: None,
            t_max: default_t_max(),
            dt: None,
            stride: default_stride(),
            orders: default_orders(),
            scheme: Scheme::default(),
            drift_bound: default_drift(),
            n_samples: default_verify_samples(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: FpuParams,
    #[serde(default)]
    pub seed: u64,
    pub n_samples: usize,
    pub observable: ObservableSpec,
    /// Highest moment index `n` of `c_0..c_n`.
    pub max_order: usize,
    #[serde(default)]
    pub precision_bits: Option<usize>,
    #[serde(default = "default_blocks")]
    pub jackknife_blocks: usize,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub verify: Option<VerifyConfig>,
}

fn default_blocks() -> usize {
    DEFAULT_BLOCKS
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.model.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.n_samples == 0 {
            return Err(CliError::Config("n_samples must be positive".into()));
        }
        if self.jackknife_blocks < 2 {
            return Err(CliError::Config("jackknife_blocks must be at least 2".into()));
        }
        if let Some(b) = self.precision_bits {
            if !(64..=acsm_core::precision::MAX_PRECISION_BITS).contains(&b) {
                return Err(CliError::Config(format!(
                    "precision_bits must lie in 64..={}",
                    acsm_core::precision::MAX_PRECISION_BITS
                )));
            }
        }
        if let Some(v) = &self.verify {
            if v.stride == 0 || !(v.t_max >= 0.0) || !(v.drift_bound > 0.0) || v.n_samples == 0 {
                return Err(CliError::Config("verify: stride, n_samples and drift_bound must be positive, t_max non-negative".into()));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn digest(&self) -> String {
        digest_of(self)
    }

    pub fn provenance(&self) -> Provenance {
        provenance(self.digest())
    }
}

/// SHA-256 of the canonical JSON encoding.
pub fn digest_of<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable");
    format!("{:x}", Sha256::digest(&bytes))
}

pub fn provenance(config_digest: String) -> Provenance {
    Provenance {
        config_digest,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

pub fn file_digest(path: &Path) -> std::io::Result<String> {
    Ok(format!("{:x}", Sha256::digest(std::fs::read(path)?)))
}
