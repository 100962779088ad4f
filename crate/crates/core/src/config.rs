//! Run configuration: one TOML file, every key optional, `ELIXIR_<KEY>`
//! environment variables override the file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::densify::{DensifyConfig, PropagationParams};
use crate::embed::NmfConfig;
use crate::error::{Error, Result};
use crate::prefopt::OptimizerConfig;
use crate::recwalk::{SimilarityParams, WalkConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElixirConfig {
    pub alpha: f64,
    pub beta: f64,
    pub d: usize,
    pub k: usize,
    pub gamma: f64,
    pub lr: f64,
    pub threshold: f64,
    /// LSH bucket count; must be a power of two.
    pub buckets: usize,
    pub seed: u64,
    pub slate_size: usize,
    pub explanations: usize,
    pub walk_max_iters: usize,
    pub walk_tol: f64,
    pub nmf_max_iters: usize,
    pub nmf_tol: f64,
    pub lp_max_iters: usize,
    pub lp_tol: f64,
    pub label_floor: f64,
    pub epochs: usize,
    pub sgd_tol: f64,
}

impl Default for ElixirConfig {
    fn default() -> Self {
        Self {
            alpha: 0.15,
            beta: 0.1,
            d: 20,
            k: 10,
            gamma: 3.0,
            lr: 0.01,
            threshold: 0.7,
            buckets: 8,
            seed: 0,
            slate_size: 30,
            explanations: 5,
            walk_max_iters: 500,
            walk_tol: 1e-10,
            nmf_max_iters: 500,
            nmf_tol: 1e-6,
            lp_max_iters: 100,
            lp_tol: 1e-6,
            label_floor: 0.05,
            epochs: 200,
            sgd_tol: 1e-6,
        }
    }
}

macro_rules! env_override {
    ($cfg:ident, $lookup:ident, $($field:ident),+) => {
        $(
            let key = concat!("ELIXIR_", stringify!($field)).to_ascii_uppercase();
            if let Some(raw) = $lookup(&key) {
                $cfg.$field = raw
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("{key}: cannot parse `{raw}`")))?;
            }
        )+
    };
}

impl ElixirConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` if given (defaults otherwise), then applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let base = match path {
            Some(p) => toml::from_str(&std::fs::read_to_string(p)?).map_err(|e| Error::Config(e.to_string()))?,
            None => Self::default(),
        };
        let cfg = base.with_overrides(|k| std::env::var(k).ok())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_overrides(mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<Self> {
        let lookup = &lookup;
        env_override!(
            self,
            lookup,
            alpha,
            beta,
            d,
            k,
            gamma,
            lr,
            threshold,
            buckets,
            seed,
            slate_size,
            explanations,
            walk_max_iters,
            walk_tol,
            nmf_max_iters,
            nmf_tol,
            lp_max_iters,
            lp_tol,
            label_floor,
            epochs,
            sgd_tol
        );
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.walk().validate()?;
        if self.d == 0 || self.k == 0 {
            return Err(Error::Config("d and k must be >= 1".into()));
        }
        if !self.buckets.is_power_of_two() || self.buckets < 2 {
            return Err(Error::Config(format!(
                "buckets must be a power of two >= 2, got {}",
                self.buckets
            )));
        }
        if self.gamma < 0.0 || self.lr <= 0.0 {
            return Err(Error::Config("gamma must be >= 0 and lr > 0".into()));
        }
        Ok(())
    }

    pub fn planes(&self) -> usize {
        self.buckets.trailing_zeros() as usize
    }

    pub fn walk(&self) -> WalkConfig {
        WalkConfig {
            alpha: self.alpha,
            beta: self.beta,
            max_iters: self.walk_max_iters,
            tol: self.walk_tol,
        }
    }

    pub fn similarity(&self) -> SimilarityParams {
        SimilarityParams {
            threshold: self.threshold,
            planes: self.planes(),
            seed: self.seed,
        }
    }

    pub fn nmf(&self) -> NmfConfig {
        NmfConfig {
            dim: self.d,
            max_iters: self.nmf_max_iters,
            tol: self.nmf_tol,
            seed: self.seed,
        }
    }

    pub fn densify(&self) -> DensifyConfig {
        DensifyConfig {
            k: self.k,
            propagation: PropagationParams {
                max_iters: self.lp_max_iters,
                tol: self.lp_tol,
            },
            label_floor: self.label_floor,
        }
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            gamma: self.gamma,
            lr: self.lr,
            epochs: self.epochs,
            batch: None,
            seed: self.seed,
            tol: self.sgd_tol,
        }
    }
}
