//! Histogram gradient-boosted trees for binary logistic loss.

pub mod binning;
pub mod format;
pub mod histogram;
pub mod loss;
pub mod model;
pub mod split;
pub mod train;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use format::{load, save, FORMAT_VERSION, MAGIC};
pub use loss::{compute_grad_hess, sigmoid};
pub use model::{Model, TrainingMetadata};
pub use train::{fit_pipeline, train, train_with_observer, Progress};
pub use tree::{Node, SplitRule, Tree};

/// How categorical columns reach the learner.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatMode {
    /// Per-category histograms straight from dictionary codes.
    #[default]
    Native,
    /// Categorical columns are replaced by an encoder before training.
    Encoded,
}

impl fmt::Display for CatMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CatMode::Native => "native",
            CatMode::Encoded => "encoded",
        })
    }
}

impl FromStr for CatMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "native" => Ok(CatMode::Native),
            "encoded" => Ok(CatMode::Encoded),
            other => Err(Error::InvalidConfig(format!("unknown cat_mode `{other}`"))),
        }
    }
}

/// Default for [`GbdtConfig::min_category_count`].
pub const MIN_CATEGORY_COUNT: u64 = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtConfig {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    pub max_bins: usize,
    /// Categories with fewer rows at a node share one group in the
    /// categorical split scan.
    pub min_category_count: u64,
    /// Rounds without validation improvement before stopping; 0 disables.
    pub early_stopping_rounds: usize,
    pub cat_mode: CatMode,
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            n_trees: 500,
            learning_rate: 0.1,
            max_depth: 6,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            max_bins: 256,
            min_category_count: MIN_CATEGORY_COUNT,
            early_stopping_rounds: 50,
            cat_mode: CatMode::Native,
            seed: 0,
        }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            ));
        }
        if self.max_depth < 1 {
            return fail("max_depth must be at least 1".into());
        }
        for (name, v) in [
            ("lambda", self.lambda),
            ("gamma", self.gamma),
            ("min_child_weight", self.min_child_weight),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(2..=65536).contains(&self.max_bins) {
            return fail(format!("max_bins must be in [2, 65536], got {}", self.max_bins));
        }
        Ok(())
    }

    pub(crate) fn split_params(&self) -> split::SplitParams {
        split::SplitParams {
            lambda: self.lambda,
            gamma: self.gamma,
            min_child_weight: self.min_child_weight,
            min_category_count: self.min_category_count,
        }
    }
}
