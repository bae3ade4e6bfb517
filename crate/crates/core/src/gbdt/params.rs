use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub max_depth: usize,
    pub num_rounds: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    pub min_samples_per_leaf: usize,
    pub l2_lambda: f64,
    pub min_gain_to_split: f64,
    /// Echoed into the model; training itself draws no random numbers.
    pub rng_seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            max_depth: 6,
            num_rounds: 100,
            learning_rate: 0.1,
            max_leaves: 31,
            min_samples_per_leaf: 20,
            l2_lambda: 1.0,
            min_gain_to_split: 0.0,
            rng_seed: 0,
        }
    }
}

impl GbdtParams {
    pub fn with_depth(&self, max_depth: usize) -> Self {
        Self {
            max_depth,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1");
        }
        if self.max_leaves == 0 {
            return bad("max_leaves must be at least 1");
        }
        if self.min_samples_per_leaf == 0 {
            return bad("min_samples_per_leaf must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return bad("l2_lambda must be non-negative");
        }
        if self.min_gain_to_split.is_nan() || self.min_gain_to_split < 0.0 {
            return bad("min_gain_to_split must be non-negative");
        }
        Ok(())
    }
}
