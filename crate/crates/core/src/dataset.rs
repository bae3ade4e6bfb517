//! Numeric feature tables shared by the sampler, the learner and the explainer.
//!
//! Rows are dense `f64` vectors. Categorical features hold their category code
//! (`0..n_categories`) as a float so that a single row type serves every stage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    Categorical { n_categories: u32 },
}

impl FeatureKind {
    pub fn is_categorical(&self) -> bool {
        matches!(self, FeatureKind::Categorical { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Integer-valued features are rounded after interpolation.
    pub integer: bool,
    /// Legal closed range, used to clamp synthesized values.
    pub min: f64,
    pub max: f64,
}

impl FeatureSpec {
    pub fn continuous_int(name: &str, min: f64, max: f64) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Continuous,
            integer: true,
            min,
            max,
        }
    }

    pub fn categorical(name: &str, n_categories: u32) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Categorical { n_categories },
            integer: true,
            min: 0.0,
            max: f64::from(n_categories.saturating_sub(1)),
        }
    }

    pub fn continuous(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Continuous,
            integer: false,
            min: f64::NEG_INFINITY,
            max: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<FeatureSpec>,
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureSpec>) -> Self {
        Self { features }
    }

    /// Schema of `n` unbounded real-valued features named `f0..`.
    pub fn all_continuous(n: usize) -> Self {
        Self::new((0..n).map(|i| FeatureSpec::continuous(&format!("f{i}"))).collect())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn continuous_indices(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| !self.features[i].kind.is_categorical())
            .collect()
    }

    pub fn categorical_indices(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.features[i].kind.is_categorical())
            .collect()
    }
}

/// Labelled feature table. Labels are class indices in `0..=10`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn new(schema: FeatureSchema, rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: labels.len(),
            });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != schema.len()) {
            return Err(Error::SchemaMismatch {
                expected: schema.len(),
                found: bad.len(),
            });
        }
        Ok(Self {
            schema,
            rows,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn class_counts(&self) -> [usize; crate::NUM_CLASSES] {
        let mut counts = [0usize; crate::NUM_CLASSES];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}
