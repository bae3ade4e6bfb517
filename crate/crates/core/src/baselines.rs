//! Reference strategies: always-the-mode (naive prior) and carry-forward
//! (previous value).

use serde::{Deserialize, Serialize};

use crate::domain::{Symptom, SymptomLevel, TransitionExample};
use crate::error::{Error, Result};
use crate::NUM_CLASSES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NaivePrior {
    pub dominant_class: SymptomLevel,
}

/// Mode of `labels`; ties go to the lowest level.
pub fn np_fit(labels: &[u8]) -> Result<NaivePrior> {
    if labels.is_empty() {
        return Err(Error::Empty("naive prior needs at least one label"));
    }
    let mut counts = [0usize; NUM_CLASSES];
    for &l in labels {
        let idx = usize::from(l);
        if idx >= NUM_CLASSES {
            return Err(Error::InvalidLevel(i64::from(l)));
        }
        counts[idx] += 1;
    }
    let mut best = 0;
    for c in 1..NUM_CLASSES {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    Ok(NaivePrior {
        dominant_class: SymptomLevel::new(best as i64)?,
    })
}

impl NaivePrior {
    pub fn predict(&self, _example: &TransitionExample) -> SymptomLevel {
        self.dominant_class
    }
}

pub fn np_predict(model: &NaivePrior, example: &TransitionExample) -> SymptomLevel {
    model.predict(example)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PreviousValue;

impl PreviousValue {
    pub fn predict(&self, example: &TransitionExample, target: Symptom) -> SymptomLevel {
        example.previous(target)
    }
}

pub fn pv_predict(example: &TransitionExample, target: Symptom) -> SymptomLevel {
    PreviousValue.predict(example, target)
}
