//! Per-class mean absolute error, inverse-frequency class weights, and the
//! weighted MAE that combines them.
//!
//! Errors are grouped by the *true* class. A class absent from the truths has
//! no MAE and no weight, and is left out of both sums of the weighted mean.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::NUM_CLASSES;

pub type ClassMap<T> = BTreeMap<u8, T>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class_mae: ClassMap<f64>,
    pub class_counts: ClassMap<usize>,
    pub class_weights: ClassMap<f64>,
    pub wmae: f64,
    pub unweighted_macro_mae: f64,
    pub global_mae: f64,
    /// `confusion[truth][prediction]`
    pub confusion: Vec<Vec<usize>>,
}

fn check_inputs(truths: &[u8], predictions: &[u8]) -> Result<()> {
    if truths.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            left: truths.len(),
            right: predictions.len(),
        });
    }
    if let Some(&bad) = truths.iter().chain(predictions).find(|&&v| usize::from(v) >= NUM_CLASSES) {
        return Err(Error::InvalidLevel(i64::from(bad)));
    }
    Ok(())
}

pub fn mae_per_class(truths: &[u8], predictions: &[u8]) -> Result<ClassMap<f64>> {
    check_inputs(truths, predictions)?;
    let mut sums = [0u64; NUM_CLASSES];
    let mut counts = [0u64; NUM_CLASSES];
    for (&y, &p) in truths.iter().zip(predictions) {
        sums[y as usize] += u64::from(y.abs_diff(p));
        counts[y as usize] += 1;
    }
    Ok((0..NUM_CLASSES)
        .filter(|&c| counts[c] > 0)
        .map(|c| (c as u8, sums[c] as f64 / counts[c] as f64))
        .collect())
}

pub fn class_counts(truths: &[u8]) -> ClassMap<usize> {
    let mut counts = ClassMap::new();
    for &y in truths {
        *counts.entry(y).or_insert(0) += 1;
    }
    counts
}

/// `w_c = max N / N_c` over the non-empty classes.
pub fn class_weights(counts: &ClassMap<usize>) -> Result<ClassMap<f64>> {
    let max = counts.values().copied().max().unwrap_or(0);
    if max == 0 {
        return Err(Error::Empty("all class counts are zero"));
    }
    Ok(counts
        .iter()
        .filter(|(_, &n)| n > 0)
        .map(|(&c, &n)| (c, max as f64 / n as f64))
        .collect())
}

pub fn wmae(per_class_mae: &ClassMap<f64>, weights: &ClassMap<f64>) -> Result<f64> {
    if per_class_mae.is_empty() || weights.is_empty() {
        return Err(Error::Empty("weighted MAE needs at least one class"));
    }
    if per_class_mae.len() != weights.len() || per_class_mae.keys().zip(weights.keys()).any(|(a, b)| a != b) {
        return Err(Error::InvalidArgument(
            "per-class MAE and weights cover different classes".into(),
        ));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (c, mae) in per_class_mae {
        let w = weights[c];
        num += w * mae;
        den += w;
    }
    Ok(num / den)
}

pub fn evaluate(truths: &[u8], predictions: &[u8]) -> Result<EvalReport> {
    if truths.is_empty() {
        return Err(Error::Empty("no samples to evaluate"));
    }
    let per_class_mae = mae_per_class(truths, predictions)?;
    let counts = class_counts(truths);
    let weights = class_weights(&counts)?;
    let wmae = wmae(&per_class_mae, &weights)?;
    let unweighted_macro_mae = per_class_mae.values().sum::<f64>() / per_class_mae.len() as f64;
    let total_abs: u64 = truths
        .iter()
        .zip(predictions)
        .map(|(&y, &p)| u64::from(y.abs_diff(p)))
        .sum();
    let mut confusion = vec![vec![0usize; NUM_CLASSES]; NUM_CLASSES];
    for (&y, &p) in truths.iter().zip(predictions) {
        confusion[y as usize][p as usize] += 1;
    }
    Ok(EvalReport {
        per_class_mae,
        class_counts: counts,
        class_weights: weights,
        wmae,
        unweighted_macro_mae,
        global_mae: total_abs as f64 / truths.len() as f64,
        confusion,
    })
}

impl EvalReport {
    /// Flat CSV: one row per class, then `wmae`, `macro_mae` and `global_mae` summary rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["row", "count", "weight", "mae"])?;
        for (c, mae) in &self.per_class_mae {
            wtr.write_record([
                format!("MAE_{c}"),
                self.class_counts[c].to_string(),
                self.class_weights[c].to_string(),
                mae.to_string(),
            ])?;
        }
        let total: usize = self.class_counts.values().sum();
        wtr.write_record(["WMAE".to_string(), total.to_string(), String::new(), self.wmae.to_string()])?;
        wtr.write_record([
            "macro_MAE".to_string(),
            total.to_string(),
            String::new(),
            self.unweighted_macro_mae.to_string(),
        ])?;
        wtr.write_record([
            "global_MAE".to_string(),
            total.to_string(),
            String::new(),
            self.global_mae.to_string(),
        ])?;
        wtr.flush()?;
        Ok(())
    }
}
