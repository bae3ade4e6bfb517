//! Quantile histogram binning.
//!
//! A continuous feature with `k` boundaries has `k + 1` bins; a value `x` lands
//! in bin `#{b : b < x}`, so bin `i` holds `boundaries[i-1] < x <= boundaries[i]`.
//! Values outside the training range fall into the first or last bin.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureKind, FeatureSchema};

/// Upper limit on bins per feature; bin indices fit in a `u8`.
pub const MAX_BINS: usize = 255;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BinMapper {
    Continuous { boundaries: Vec<f64> },
    Categorical { n_categories: u32 },
}

impl BinMapper {
    /// Fits a mapper to the training values of one feature.
    pub fn fit(kind: FeatureKind, values: &[f64]) -> Self {
        match kind {
            FeatureKind::Categorical { n_categories } => BinMapper::Categorical {
                n_categories: n_categories.clamp(1, MAX_BINS as u32),
            },
            FeatureKind::Continuous => BinMapper::Continuous {
                boundaries: quantile_boundaries(values, MAX_BINS),
            },
        }
    }

    pub fn n_bins(&self) -> usize {
        match self {
            BinMapper::Continuous { boundaries } => boundaries.len() + 1,
            BinMapper::Categorical { n_categories } => *n_categories as usize,
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, BinMapper::Categorical { .. })
    }

    pub fn bin(&self, x: f64) -> u8 {
        match self {
            BinMapper::Continuous { boundaries } => boundaries.partition_point(|&b| b < x) as u8,
            BinMapper::Categorical { n_categories } => {
                let max = f64::from(n_categories - 1);
                // NaN and negatives land in category 0
                x.round().clamp(0.0, max) as u8
            }
        }
    }

    /// Largest raw value that maps to `bin` (continuous features only).
    pub fn upper_bound(&self, bin: u8) -> f64 {
        match self {
            BinMapper::Continuous { boundaries } => boundaries.get(bin as usize).copied().unwrap_or(f64::INFINITY),
            BinMapper::Categorical { .. } => f64::from(bin),
        }
    }
}

/// Boundaries between consecutive distinct values when there are few of them,
/// otherwise (at most `max_bins - 1`) quantile cut points.
pub fn quantile_boundaries(values: &[f64], max_bins: usize) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() <= max_bins {
        return distinct.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0).collect();
    }
    let n = sorted.len();
    let max = sorted[n - 1];
    let mut cuts: Vec<f64> = (1..max_bins)
        .map(|q| {
            let rank = (q * n).div_ceil(max_bins);
            sorted[rank.saturating_sub(1)]
        })
        .filter(|&c| c < max)
        .collect();
    cuts.dedup();
    cuts
}

/// Matrix of bin indices with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedDataset {
    pub mappers: Vec<BinMapper>,
    /// `columns[feature][sample]`
    pub columns: Vec<Vec<u8>>,
    pub labels: Vec<u8>,
    /// Row-major positions in a histogram that lays the features' bins out
    /// back to back.
    slots: Vec<u16>,
}

impl BinnedDataset {
    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.mappers.len()
    }

    /// Bins `rows` with already-fitted mappers.
    pub fn with_mappers(mappers: Vec<BinMapper>, rows: &[Vec<f64>], labels: Vec<u8>) -> Self {
        let columns = mappers
            .iter()
            .enumerate()
            .map(|(f, m)| rows.iter().map(|r| m.bin(r[f])).collect())
            .collect();
        Self::from_columns(mappers, columns, labels)
    }

    pub fn from_columns(mappers: Vec<BinMapper>, columns: Vec<Vec<u8>>, labels: Vec<u8>) -> Self {
        assert_eq!(mappers.len(), columns.len(), "one bin column per mapper");
        assert!(columns.iter().all(|c| c.len() == labels.len()), "column length differs from labels");
        let m = columns.len();
        let mut slots = vec![0u16; m * labels.len()];
        let mut offset = 0usize;
        for (f, col) in columns.iter().enumerate() {
            for (i, &b) in col.iter().enumerate() {
                slots[i * m + f] = (offset + b as usize) as u16;
            }
            offset += mappers[f].n_bins();
        }
        Self {
            mappers,
            columns,
            labels,
            slots,
        }
    }

    /// Histogram slots of one sample, in feature order.
    #[inline]
    pub fn slots(&self, i: usize) -> &[u16] {
        let m = self.columns.len();
        &self.slots[i * m..(i + 1) * m]
    }
}

pub fn fit_mappers(schema: &FeatureSchema, rows: &[Vec<f64>]) -> Vec<BinMapper> {
    schema
        .features
        .iter()
        .enumerate()
        .map(|(f, spec)| {
            let values: Vec<f64> = rows.iter().map(|r| r[f]).collect();
            BinMapper::fit(spec.kind, &values)
        })
        .collect()
}

pub fn bin_features(data: &Dataset) -> BinnedDataset {
    let mappers = fit_mappers(&data.schema, &data.rows);
    BinnedDataset::with_mappers(mappers, &data.rows, data.labels.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureSchema;

    #[test]
    fn three_distinct_values_give_three_bins() {
        let m = BinMapper::fit(FeatureKind::Continuous, &[1.0, 5.0, 5.0, 9.0, 1.0]);
        assert_eq!(m, BinMapper::Continuous { boundaries: vec![3.0, 7.0] });
        assert_eq!(m.n_bins(), 3);
        assert_eq!(m.bin(1.0), 0);
        assert_eq!(m.bin(5.0), 1);
        assert_eq!(m.bin(9.0), 2);
        assert_eq!(m.bin(-100.0), 0);
        assert_eq!(m.bin(100.0), 2);
    }

    #[test]
    fn symptom_levels_get_pure_bins() {
        let values: Vec<f64> = (0..200).map(|i| f64::from(i % 11)).collect();
        let m = BinMapper::fit(FeatureKind::Continuous, &values);
        assert_eq!(m.n_bins(), 11);
        for l in 0..=10u8 {
            assert_eq!(m.bin(f64::from(l)), l);
        }
    }

    #[test]
    fn many_distinct_values_capped() {
        let values: Vec<f64> = (0..10_000).map(|i| f64::from(i * i % 7919)).collect();
        let m = BinMapper::fit(FeatureKind::Continuous, &values);
        assert!(m.n_bins() <= MAX_BINS);
        assert!(m.n_bins() > 200);
        let BinMapper::Continuous { boundaries } = &m else { unreachable!() };
        assert!(boundaries.windows(2).all(|w| w[0] < w[1]));
        // roughly equal-frequency bins
        let mut counts = vec![0usize; m.n_bins()];
        for &v in &values {
            counts[m.bin(v) as usize] += 1;
        }
        assert!(counts.iter().all(|&c| c > 0 && c < 3 * values.len() / m.n_bins()));
    }

    #[test]
    fn skewed_feature_boundaries_strictly_increase() {
        let mut values: Vec<f64> = vec![0.0; 5000];
        values.extend((0..3000).map(f64::from));
        let b = quantile_boundaries(&values, MAX_BINS);
        assert!(b.windows(2).all(|w| w[0] < w[1]));
        assert!(b.len() < MAX_BINS);
    }

    #[test]
    fn categorical_bins_are_codes() {
        let m = BinMapper::fit(FeatureKind::Categorical { n_categories: 4 }, &[0.0, 1.0]);
        assert_eq!(m.n_bins(), 4);
        assert_eq!(m.bin(3.0), 3);
        assert_eq!(m.bin(7.0), 3);
    }

    #[test]
    fn rebinning_is_deterministic() {
        let rows: Vec<Vec<f64>> = (0..500).map(|i| vec![f64::from(i * 37 % 101), f64::from(i % 3)]).collect();
        let data = Dataset::new(FeatureSchema::all_continuous(2), rows, vec![0; 500]).unwrap();
        assert_eq!(bin_features(&data), bin_features(&data));
    }
}
