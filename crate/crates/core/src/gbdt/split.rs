//! Gradient histograms and second-order split search.

use serde::{Deserialize, Serialize};

use super::binning::{BinMapper, BinnedDataset};
use super::params::GbdtParams;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BinStats {
    pub grad: f64,
    pub hess: f64,
    pub count: u32,
}

impl BinStats {
    fn add(&mut self, o: &BinStats) {
        self.grad += o.grad;
        self.hess += o.hess;
        self.count += o.count;
    }

    fn sub(&self, o: &BinStats) -> BinStats {
        BinStats {
            grad: self.grad - o.grad,
            hess: self.hess - o.hess,
            count: self.count - o.count,
        }
    }
}

/// Per-feature histograms laid out back to back.
#[derive(Debug, Clone)]
pub struct Histogram {
    bins: Vec<BinStats>,
    offsets: Vec<usize>,
}

impl Histogram {
    pub fn zeros(mappers: &[BinMapper]) -> Self {
        let mut offsets = Vec::with_capacity(mappers.len() + 1);
        let mut total = 0;
        for m in mappers {
            offsets.push(total);
            total += m.n_bins();
        }
        offsets.push(total);
        Self {
            bins: vec![BinStats::default(); total],
            offsets,
        }
    }

    /// Accumulates `gh` over `indices` for every feature.
    pub fn build(data: &BinnedDataset, indices: &[u32], gh: &[(f64, f64)]) -> Self {
        let mut h = Self::zeros(&data.mappers);
        for &i in indices {
            let i = i as usize;
            let (g, hs) = gh[i];
            for &slot in data.slots(i) {
                let s = &mut h.bins[slot as usize];
                s.grad += g;
                s.hess += hs;
                s.count += 1;
            }
        }
        h
    }

    pub fn feature(&self, f: usize) -> &[BinStats] {
        &self.bins[self.offsets[f]..self.offsets[f + 1]]
    }

    /// `self - other`, for deriving a sibling from its parent.
    pub fn subtract(&self, other: &Histogram) -> Histogram {
        Histogram {
            bins: self.bins.iter().zip(&other.bins).map(|(a, b)| a.sub(b)).collect(),
            offsets: self.offsets.clone(),
        }
    }

    /// Totals over the bins of feature 0 (every feature sums to the node total).
    pub fn totals(&self) -> BinStats {
        let mut t = BinStats::default();
        if self.offsets.len() > 1 {
            for b in self.feature(0) {
                t.add(b);
            }
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SplitRule {
    /// Left when `bin <= bin`; `value` is the raw-scale upper bound of that bin.
    Threshold { bin: u8, value: f64 },
    /// Left when the category is listed.
    Categories { left: Vec<u32> },
}

impl SplitRule {
    pub fn goes_left_bin(&self, bin: u8) -> bool {
        match self {
            SplitRule::Threshold { bin: t, .. } => bin <= *t,
            SplitRule::Categories { left } => left.contains(&u32::from(bin)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub rule: SplitRule,
    /// Candidate position within the feature: threshold bin, or prefix length
    /// of the sorted category order.
    pub position: usize,
    pub gain: f64,
    pub left: BinStats,
    pub right: BinStats,
}

#[inline]
fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// `G_L²/(H_L+λ) + G_R²/(H_R+λ) - (G_L+G_R)²/(H_L+H_R+λ)`
pub fn split_gain(left: &BinStats, right: &BinStats, lambda: f64) -> f64 {
    score(left.grad, left.hess, lambda) + score(right.grad, right.hess, lambda)
        - score(left.grad + right.grad, left.hess + right.hess, lambda)
}

/// Order in which a categorical feature's present categories are swept:
/// ascending `G/(H+λ)`, ties by category code.
pub fn category_order(bins: &[BinStats], lambda: f64) -> Vec<usize> {
    let mut cats: Vec<usize> = (0..bins.len()).filter(|&c| bins[c].count > 0).collect();
    let ratio = |c: usize| bins[c].grad / (bins[c].hess + lambda);
    cats.sort_by(|&a, &b| ratio(a).total_cmp(&ratio(b)).then(a.cmp(&b)));
    cats
}

/// Best admissible split over all features of a node's histogram.
///
/// Ties keep the lowest feature index, then the lowest position.
pub fn best_split_from_histogram(
    hist: &Histogram,
    mappers: &[BinMapper],
    params: &GbdtParams,
) -> Option<SplitCandidate> {
    let total = hist.totals();
    let min_leaf = params.min_samples_per_leaf as u32;
    if total.count < 2 * min_leaf.max(1) {
        return None;
    }
    let lambda = params.l2_lambda;
    let mut best: Option<SplitCandidate> = None;
    let mut consider = |feature: usize, position: usize, left: BinStats, rule: &dyn Fn() -> SplitRule| {
        let right = total.sub(&left);
        if left.count < min_leaf || right.count < min_leaf || left.count == 0 || right.count == 0 {
            return;
        }
        let gain = split_gain(&left, &right, lambda);
        if gain <= params.min_gain_to_split {
            return;
        }
        if best.as_ref().is_none_or(|b| gain > b.gain) {
            best = Some(SplitCandidate {
                feature,
                rule: rule(),
                position,
                gain,
                left,
                right,
            });
        }
    };

    for (f, mapper) in mappers.iter().enumerate() {
        let bins = hist.feature(f);
        match mapper {
            BinMapper::Continuous { .. } => {
                let mut left = BinStats::default();
                for t in 0..bins.len().saturating_sub(1) {
                    if bins[t].count == 0 && t > 0 {
                        // same partition as the previous threshold
                        continue;
                    }
                    left.add(&bins[t]);
                    if left.count < min_leaf {
                        continue;
                    }
                    if total.count - left.count < min_leaf {
                        break;
                    }
                    consider(f, t, left, &|| SplitRule::Threshold {
                        bin: t as u8,
                        value: mapper.upper_bound(t as u8),
                    });
                }
            }
            BinMapper::Categorical { .. } => {
                let order = category_order(bins, lambda);
                let mut left = BinStats::default();
                for j in 0..order.len().saturating_sub(1) {
                    left.add(&bins[order[j]]);
                    consider(f, j + 1, left, &|| {
                        let mut cats: Vec<u32> = order[..=j].iter().map(|&c| c as u32).collect();
                        cats.sort_unstable();
                        SplitRule::Categories { left: cats }
                    });
                }
            }
        }
    }
    best
}

/// Best split of the samples `indices`, or `None` when no admissible split has
/// gain above `min_gain_to_split`.
pub fn find_best_split(
    indices: &[u32],
    grad: &[f64],
    hess: &[f64],
    data: &BinnedDataset,
    params: &GbdtParams,
) -> Option<SplitCandidate> {
    let gh: Vec<(f64, f64)> = grad.iter().copied().zip(hess.iter().copied()).collect();
    let hist = Histogram::build(data, indices, &gh);
    best_split_from_histogram(&hist, &data.mappers, params)
}
