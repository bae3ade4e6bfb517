//! Path-dependent TreeSHAP attributions for boosted models, in score space.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbdt::{GbdtModel, TreeNode};

/// SHAP values for one input: `phi[class][feature]`, with `base[class]` the
/// expected score over the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapAttribution {
    pub base: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
}

impl ShapAttribution {
    /// `base + Σ φ` for one class; equals the model's score for that class.
    pub fn reconstructed_score(&self, class: usize) -> f64 {
        self.base[class] + self.phi[class].iter().sum::<f64>()
    }
}

#[derive(Clone, Copy)]
struct PathElem {
    feature: Option<usize>,
    zero: f64,
    one: f64,
    weight: f64,
}

fn extend(path: &mut Vec<PathElem>, zero: f64, one: f64, feature: Option<usize>) {
    let d = path.len();
    path.push(PathElem {
        feature,
        zero,
        one,
        weight: if d == 0 { 1.0 } else { 0.0 },
    });
    for i in (0..d).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / (d + 1) as f64;
        path[i].weight = zero * path[i].weight * (d - i) as f64 / (d + 1) as f64;
    }
}

fn unwind(path: &mut Vec<PathElem>, index: usize) {
    let d = path.len() - 1;
    let PathElem { zero, one, .. } = path[index];
    let mut next = path[d].weight;
    for i in (0..d).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next * (d + 1) as f64 / ((i + 1) as f64 * one);
            next = tmp - path[i].weight * zero * (d - i) as f64 / (d + 1) as f64;
        } else {
            path[i].weight = path[i].weight * (d + 1) as f64 / (zero * (d - i) as f64);
        }
    }
    for i in index..d {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
    path.pop();
}

fn unwound_sum(path: &[PathElem], index: usize) -> f64 {
    let d = path.len() - 1;
    let PathElem { zero, one, .. } = path[index];
    let mut next = path[d].weight;
    let mut total = 0.0;
    for i in (0..d).rev() {
        if one != 0.0 {
            let tmp = next * (d + 1) as f64 / ((i + 1) as f64 * one);
            total += tmp;
            next = path[i].weight - tmp * zero * (d - i) as f64 / (d + 1) as f64;
        } else if zero != 0.0 {
            total += path[i].weight * (d + 1) as f64 / (zero * (d - i) as f64);
        }
    }
    total
}

/// `paths[level]` holds the path down to the node at that depth; children copy
/// it into the next slot, so no path is allocated per node.
#[allow(clippy::too_many_arguments)]
fn recurse(
    node: &TreeNode,
    bins: &[u8],
    phi: &mut [f64],
    paths: &mut Vec<Vec<PathElem>>,
    level: usize,
    zero: f64,
    one: f64,
    feature: Option<usize>,
) {
    extend(&mut paths[level], zero, one, feature);
    match node {
        TreeNode::Leaf { value, .. } => {
            let path = &paths[level];
            for i in 1..path.len() {
                let w = unwound_sum(path, i);
                let e = path[i];
                let f = e.feature.expect("only the root entry lacks a feature");
                phi[f] += w * (e.one - e.zero) * value;
            }
        }
        TreeNode::Internal {
            feature: split,
            rule,
            left,
            right,
            cover,
            ..
        } => {
            let (hot, cold) = if rule.goes_left_bin(bins[*split]) {
                (left, right)
            } else {
                (right, left)
            };
            let w = cover.expect("covers checked before recursion");
            let frac = |n: &TreeNode| {
                let c = n.cover().expect("covers checked before recursion");
                if w > 0.0 {
                    c / w
                } else {
                    0.0
                }
            };
            let (mut in_zero, mut in_one) = (1.0, 1.0);
            let path = &mut paths[level];
            if let Some(k) = path.iter().position(|e| e.feature == Some(*split)) {
                in_zero = path[k].zero;
                in_one = path[k].one;
                unwind(path, k);
            }
            if paths.len() == level + 1 {
                paths.push(Vec::with_capacity(16));
            }
            for (child, z, o) in [(hot, frac(hot) * in_zero, in_one), (cold, frac(cold) * in_zero, 0.0)] {
                let (done, next) = paths.split_at_mut(level + 1);
                next[0].clear();
                next[0].extend_from_slice(&done[level]);
                recurse(child, bins, phi, paths, level + 1, z, o, Some(*split));
            }
        }
    }
}

/// Cover-weighted mean leaf value: the tree's expected output on the training set.
pub fn tree_expectation(node: &TreeNode) -> Result<f64> {
    match node {
        TreeNode::Leaf { value, .. } => Ok(*value),
        TreeNode::Internal { left, right, .. } => {
            let cl = left.cover().ok_or(Error::MissingCovers)?;
            let cr = right.cover().ok_or(Error::MissingCovers)?;
            let el = tree_expectation(left)?;
            let er = tree_expectation(right)?;
            if cl + cr > 0.0 {
                Ok((cl * el + cr * er) / (cl + cr))
            } else {
                Ok(0.5 * (el + er))
            }
        }
    }
}

/// SHAP values of one tree for a binned input; one entry per feature.
pub fn tree_shap_single(root: &TreeNode, bins: &[u8], n_features: usize) -> Vec<f64> {
    let mut phi = vec![0.0; n_features];
    tree_shap_into(root, bins, &mut phi, &mut Vec::new());
    phi
}

/// Adds one tree's SHAP values to `phi`, reusing `paths` across calls.
fn tree_shap_into(root: &TreeNode, bins: &[u8], phi: &mut [f64], paths: &mut Vec<Vec<PathElem>>) {
    if paths.is_empty() {
        paths.push(Vec::with_capacity(16));
    }
    paths[0].clear();
    recurse(root, bins, phi, paths, 0, 1.0, 1.0, None);
}

/// Per-class expected scores: the `base` of every attribution from this model.
pub fn base_values(model: &GbdtModel) -> Result<Vec<f64>> {
    if !model.has_covers() {
        return Err(Error::MissingCovers);
    }
    let mut base = model.base_scores.clone();
    for t in &model.trees {
        base[t.class] += model.learning_rate * tree_expectation(&t.root)?;
    }
    Ok(base)
}

pub fn tree_shap(model: &GbdtModel, x: &[f64]) -> Result<ShapAttribution> {
    let base = base_values(model)?;
    shap_with_base(model, x, base)
}

fn shap_with_base(model: &GbdtModel, x: &[f64], base: Vec<f64>) -> Result<ShapAttribution> {
    if x.len() != model.n_features() {
        return Err(Error::SchemaMismatch {
            expected: model.n_features(),
            found: x.len(),
        });
    }
    let bins = model.bin_row(x);
    let m = model.n_features();
    let mut phi = vec![vec![0.0; m]; model.num_classes];
    let mut contrib = vec![0.0; m];
    let mut paths = Vec::new();
    for t in &model.trees {
        contrib.iter_mut().for_each(|c| *c = 0.0);
        tree_shap_into(&t.root, &bins, &mut contrib, &mut paths);
        for (p, c) in phi[t.class].iter_mut().zip(&contrib) {
            *p += model.learning_rate * c;
        }
    }
    Ok(ShapAttribution { base, phi })
}

/// SHAP values for many rows, in row order.
pub fn tree_shap_batch(model: &GbdtModel, rows: &[Vec<f64>]) -> Result<Vec<ShapAttribution>> {
    let base = base_values(model)?;
    rows.par_iter().map(|x| shap_with_base(model, x, base.clone())).collect()
}

/// Running sums of `|φ|` per (feature, class).
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceAccumulator {
    sums: Vec<Vec<f64>>,
    n: usize,
}

impl ImportanceAccumulator {
    pub fn new(n_features: usize, n_classes: usize) -> Self {
        Self {
            sums: vec![vec![0.0; n_classes]; n_features],
            n: 0,
        }
    }

    pub fn add(&mut self, attribution: &ShapAttribution) {
        for (c, row) in attribution.phi.iter().enumerate() {
            for (f, v) in row.iter().enumerate() {
                self.sums[f][c] += v.abs();
            }
        }
        self.n += 1;
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `mean |φ|` as `[feature][class]`.
    pub fn means(&self) -> Vec<Vec<f64>> {
        let n = self.n.max(1) as f64;
        self.sums.iter().map(|r| r.iter().map(|s| s / n).collect()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub feature: String,
    pub class: u8,
    pub mean_abs_shap: f64,
    /// Split gain of this feature in the trees of this class.
    pub total_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceSummary {
    pub feature_names: Vec<String>,
    pub n_samples: usize,
    /// `[feature][class]`.
    pub mean_abs_shap: Vec<Vec<f64>>,
    /// `[feature][class]`.
    pub gain: Vec<Vec<f64>>,
}

impl ImportanceSummary {
    /// Mean |φ| summed over classes.
    pub fn total_mean_abs_shap(&self, feature: usize) -> f64 {
        self.mean_abs_shap[feature].iter().sum()
    }

    pub fn total_gain(&self, feature: usize) -> f64 {
        self.gain[feature].iter().sum()
    }

    /// Feature indices by descending total mean |φ|; ties keep schema order.
    pub fn ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.feature_names.len()).collect();
        order.sort_by(|&a, &b| self.total_mean_abs_shap(b).total_cmp(&self.total_mean_abs_shap(a)));
        order
    }

    pub fn rows(&self) -> Vec<ImportanceRow> {
        let mut rows = Vec::new();
        for f in self.ranking() {
            for c in 0..self.mean_abs_shap[f].len() {
                rows.push(ImportanceRow {
                    feature: self.feature_names[f].clone(),
                    class: c as u8,
                    mean_abs_shap: self.mean_abs_shap[f][c],
                    total_gain: self.gain[f][c],
                });
            }
        }
        rows
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["feature", "class", "mean_abs_shap", "total_gain"])?;
        for r in self.rows() {
            w.write_record([
                r.feature,
                r.class.to_string(),
                r.mean_abs_shap.to_string(),
                r.total_gain.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn gain_by_class(model: &GbdtModel) -> Vec<Vec<f64>> {
    let mut gain = vec![vec![0.0; model.num_classes]; model.n_features()];
    for t in &model.trees {
        t.root.visit(&mut |node, _| {
            if let TreeNode::Internal { feature, gain: g, .. } = node {
                gain[*feature][t.class] += g;
            }
        });
    }
    gain
}

pub fn importance_summary(model: &GbdtModel, rows: &[Vec<f64>]) -> Result<ImportanceSummary> {
    if rows.is_empty() {
        return Err(Error::Empty("evaluation sample for importance"));
    }
    let attributions = tree_shap_batch(model, rows)?;
    let mut acc = ImportanceAccumulator::new(model.n_features(), model.num_classes);
    for a in &attributions {
        acc.add(a);
    }
    Ok(ImportanceSummary {
        feature_names: model.feature_names.clone(),
        n_samples: acc.len(),
        mean_abs_shap: acc.means(),
        gain: gain_by_class(model),
    })
}
