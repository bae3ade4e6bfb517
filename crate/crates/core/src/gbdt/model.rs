//! Multiclass boosting: one tree per class per round on softmax gradients.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::binning::{bin_features, BinMapper, BinnedDataset};
use super::grower::{grow_tree_leafwise, GrownTree};
use super::objective::{cross_entropy, softmax, softmax_with_loss};
use super::params::GbdtParams;
use super::tree::{FlatTree, TreeNode};
use crate::dataset::Dataset;
use crate::domain::{ModelVariant, SymptomLevel};
use crate::error::{Error, Result};
use crate::NUM_CLASSES;

pub const FORMAT_VERSION: u32 = 1;

/// Smallest prior probability used for the initial scores, so that classes
/// absent from training get a finite (very negative) log-odds.
const PRIOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedTree {
    pub round: usize,
    pub class: usize,
    pub root: TreeNode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GbdtModel {
    pub format_version: u32,
    pub params: GbdtParams,
    pub num_classes: usize,
    pub learning_rate: f64,
    pub base_scores: Vec<f64>,
    pub feature_names: Vec<String>,
    pub bin_mappers: Vec<BinMapper>,
    #[serde(default)]
    pub variant: Option<ModelVariant>,
    /// Label counts of the training examples before any oversampling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_counts: Option<Vec<usize>>,
    pub trees: Vec<BoostedTree>,
    #[serde(skip)]
    flat: Vec<FlatTree>,
}

impl PartialEq for GbdtModel {
    fn eq(&self, other: &Self) -> bool {
        self.format_version == other.format_version
            && self.params == other.params
            && self.num_classes == other.num_classes
            && self.learning_rate == other.learning_rate
            && self.base_scores == other.base_scores
            && self.feature_names == other.feature_names
            && self.bin_mappers == other.bin_mappers
            && self.variant == other.variant
            && self.label_counts == other.label_counts
            && self.trees == other.trees
    }
}

/// Per-round diagnostics from training.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    /// Mean training cross-entropy before round 0, after round 0, ….
    pub loss: Vec<f64>,
    /// Whether `max_depth` constrained any tree (see [`super::GrownTree::depth_limited`]).
    pub depth_limited: bool,
}

fn class_log_priors(labels: &[u8], num_classes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; num_classes];
    for &l in labels {
        counts[l as usize] += 1;
    }
    let n = labels.len() as f64;
    counts
        .iter()
        .map(|&c| (c as f64 / n).max(PRIOR_FLOOR).ln())
        .collect()
}

/// Trains on raw features, fitting bin boundaries first.
pub fn train(data: &Dataset, params: &GbdtParams) -> Result<GbdtModel> {
    let binned = bin_features(data);
    let (mut model, _) = train_binned(&binned, params)?;
    model.feature_names = data.schema.names();
    Ok(model)
}

/// Trains on a pre-binned dataset; also returns the per-round loss trace.
pub fn train_binned(data: &BinnedDataset, params: &GbdtParams) -> Result<(GbdtModel, TrainingLog)> {
    let (model, log, _) = train_binned_from(data, params, None)?;
    Ok((model, log))
}

/// Training state at the start of the first round in which `max_depth`
/// changed some tree. Every earlier tree is exactly what a deeper limit would
/// have grown, so a run with a larger `max_depth` on the same data and
/// otherwise equal parameters can start from here.
#[derive(Debug, Clone)]
pub struct DepthCheckpoint {
    round: usize,
    max_depth: usize,
    params: GbdtParams,
    n_samples: usize,
    trees: Vec<BoostedTree>,
    scores: Vec<f64>,
    loss: Vec<f64>,
}

impl DepthCheckpoint {
    pub fn round(&self) -> usize {
        self.round
    }
}

/// Like [`train_binned`], optionally resuming from a checkpoint taken by a
/// shallower run. Also returns this run's own checkpoint, or `None` when no
/// tree was constrained by `max_depth` (any deeper limit gives the same model).
pub fn train_binned_from(
    data: &BinnedDataset,
    params: &GbdtParams,
    resume: Option<&DepthCheckpoint>,
) -> Result<(GbdtModel, TrainingLog, Option<DepthCheckpoint>)> {
    params.validate()?;
    let n = data.n_samples();
    if n == 0 {
        return Err(Error::Empty("training set has no samples"));
    }
    if let Some(&bad) = data.labels.iter().find(|&&l| usize::from(l) >= NUM_CLASSES) {
        return Err(Error::InvalidLevel(i64::from(bad)));
    }
    if let Some(cp) = resume {
        let same = GbdtParams {
            max_depth: params.max_depth,
            ..cp.params.clone()
        };
        if cp.n_samples != n || same != *params || cp.max_depth >= params.max_depth {
            return Err(Error::InvalidArgument(
                "checkpoint comes from different data, parameters, or a depth not below this one".into(),
            ));
        }
    }
    let k = NUM_CLASSES;
    let base_scores = class_log_priors(&data.labels, k);
    let mut model = GbdtModel {
        format_version: FORMAT_VERSION,
        params: params.clone(),
        num_classes: k,
        learning_rate: params.learning_rate,
        base_scores: base_scores.clone(),
        feature_names: (0..data.n_features()).map(|f| format!("f{f}")).collect(),
        bin_mappers: data.mappers.clone(),
        variant: None,
        label_counts: None,
        trees: Vec::new(),
        flat: Vec::new(),
    };
    let mut log = TrainingLog::default();

    let n_present = {
        let mut seen = [false; NUM_CLASSES];
        data.labels.iter().for_each(|&l| seen[l as usize] = true);
        seen.iter().filter(|&&s| s).count()
    };
    if n_present < 2 {
        log::warn!("training labels contain a single class; the model is its prior only");
        return Ok((model, log, None));
    }

    // scores[i * k + c]
    let (first_round, mut scores) = match resume {
        Some(cp) => {
            model.trees = cp.trees.clone();
            log.loss = cp.loss.clone();
            (cp.round, cp.scores.clone())
        }
        None => (0, (0..n).flat_map(|_| base_scores.iter().copied()).collect()),
    };
    let mut checkpoint = None;
    let mut gh: Vec<Vec<(f64, f64)>> = vec![vec![(0.0, 0.0); n]; k];
    let mut probs = vec![0.0; k];
    let all: Vec<u32> = (0..n as u32).collect();
    let lr = params.learning_rate;

    for round in first_round..params.num_rounds {
        let mut loss = 0.0;
        for i in 0..n {
            let y = data.labels[i] as usize;
            loss += softmax_with_loss(&scores[i * k..(i + 1) * k], y, &mut probs);
            for c in 0..k {
                let p = probs[c];
                let g = if c == y { p - 1.0 } else { p };
                gh[c][i] = (g, p * (1.0 - p));
            }
        }
        log.loss.push(loss / n as f64);

        let grown: Vec<GrownTree> = gh
            .iter()
            .map(|class_gh| grow_tree_leafwise(data, &all, class_gh, params))
            .collect();
        if checkpoint.is_none() && grown.iter().any(|g| g.depth_limited) {
            checkpoint = Some(DepthCheckpoint {
                round,
                max_depth: params.max_depth,
                params: params.clone(),
                n_samples: n,
                trees: model.trees.clone(),
                scores: scores.clone(),
                loss: log.loss[..log.loss.len() - 1].to_vec(),
            });
        }
        for (class, tree) in grown.into_iter().enumerate() {
            for (value, samples) in &tree.leaves {
                for &i in samples {
                    scores[i as usize * k + class] += lr * value;
                }
            }
            model.trees.push(BoostedTree {
                round,
                class,
                root: tree.root,
            });
        }
    }
    log.depth_limited = checkpoint.is_some();
    let final_loss = (0..n)
        .map(|i| cross_entropy(&scores[i * k..(i + 1) * k], data.labels[i] as usize))
        .sum::<f64>()
        / n as f64;
    log.loss.push(final_loss);
    debug_assert!(
        log.loss.windows(2).all(|w| w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0)),
        "training loss increased: {:?}",
        log.loss
    );

    model.rebuild_cache();
    Ok((model, log, checkpoint))
}

impl GbdtModel {
    fn rebuild_cache(&mut self) {
        self.flat = self.trees.iter().map(|t| FlatTree::from_node(&t.root)).collect();
    }

    pub fn n_features(&self) -> usize {
        self.bin_mappers.len()
    }

    pub fn n_rounds(&self) -> usize {
        self.trees.len() / self.num_classes.max(1)
    }

    pub fn with_variant(mut self, variant: ModelVariant) -> Self {
        self.feature_names = variant.feature_schema().names();
        self.variant = Some(variant);
        self
    }

    fn check_schema(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features() {
            return Err(Error::SchemaMismatch {
                expected: self.n_features(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn bin_row(&self, x: &[f64]) -> Vec<u8> {
        self.bin_mappers.iter().zip(x).map(|(m, &v)| m.bin(v)).collect()
    }

    /// Base score plus the learning-rate-scaled leaf of every tree, per class.
    pub fn predict_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_schema(x)?;
        let bins = self.bin_row(x);
        let mut scores = self.base_scores.clone();
        for (t, flat) in self.trees.iter().zip(&self.flat) {
            scores[t.class] += self.learning_rate * flat.predict_bins(&bins);
        }
        Ok(scores)
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.predict_scores(x)?))
    }

    /// Most probable class; ties go to the lowest level.
    pub fn predict_class(&self, x: &[f64]) -> Result<SymptomLevel> {
        let p = self.predict_proba(x)?;
        let mut best = 0;
        for c in 1..p.len() {
            if p[c] > p[best] {
                best = c;
            }
        }
        SymptomLevel::new(best as i64)
    }

    pub fn predict_classes(&self, rows: &[Vec<f64>]) -> Result<Vec<u8>> {
        rows.iter().map(|r| self.predict_class(r).map(u8::from)).collect()
    }

    /// Sum of split gains per feature over every tree.
    pub fn total_gain_per_feature(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.n_features()];
        for t in &self.trees {
            t.root.visit(&mut |node, _| {
                if let TreeNode::Internal { feature, gain, .. } = node {
                    totals[*feature] += gain;
                }
            });
        }
        totals
    }

    /// Drops node cover counts; the model still predicts but cannot be explained.
    pub fn strip_covers(&mut self) {
        for t in &mut self.trees {
            t.root.strip_covers();
        }
    }

    pub fn has_covers(&self) -> bool {
        let mut ok = true;
        for t in &self.trees {
            t.root.visit(&mut |node, _| ok &= node.cover().is_some());
        }
        ok
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer(writer, self)?;
        Ok(())
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut model: GbdtModel = serde_json::from_reader(reader)?;
        if model.format_version != FORMAT_VERSION {
            return Err(Error::FormatVersion(model.format_version));
        }
        if model.base_scores.len() != model.num_classes
            || model.trees.iter().any(|t| t.class >= model.num_classes)
        {
            return Err(Error::InvalidArgument("model classes are inconsistent".into()));
        }
        model.rebuild_cache();
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.to_writer(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
