//! Experimental protocol: patient-grouped folds, a SMOTE-inside-fold depth
//! sweep, retraining at the selected depth, and evaluation of the baselines
//! and both model variants on the untouched test set.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::str::FromStr;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{np_fit, pv_predict};
use crate::dataset::Dataset;
use crate::domain::{content_hash, variant_dataset, ModelVariant, SplitDataset, Symptom, TransitionExample};
use crate::error::{Error, Result};
use crate::gbdt::{bin_features, train_binned, train_binned_from, BinnedDataset, DepthCheckpoint, GbdtModel, GbdtParams};
use crate::metrics::{evaluate, EvalReport};
use crate::sampling::{oversample, BalancedSet, SmoteConfig};
use crate::NUM_CLASSES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    pub n_folds: usize,
    pub depths: Vec<usize>,
    pub params: GbdtParams,
    pub smote: bool,
    pub smote_k: usize,
    pub seed: u64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            n_folds: 5,
            depths: (1..=25).collect(),
            params: GbdtParams::default(),
            smote: true,
            smote_k: 5,
            seed: 0,
        }
    }
}

impl HarnessConfig {
    fn sorted_depths(&self) -> Result<Vec<usize>> {
        let depths: BTreeSet<usize> = self.depths.iter().copied().collect();
        if depths.is_empty() || depths.contains(&0) {
            return Err(Error::InvalidArgument("depths must be a non-empty list of positive integers".into()));
        }
        Ok(depths.into_iter().collect())
    }
}

/// Comparison strategies named in reports: the two baselines or a model variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "np")]
    NaivePrior,
    #[serde(rename = "pv")]
    PreviousValue,
    #[serde(rename = "gbdt")]
    Gbdt(ModelVariant),
}

impl Strategy {
    pub fn label(self) -> &'static str {
        match self {
            Strategy::NaivePrior => "NP",
            Strategy::PreviousValue => "PV",
            Strategy::Gbdt(v) => v.label(),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "np" => Ok(Strategy::NaivePrior),
            "pv" => Ok(Strategy::PreviousValue),
            other => other
                .parse::<ModelVariant>()
                .map(Strategy::Gbdt)
                .map_err(|_| Error::InvalidArgument(format!("unknown strategy {s:?}"))),
        }
    }
}

/// Fold index of every example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub n_folds: usize,
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    /// `(training indices, validation indices)` for one fold.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut valid = Vec::new();
        for (i, &f) in self.fold_of.iter().enumerate() {
            if f == fold {
                valid.push(i);
            } else {
                train.push(i);
            }
        }
        (train, valid)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_folds];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }

    /// True when no patient has examples in two folds.
    pub fn patient_disjoint(&self, examples: &[TransitionExample]) -> bool {
        let mut seen: HashMap<&str, usize> = HashMap::new();
        examples
            .iter()
            .zip(&self.fold_of)
            .all(|(e, &f)| *seen.entry(e.patient_id.as_str()).or_insert(f) == f)
    }
}

/// Assigns whole patients to folds: patients are shuffled by `seed`, then
/// placed largest-first into the fold with the fewest examples so far.
pub fn make_folds(examples: &[TransitionExample], n_folds: usize, seed: u64) -> Result<FoldAssignment> {
    if n_folds < 2 {
        return Err(Error::InvalidArgument("need at least two folds".into()));
    }
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut patients: Vec<(&str, usize)> = Vec::new();
    for e in examples {
        let id = e.patient_id.as_str();
        let k = *index.entry(id).or_insert_with(|| {
            patients.push((id, 0));
            patients.len() - 1
        });
        patients[k].1 += 1;
    }
    if patients.len() < n_folds {
        return Err(Error::InvalidArgument(format!(
            "{} patients cannot fill {n_folds} folds",
            patients.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    patients.shuffle(&mut rng);
    patients.sort_by_key(|p| std::cmp::Reverse(p.1));

    let mut load = vec![0usize; n_folds];
    let mut fold_of_patient: HashMap<&str, usize> = HashMap::with_capacity(patients.len());
    for (id, n) in patients {
        let f = (0..n_folds).min_by_key(|&f| (load[f], f)).expect("n_folds > 0");
        load[f] += n;
        fold_of_patient.insert(id, f);
    }
    Ok(FoldAssignment {
        n_folds,
        fold_of: examples.iter().map(|e| fold_of_patient[e.patient_id.as_str()]).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub variant: ModelVariant,
    pub depths: Vec<usize>,
    /// `[depth][fold]`
    pub fold_wmae: Vec<Vec<f64>>,
    pub mean_wmae: Vec<f64>,
    /// `[depth][fold]`: boosting rounds grown for this cell. Rounds before the
    /// previous depth's first depth-limited round are shared with it; zero
    /// means the shallower model was never constrained and is reused as is.
    pub rounds_trained: Vec<Vec<usize>>,
    pub selected_depth: usize,
    pub fold_sizes: Vec<usize>,
    pub patient_disjoint: bool,
    /// Every fold passed the SMOTE containment audit.
    pub smote_contained: bool,
}

impl CvResult {
    pub fn mean_for(&self, depth: usize) -> Option<f64> {
        self.depths.iter().position(|&d| d == depth).map(|i| self.mean_wmae[i])
    }
}

/// Seed for the oversampler on one fold; the full training set uses the
/// harness seed itself.
fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed ^ ((fold as u64 + 1) << 40)
}

/// Oversamples `data` (or not) and checks that the result holds exactly the
/// given rows as originals, with synthetic rows derived only from them.
fn balanced_training_set(data: &Dataset, config: &HarnessConfig, seed: u64) -> Result<(Dataset, bool)> {
    if !config.smote {
        return Ok((data.clone(), true));
    }
    let set = oversample(
        data,
        &SmoteConfig {
            k: config.smote_k,
            rng_seed: seed,
        },
    )?;
    for w in &set.warnings {
        log::warn!("{w}");
    }
    let contained = smote_contained(&set, data);
    Ok((set.data, contained))
}

fn smote_contained(set: &BalancedSet, source: &Dataset) -> bool {
    let n = source.len();
    set.synthetic[..n].iter().all(|&s| !s)
        && set.data.rows[..n] == source.rows[..]
        && set.synthetic[n..].iter().all(|&s| s)
        && set.origins[n..]
            .iter()
            .all(|o| o.as_ref().is_some_and(|o| o.parent < n && o.neighbor < n))
}

fn predict_wmae(model: &GbdtModel, rows: &[Vec<f64>], labels: &[u8]) -> Result<f64> {
    let preds = model.predict_classes(rows)?;
    Ok(evaluate(labels, &preds)?.wmae)
}

struct FoldOutcome {
    wmae: Vec<f64>,
    rounds: Vec<usize>,
    contained: bool,
}

fn run_fold(
    examples: &[TransitionExample],
    folds: &FoldAssignment,
    fold: usize,
    variant: ModelVariant,
    depths: &[usize],
    config: &HarnessConfig,
) -> Result<FoldOutcome> {
    let (train_idx, valid_idx) = folds.split(fold);
    let train_ex: Vec<TransitionExample> = train_idx.iter().map(|&i| examples[i].clone()).collect();
    let valid_ex: Vec<TransitionExample> = valid_idx.iter().map(|&i| examples[i].clone()).collect();
    let (train_data, contained) =
        balanced_training_set(&variant_dataset(&train_ex, variant), config, fold_seed(config.seed, fold))?;
    let valid = variant_dataset(&valid_ex, variant);
    let binned = bin_features(&train_data);

    let mut wmae = Vec::with_capacity(depths.len());
    let mut rounds = Vec::with_capacity(depths.len());
    // (score, checkpoint of the last trained depth); `None` checkpoint means
    // no tree hit its depth limit, so deeper limits give the same model.
    let mut last: Option<(f64, Option<DepthCheckpoint>)> = None;
    for &depth in depths {
        if let Some((score, None)) = &last {
            wmae.push(*score);
            rounds.push(0);
            continue;
        }
        let resume = last.as_ref().and_then(|(_, c)| c.as_ref());
        let start = resume.map_or(0, DepthCheckpoint::round);
        let (model, _, checkpoint) = train_binned_from(&binned, &config.params.with_depth(depth), resume)?;
        let score = predict_wmae(&model, &valid.rows, &valid.labels)?;
        wmae.push(score);
        rounds.push(config.params.num_rounds - start);
        last = Some((score, checkpoint));
    }
    Ok(FoldOutcome {
        wmae,
        rounds,
        contained,
    })
}

/// Mean validation WMAE per depth over patient-grouped folds; SMOTE is fitted
/// on each fold's training part only.
pub fn cv_depth_sweep(
    examples: &[TransitionExample],
    variant: ModelVariant,
    config: &HarnessConfig,
) -> Result<CvResult> {
    config.params.validate()?;
    let depths = config.sorted_depths()?;
    let folds = make_folds(examples, config.n_folds, config.seed)?;
    let outcomes: Vec<FoldOutcome> = (0..config.n_folds)
        .into_par_iter()
        .map(|f| run_fold(examples, &folds, f, variant, &depths, config))
        .collect::<Result<_>>()?;

    let mut fold_wmae = Vec::with_capacity(depths.len());
    let mut rounds_trained = Vec::with_capacity(depths.len());
    let mut mean_wmae = Vec::with_capacity(depths.len());
    for d in 0..depths.len() {
        let row: Vec<f64> = outcomes.iter().map(|o| o.wmae[d]).collect();
        mean_wmae.push(row.iter().sum::<f64>() / row.len() as f64);
        fold_wmae.push(row);
        rounds_trained.push(outcomes.iter().map(|o| o.rounds[d]).collect());
    }
    let mut best = 0;
    for d in 1..depths.len() {
        if mean_wmae[d] < mean_wmae[best] {
            best = d;
        }
    }
    Ok(CvResult {
        variant,
        selected_depth: depths[best],
        depths,
        fold_wmae,
        mean_wmae,
        rounds_trained,
        fold_sizes: folds.sizes(),
        patient_disjoint: folds.patient_disjoint(examples),
        smote_contained: outcomes.iter().all(|o| o.contained),
    })
}

/// Trains one variant on (optionally oversampled) examples at a fixed depth.
pub fn train_variant(
    examples: &[TransitionExample],
    variant: ModelVariant,
    params: &GbdtParams,
    smote: Option<&SmoteConfig>,
) -> Result<GbdtModel> {
    let data = variant_dataset(examples, variant);
    let label_counts = data.class_counts().to_vec();
    let data = match smote {
        Some(cfg) => {
            let set = oversample(&data, cfg)?;
            for w in &set.warnings {
                log::warn!("{w}");
            }
            set.data
        }
        None => data,
    };
    let binned: BinnedDataset = bin_features(&data);
    let (mut model, _) = train_binned(&binned, params)?;
    model.label_counts = Some(label_counts);
    Ok(model.with_variant(variant))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub strategy: Strategy,
    pub label: String,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolAudit {
    pub depths_covered: Vec<usize>,
    pub patient_disjoint_folds: bool,
    pub smote_contained: bool,
    pub test_hash_unchanged: bool,
    pub final_depth_matches_cv: bool,
}

impl ProtocolAudit {
    pub fn passed(&self) -> bool {
        self.patient_disjoint_folds && self.smote_contained && self.test_hash_unchanged && self.final_depth_matches_cv
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub symptom: Symptom,
    pub split_date: NaiveDate,
    pub n_train: usize,
    pub n_test: usize,
    pub test_hash: String,
    pub config: HarnessConfig,
    /// NP, PV, then the two model variants.
    pub strategies: Vec<StrategyReport>,
    pub cv: Vec<CvResult>,
    pub final_depths: Vec<usize>,
    pub audit: ProtocolAudit,
}

impl ExperimentReport {
    pub fn wmae(&self, strategy: Strategy) -> Option<f64> {
        self.strategies
            .iter()
            .find(|s| s.strategy == strategy)
            .map(|s| s.report.wmae)
    }

    pub fn write_table<W: Write>(&self, writer: W) -> Result<()> {
        let reports: Vec<(&str, &EvalReport)> = self
            .strategies
            .iter()
            .map(|s| (s.label.as_str(), &s.report))
            .collect();
        write_table(writer, &reports)
    }
}

/// Writes the per-level table: rows `MAE_0`..`MAE_10` then `WMAE`, one column
/// per strategy. Levels absent from the test labels are left blank.
pub fn write_table<W: Write>(writer: W, columns: &[(&str, &EvalReport)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["class".to_string()];
    header.extend(columns.iter().map(|(name, _)| name.to_string()));
    w.write_record(&header)?;
    for c in 0..NUM_CLASSES as u8 {
        let mut row = vec![format!("MAE_{c}")];
        row.extend(columns.iter().map(|(_, r)| {
            r.per_class_mae
                .get(&c)
                .map(|v| format!("{v:.4}"))
                .unwrap_or_default()
        }));
        w.write_record(&row)?;
    }
    let mut row = vec!["WMAE".to_string()];
    row.extend(columns.iter().map(|(_, r)| format!("{:.4}", r.wmae)));
    w.write_record(&row)?;
    w.flush()?;
    Ok(())
}

/// Evaluates the baselines on `test`, with the naive prior fitted on `train`.
pub fn evaluate_baselines(
    train: &[TransitionExample],
    test: &[TransitionExample],
    symptom: Symptom,
) -> Result<(EvalReport, EvalReport)> {
    let truths: Vec<u8> = test.iter().map(|e| e.target(symptom).get()).collect();
    let train_labels: Vec<u8> = train.iter().map(|e| e.target(symptom).get()).collect();
    let np = np_fit(&train_labels)?;
    let np_preds: Vec<u8> = test.iter().map(|e| np.predict(e).get()).collect();
    let pv_preds: Vec<u8> = test.iter().map(|e| pv_predict(e, symptom).get()).collect();
    Ok((evaluate(&truths, &np_preds)?, evaluate(&truths, &pv_preds)?))
}

pub fn evaluate_model(model: &GbdtModel, test: &[TransitionExample], variant: ModelVariant) -> Result<EvalReport> {
    let data = variant_dataset(test, variant);
    let preds = model.predict_classes(&data.rows)?;
    evaluate(&data.labels, &preds)
}

/// Full protocol for one symptom: CV and retraining for both of its variants,
/// then NP, PV and both models on the test set.
pub fn run_experiment(split: &SplitDataset, symptom: Symptom, config: &HarnessConfig) -> Result<ExperimentReport> {
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::Empty("train and test sets must both be non-empty"));
    }
    let test_hash = content_hash(&split.test);
    let (np, pv) = evaluate_baselines(&split.train, &split.test, symptom)?;
    let mut strategies = vec![
        StrategyReport {
            strategy: Strategy::NaivePrior,
            label: "NP".into(),
            report: np,
        },
        StrategyReport {
            strategy: Strategy::PreviousValue,
            label: "PV".into(),
            report: pv,
        },
    ];
    let mut cvs = Vec::new();
    let mut final_depths = Vec::new();
    let mut smote_ok = true;
    for variant in symptom.variants() {
        let cv = cv_depth_sweep(&split.train, variant, config)?;
        let params = config.params.with_depth(cv.selected_depth);
        let (data, contained) =
            balanced_training_set(&variant_dataset(&split.train, variant), config, config.seed)?;
        smote_ok &= contained;
        let (model, _) = train_binned(&bin_features(&data), &params)?;
        let model = model.with_variant(variant);
        final_depths.push(model.params.max_depth);
        strategies.push(StrategyReport {
            strategy: Strategy::Gbdt(variant),
            label: variant.label().into(),
            report: evaluate_model(&model, &split.test, variant)?,
        });
        cvs.push(cv);
    }
    let audit = ProtocolAudit {
        depths_covered: config.sorted_depths()?,
        patient_disjoint_folds: cvs.iter().all(|c| c.patient_disjoint),
        smote_contained: smote_ok && cvs.iter().all(|c| c.smote_contained),
        test_hash_unchanged: content_hash(&split.test) == test_hash,
        final_depth_matches_cv: cvs.iter().zip(&final_depths).all(|(c, &d)| c.selected_depth == d),
    };
    if !audit.passed() {
        return Err(Error::Invariant(format!("protocol audit failed: {audit:?}")));
    }
    Ok(ExperimentReport {
        symptom,
        split_date: split.split_date,
        n_train: split.train.len(),
        n_test: split.test.len(),
        test_hash,
        config: config.clone(),
        strategies,
        cv: cvs,
        final_depths,
        audit,
    })
}
