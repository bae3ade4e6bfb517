//! SMOTE-NC oversampling of minority classes.
//!
//! Neighbours are found by exhaustive search in a mixed space: Euclidean over
//! standardized continuous features, plus a squared penalty (the class's median
//! continuous standard deviation) for every mismatched categorical feature.
//! A synthetic point lies on the segment from its parent towards one of the
//! parent's `k` nearest same-class neighbours; its categorical values are the
//! neighbours' majority vote. Integer features are rounded and clamped.

use std::io::Write;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureSchema};
use crate::domain::{ModelVariant, TransitionExample, TRANSITIONS_HEADER};
use crate::error::{Error, Result};
use crate::NUM_CLASSES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoteConfig {
    pub k: usize,
    pub rng_seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self { k: 5, rng_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Continuous features with zero variance; their scale is taken as 1.
    pub zero_variance: Vec<bool>,
}

/// Zero-mean, unit-variance scaling of the continuous features (population
/// statistics). Categorical columns are copied unchanged.
pub fn standardize(data: &Dataset) -> Result<(Vec<Vec<f64>>, Standardization)> {
    if data.len() < 2 {
        return Err(Error::InvalidArgument(
            "standardization needs at least two samples".into(),
        ));
    }
    let d = data.n_features();
    let n = data.len() as f64;
    let mut stats = Standardization {
        mean: vec![0.0; d],
        std: vec![1.0; d],
        zero_variance: vec![false; d],
    };
    for f in data.schema.continuous_indices() {
        let mean = data.rows.iter().map(|r| r[f]).sum::<f64>() / n;
        let var = data.rows.iter().map(|r| (r[f] - mean).powi(2)).sum::<f64>() / n;
        stats.mean[f] = mean;
        if var > 0.0 {
            stats.std[f] = var.sqrt();
        } else {
            stats.zero_variance[f] = true;
        }
    }
    let scaled = data
        .rows
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .map(|(f, &v)| {
                    if data.schema.features[f].kind.is_categorical() {
                        v
                    } else {
                        (v - stats.mean[f]) / stats.std[f]
                    }
                })
                .collect()
        })
        .collect();
    Ok((scaled, stats))
}

/// Points of one class laid out for fast mixed-distance queries.
#[derive(Debug, Clone)]
pub struct MixedPoints {
    n_cont: usize,
    n_cat: usize,
    cont: Vec<f64>,
    cat: Vec<u32>,
    penalty_sq: f64,
}

impl MixedPoints {
    /// `rows` must already be standardized.
    pub fn new(rows: &[Vec<f64>], schema: &FeatureSchema, penalty_sq: f64) -> Self {
        let ci = schema.continuous_indices();
        let ki = schema.categorical_indices();
        Self {
            n_cont: ci.len(),
            n_cat: ki.len(),
            cont: rows.iter().flat_map(|r| ci.iter().map(move |&f| r[f])).collect(),
            cat: rows.iter().flat_map(|r| ki.iter().map(move |&f| r[f] as u32)).collect(),
            penalty_sq,
        }
    }

    pub fn len(&self) -> usize {
        self.cont
            .len()
            .checked_div(self.n_cont)
            .or_else(|| self.cat.len().checked_div(self.n_cat))
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn distance_sq(&self, a: usize, b: usize) -> f64 {
        let ca = &self.cont[a * self.n_cont..(a + 1) * self.n_cont];
        let cb = &self.cont[b * self.n_cont..(b + 1) * self.n_cont];
        let mut d: f64 = ca.iter().zip(cb).map(|(x, y)| (x - y) * (x - y)).sum();
        let ka = &self.cat[a * self.n_cat..(a + 1) * self.n_cat];
        let kb = &self.cat[b * self.n_cat..(b + 1) * self.n_cat];
        let mismatches = ka.iter().zip(kb).filter(|(x, y)| x != y).count();
        d += self.penalty_sq * mismatches as f64;
        d
    }
}

/// Median of the per-feature standard deviations of the continuous columns
/// of `rows` (standardized). 1 when there are no continuous features.
pub fn median_continuous_std(rows: &[Vec<f64>], schema: &FeatureSchema) -> f64 {
    let n = rows.len() as f64;
    let mut stds: Vec<f64> = schema
        .continuous_indices()
        .into_iter()
        .map(|f| {
            let mean = rows.iter().map(|r| r[f]).sum::<f64>() / n;
            (rows.iter().map(|r| (r[f] - mean).powi(2)).sum::<f64>() / n).sqrt()
        })
        .collect();
    if stds.is_empty() || rows.is_empty() {
        return 1.0;
    }
    stds.sort_by(f64::total_cmp);
    let m = stds.len();
    if m % 2 == 1 {
        stds[m / 2]
    } else {
        (stds[m / 2 - 1] + stds[m / 2]) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

/// The `min(k, |members|)` members nearest to `query`, by ascending distance
/// and then ascending index. `members` must not contain `query`.
pub fn knn_minority(points: &MixedPoints, query: usize, members: &[usize], k: usize) -> Result<Vec<Neighbor>> {
    if members.is_empty() {
        return Err(Error::Empty("no class members to search"));
    }
    Ok(nearest(points, query, members.iter().copied(), k))
}

/// Top-`k` scan ordered by (distance, index), whatever the candidate order.
fn nearest(points: &MixedPoints, query: usize, candidates: impl Iterator<Item = usize>, k: usize) -> Vec<Neighbor> {
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    if k > 0 {
        for m in candidates {
            offer(&mut best, k, (points.distance_sq(query, m), m));
        }
    }
    best.into_iter()
        .map(|(d2, index)| Neighbor {
            index,
            distance: d2.sqrt(),
        })
        .collect()
}

/// Exact k-nearest search over all points of a class: a k-d tree on the
/// continuous coordinates. The categorical penalty is never negative, so the
/// squared gap to a splitting plane still bounds the mixed distance from below
/// and a subtree is skipped only when that bound exceeds the current k-th
/// distance.
struct KdTree {
    order: Vec<usize>,
    nodes: Vec<KdNode>,
}

enum KdNode {
    Leaf { lo: usize, hi: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

const KD_LEAF: usize = 16;

impl KdTree {
    fn new(points: &MixedPoints) -> Option<Self> {
        if points.n_cont == 0 {
            return None;
        }
        let mut tree = Self {
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        tree.build(points, 0, points.len());
        Some(tree)
    }

    fn coord(points: &MixedPoints, i: usize, dim: usize) -> f64 {
        points.cont[i * points.n_cont + dim]
    }

    fn build(&mut self, points: &MixedPoints, lo: usize, hi: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(KdNode::Leaf { lo, hi });
        if hi - lo <= KD_LEAF {
            return id;
        }
        let extent = |dim: usize| {
            let (mut a, mut b) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.order[lo..hi] {
                let x = Self::coord(points, i, dim);
                a = a.min(x);
                b = b.max(x);
            }
            b - a
        };
        let dim = (0..points.n_cont)
            .max_by(|&a, &b| extent(a).total_cmp(&extent(b)).then(b.cmp(&a)))
            .unwrap_or(0);
        if extent(dim) == 0.0 {
            return id;
        }
        let mid = lo + (hi - lo) / 2;
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            Self::coord(points, a, dim).total_cmp(&Self::coord(points, b, dim))
        });
        let value = Self::coord(points, self.order[mid], dim);
        let left = self.build(points, lo, mid);
        let right = self.build(points, mid, hi);
        self.nodes[id] = KdNode::Split { dim, value, left, right };
        id
    }

    fn nearest(&self, points: &MixedPoints, query: usize, k: usize) -> Vec<Neighbor> {
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        if k > 0 {
            self.search(points, query, k, 0, &mut best);
        }
        best.into_iter()
            .map(|(d2, index)| Neighbor {
                index,
                distance: d2.sqrt(),
            })
            .collect()
    }

    fn search(&self, points: &MixedPoints, query: usize, k: usize, node: usize, best: &mut Vec<(f64, usize)>) {
        match self.nodes[node] {
            KdNode::Leaf { lo, hi } => {
                for &m in &self.order[lo..hi] {
                    if m != query {
                        offer(best, k, (points.distance_sq(query, m), m));
                    }
                }
            }
            KdNode::Split { dim, value, left, right } => {
                let gap = Self::coord(points, query, dim) - value;
                let (near, far) = if gap < 0.0 { (left, right) } else { (right, left) };
                self.search(points, query, k, near, best);
                if best.len() < k || best.last().is_some_and(|&(worst, _)| gap * gap <= worst) {
                    self.search(points, query, k, far, best);
                }
            }
        }
    }
}

/// Keeps `best` as the `k` smallest candidates by (distance, index).
fn offer(best: &mut Vec<(f64, usize)>, k: usize, cand: (f64, usize)) {
    let before = |a: (f64, usize), b: (f64, usize)| a.0 < b.0 || (a.0 == b.0 && a.1 < b.1);
    if best.len() == k && best.last().is_none_or(|&worst| !before(cand, worst)) {
        return;
    }
    let at = best.partition_point(|&b| before(b, cand));
    best.insert(at, cand);
    best.truncate(k);
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub values: Vec<f64>,
    /// Interpolated values before rounding and clamping.
    pub raw: Vec<f64>,
    pub gap: f64,
}

/// Point at fraction `gap` along `sample → neighbor`, with categoricals set by
/// majority vote over `voters` (the sample's own value wins ties it is part of,
/// otherwise the lowest code).
pub fn interpolate(sample: &[f64], neighbor: &[f64], voters: &[&[f64]], gap: f64, schema: &FeatureSchema) -> Synthetic {
    let mut raw = Vec::with_capacity(sample.len());
    let mut values = Vec::with_capacity(sample.len());
    for (f, spec) in schema.features.iter().enumerate() {
        if spec.kind.is_categorical() {
            let v = majority_vote(sample[f], voters.iter().map(|r| r[f]));
            raw.push(v);
            values.push(v);
        } else {
            let r = sample[f] + gap * (neighbor[f] - sample[f]);
            raw.push(r);
            let v = if spec.integer { r.round() } else { r };
            values.push(v.clamp(spec.min, spec.max));
        }
    }
    Synthetic { values, raw, gap }
}

fn majority_vote(own: f64, votes: impl Iterator<Item = f64>) -> f64 {
    let mut tally: Vec<(f64, usize)> = Vec::new();
    for v in votes {
        match tally.iter_mut().find(|(c, _)| *c == v) {
            Some(e) => e.1 += 1,
            None => tally.push((v, 1)),
        }
    }
    let Some(max) = tally.iter().map(|e| e.1).max() else {
        return own;
    };
    let mut winners: Vec<f64> = tally.iter().filter(|e| e.1 == max).map(|e| e.0).collect();
    if winners.contains(&own) {
        return own;
    }
    winners.sort_by(f64::total_cmp);
    winners[0]
}

/// Draws `gap ~ U[0, 1)` and interpolates.
pub fn synthesize<R: Rng>(
    sample: &[f64],
    neighbor: &[f64],
    voters: &[&[f64]],
    schema: &FeatureSchema,
    rng: &mut R,
) -> Synthetic {
    let gap: f64 = rng.random();
    interpolate(sample, neighbor, voters, gap, schema)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticOrigin {
    pub parent: usize,
    pub neighbor: usize,
    pub gap: f64,
    pub raw: Vec<f64>,
}

/// Original rows first (unchanged, in order), then synthetic rows by class.
#[derive(Debug, Clone)]
pub struct BalancedSet {
    pub data: Dataset,
    pub synthetic: Vec<bool>,
    pub origins: Vec<Option<SyntheticOrigin>>,
    pub warnings: Vec<String>,
}

impl BalancedSet {
    pub fn n_synthetic(&self) -> usize {
        self.synthetic.iter().filter(|&&s| s).count()
    }
}

/// Oversamples every non-empty minority class up to the majority count.
///
/// Each class draws from its own ChaCha stream `(rng_seed, class)`, so the
/// output depends only on the input and the seed.
pub fn oversample(data: &Dataset, config: &SmoteConfig) -> Result<BalancedSet> {
    if config.k == 0 {
        return Err(Error::InvalidArgument("SMOTE k must be at least 1".into()));
    }
    let counts = data.class_counts();
    let majority = counts.iter().copied().max().unwrap_or(0);
    if majority == 0 {
        return Err(Error::Empty("no samples to oversample"));
    }
    let mut out = BalancedSet {
        data: data.clone(),
        synthetic: vec![false; data.len()],
        origins: vec![None; data.len()],
        warnings: Vec::new(),
    };
    if counts.iter().all(|&c| c == 0 || c == majority) {
        return Ok(out);
    }
    let (scaled, _) = standardize(data)?;
    let schema = &data.schema;

    for class in 0..NUM_CLASSES {
        let count = counts[class];
        if count == 0 || count == majority {
            continue;
        }
        let need = majority - count;
        let members: Vec<usize> = (0..data.len()).filter(|&i| usize::from(data.labels[i]) == class).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        rng.set_stream(class as u64);

        if count == 1 {
            let msg = format!("class {class} has a single sample; duplicating it {need} times");
            log::warn!("{msg}");
            out.warnings.push(msg);
            let m = members[0];
            for _ in 0..need {
                push_synthetic(
                    &mut out,
                    data.rows[m].clone(),
                    class as u8,
                    SyntheticOrigin {
                        parent: m,
                        neighbor: m,
                        gap: 0.0,
                        raw: data.rows[m].clone(),
                    },
                );
            }
            continue;
        }

        let k = config.k.min(count - 1);
        let class_rows: Vec<Vec<f64>> = members.iter().map(|&i| scaled[i].clone()).collect();
        let penalty = median_continuous_std(&class_rows, schema);
        let points = MixedPoints::new(&class_rows, schema, penalty * penalty);

        // every member seeds need/count points; a random subset seeds one more
        let full_passes = need / count;
        let extra = need % count;
        let mut seeds: Vec<usize> = Vec::with_capacity(need);
        for _ in 0..full_passes {
            seeds.extend(0..count);
        }
        let mut extra_seeds = sample_indices(&mut rng, count, extra).into_vec();
        extra_seeds.sort_unstable();
        seeds.extend(extra_seeds);

        let needed: Vec<usize> = if full_passes > 0 { (0..count).collect() } else { seeds.clone() };
        let index = KdTree::new(&points);
        let neighbor_lists: Vec<(usize, Vec<usize>)> = needed
            .par_iter()
            .map(|&q| {
                let nn = match &index {
                    Some(ix) => ix.nearest(&points, q, k),
                    None => nearest(&points, q, (0..count).filter(|&j| j != q), k),
                };
                (q, nn.into_iter().map(|n| n.index).collect())
            })
            .collect();
        let mut lookup: Vec<Option<&Vec<usize>>> = vec![None; count];
        for (q, list) in &neighbor_lists {
            lookup[*q] = Some(list);
        }

        for &s in &seeds {
            let nn = lookup[s].expect("neighbours computed for every seed");
            let pick = nn[rng.random_range(0..nn.len())];
            let voters: Vec<&[f64]> = nn.iter().map(|&j| data.rows[members[j]].as_slice()).collect();
            let parent = members[s];
            let neighbor = members[pick];
            let syn = synthesize(&data.rows[parent], &data.rows[neighbor], &voters, schema, &mut rng);
            push_synthetic(
                &mut out,
                syn.values,
                class as u8,
                SyntheticOrigin {
                    parent,
                    neighbor,
                    gap: syn.gap,
                    raw: syn.raw,
                },
            );
        }
    }
    Ok(out)
}

fn push_synthetic(out: &mut BalancedSet, row: Vec<f64>, label: u8, origin: SyntheticOrigin) {
    out.data.rows.push(row);
    out.data.labels.push(label);
    out.synthetic.push(true);
    out.origins.push(Some(origin));
}

/// Checks that every synthetic point's raw continuous coordinates lie on the
/// closed segment between its parent and neighbour (within `tol`), and that its
/// final integer coordinates are within half a unit of the raw ones.
/// Returns the number of offending points.
pub fn audit_segments(set: &BalancedSet, tol: f64) -> usize {
    let schema = &set.data.schema;
    let cont = schema.continuous_indices();
    let mut bad = 0;
    for (i, origin) in set.origins.iter().enumerate() {
        let Some(o) = origin else { continue };
        let p = &set.data.rows[o.parent];
        let q = &set.data.rows[o.neighbor];
        let ok = (0.0..=1.0).contains(&o.gap)
            && cont.iter().all(|&f| {
                let lo = p[f].min(q[f]);
                let hi = p[f].max(q[f]);
                let on_line = (o.raw[f] - (p[f] + o.gap * (q[f] - p[f]))).abs() <= tol;
                let within = o.raw[f] >= lo - tol && o.raw[f] <= hi + tol;
                let spec = &schema.features[f];
                let rounded = set.data.rows[i][f];
                let near = !spec.integer || (rounded - o.raw[f].clamp(spec.min, spec.max)).abs() <= 0.5 + tol;
                on_line && within && near
            });
        if !ok {
            bad += 1;
        }
    }
    bad
}

/// Writes originals from `examples` (which must be the rows the balanced set
/// was built from) and the synthetic rows, with a trailing `synthetic` column.
/// Synthetic rows carry no patient, date, or off-variant values.
pub fn write_balanced_csv<W: Write>(
    writer: W,
    examples: &[TransitionExample],
    set: &BalancedSet,
    variant: ModelVariant,
) -> Result<()> {
    let n_orig = set.synthetic.iter().filter(|&&s| !s).count();
    if n_orig != examples.len() {
        return Err(Error::LengthMismatch {
            left: n_orig,
            right: examples.len(),
        });
    }
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = TRANSITIONS_HEADER.to_vec();
    header.push("synthetic");
    wtr.write_record(&header)?;
    for e in examples {
        let f = &e.features;
        wtr.write_record([
            e.patient_id.clone(),
            e.survey_date.to_string(),
            f.sex.as_str().to_string(),
            f.age.to_string(),
            f.cancer_type.as_str().to_string(),
            f.days_since_diagnosis.to_string(),
            f.days_since_prev_survey.to_string(),
            f.prev_pain.to_string(),
            f.prev_tiredness.to_string(),
            e.target_pain.to_string(),
            e.target_tiredness.to_string(),
            "0".to_string(),
        ])?;
    }
    let schema = variant.feature_schema();
    let target = variant.target();
    for (row, label) in set
        .data
        .rows
        .iter()
        .zip(&set.data.labels)
        .zip(&set.synthetic)
        .filter(|(_, &s)| s)
        .map(|(rl, _)| rl)
    {
        let get = |name: &str| schema.index_of(name).map(|i| row[i]);
        let num = |name: &str| get(name).map(|v| format!("{v}")).unwrap_or_default();
        let sex = get("sex").map(|v| crate::domain::Sex::ALL[v as usize].as_str()).unwrap_or("");
        let cancer = get("cancer_type")
            .map(|v| crate::domain::CancerType::ALL[v as usize].as_str())
            .unwrap_or("");
        let (tp, tt) = match target {
            crate::domain::Symptom::Pain => (label.to_string(), String::new()),
            crate::domain::Symptom::Tiredness => (String::new(), label.to_string()),
        };
        wtr.write_record([
            String::new(),
            String::new(),
            sex.to_string(),
            num("age"),
            cancer.to_string(),
            num("days_since_diagnosis"),
            num("days_since_prev_survey"),
            num("prev_pain"),
            num("prev_tiredness"),
            tp,
            tt,
            "1".to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureSpec;

    fn plain(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Dataset {
        let d = rows[0].len();
        Dataset::new(FeatureSchema::all_continuous(d), rows, labels).unwrap()
    }

    #[test]
    fn two_point_standardization() {
        let data = plain(vec![vec![0.0, 5.0], vec![2.0, 5.0]], vec![0, 0]);
        let (scaled, stats) = standardize(&data).unwrap();
        assert_eq!(scaled, vec![vec![-1.0, 0.0], vec![1.0, 0.0]]);
        assert_eq!(stats.zero_variance, vec![false, true]);
        assert!(standardize(&plain(vec![vec![1.0]], vec![0])).is_err());
    }

    #[test]
    fn categorical_columns_not_scaled() {
        let schema = FeatureSchema::new(vec![FeatureSpec::categorical("c", 3), FeatureSpec::continuous("x")]);
        let data = Dataset::new(schema, vec![vec![2.0, 1.0], vec![0.0, 3.0]], vec![0, 1]).unwrap();
        let (scaled, _) = standardize(&data).unwrap();
        assert_eq!(scaled[0][0], 2.0);
        assert_eq!(scaled[1][0], 0.0);
    }

    #[test]
    fn nearest_point_and_tie_break() {
        let schema = FeatureSchema::all_continuous(2);
        let rows = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![3.0, 0.0]];
        let pts = MixedPoints::new(&rows, &schema, 1.0);
        let nn = knn_minority(&pts, 0, &[1, 2], 1).unwrap();
        assert_eq!(nn, vec![Neighbor { index: 1, distance: 1.0 }]);

        let mut rows = vec![vec![10.0, 10.0]; 8];
        rows[0] = vec![0.0, 0.0];
        rows[4] = vec![1.0, 0.0];
        rows[7] = vec![0.0, 1.0];
        let pts = MixedPoints::new(&rows, &schema, 1.0);
        let nn = knn_minority(&pts, 0, &[7, 4, 1, 2], 2).unwrap();
        assert_eq!(nn[0].index, 4);
        assert_eq!(nn[1].index, 7);
        assert!(knn_minority(&pts, 0, &[], 2).is_err());
    }

    #[test]
    fn pruned_search_matches_full_scan() {
        let schema = FeatureSchema::new(vec![
            FeatureSpec::continuous("x"),
            FeatureSpec::continuous("y"),
            FeatureSpec::categorical("c", 3),
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..20 {
            let n = 2 + trial * 7;
            // coarse grid values force many distance ties
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    vec![
                        f64::from(rng.random_range(0..5)),
                        f64::from(rng.random_range(0..4)) * 0.5,
                        f64::from(rng.random_range(0..3)),
                    ]
                })
                .collect();
            let points = MixedPoints::new(&rows, &schema, 0.7);
            let index = KdTree::new(&points).unwrap();
            for q in 0..n {
                let others: Vec<usize> = (0..n).filter(|&j| j != q).collect();
                for k in [1, 3, 5] {
                    assert_eq!(index.nearest(&points, q, k), knn_minority(&points, q, &others, k).unwrap());
                }
            }
        }
    }

    #[test]
    fn categorical_mismatch_adds_penalty() {
        let schema = FeatureSchema::new(vec![FeatureSpec::continuous("x"), FeatureSpec::categorical("c", 2)]);
        let rows = vec![vec![0.0, 0.0], vec![0.5, 1.0], vec![0.9, 0.0]];
        let pts = MixedPoints::new(&rows, &schema, 0.5);
        assert_eq!(pts.distance_sq(0, 1), 0.25 + 0.5);
        let nn = knn_minority(&pts, 0, &[1, 2], 1).unwrap();
        assert_eq!(nn[0].index, 1);
        let pts = MixedPoints::new(&rows, &schema, 1.0);
        let nn = knn_minority(&pts, 0, &[1, 2], 1).unwrap();
        assert_eq!(nn[0].index, 2);
    }

    #[test]
    fn interpolation_endpoints_and_midpoint() {
        let schema = FeatureSchema::all_continuous(2);
        let s = interpolate(&[0.0, 0.0], &[1.0, 1.0], &[], 0.5, &schema);
        assert_eq!(s.raw, vec![0.5, 0.5]);
        let s = interpolate(&[3.0, 4.0], &[1.0, 1.0], &[], 0.0, &schema);
        assert_eq!(s.values, vec![3.0, 4.0]);
    }

    #[test]
    fn integer_features_round_and_clamp() {
        let schema = FeatureSchema::new(vec![FeatureSpec::continuous_int("prev_pain", 0.0, 10.0)]);
        for gap in [0.0, 0.2, 0.5, 0.7, 0.999] {
            let s = interpolate(&[9.0], &[10.0], &[], gap, &schema);
            assert!(s.values[0] == 9.0 || s.values[0] == 10.0);
        }
    }

    #[test]
    fn categorical_majority_vote() {
        let schema = FeatureSchema::new(vec![FeatureSpec::categorical("c", 4)]);
        let a = [1.0];
        let b = [2.0];
        let c = [3.0];
        let s = interpolate(&[0.0], &[2.0], &[&b, &b, &a], 0.3, &schema);
        assert_eq!(s.values[0], 2.0);
        // tie between 1 and 2 that includes the sample's own value
        let s = interpolate(&[2.0], &[1.0], &[&a, &b], 0.3, &schema);
        assert_eq!(s.values[0], 2.0);
        // tie not involving the sample: lowest code
        let s = interpolate(&[0.0], &[3.0], &[&c, &b], 0.3, &schema);
        assert_eq!(s.values[0], 2.0);
    }

    fn imbalanced() -> Dataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..100 {
            rows.push(vec![f64::from(i), f64::from(i % 7)]);
            labels.push(0);
        }
        for i in 0..20 {
            rows.push(vec![f64::from(200 + i * 3), f64::from(i % 5)]);
            labels.push(5);
        }
        plain(rows, labels)
    }

    #[test]
    fn oversample_balances_counts() {
        let data = imbalanced();
        let out = oversample(&data, &SmoteConfig::default()).unwrap();
        let counts = out.data.class_counts();
        assert_eq!(counts[0], 100);
        assert_eq!(counts[5], 100);
        assert_eq!(out.n_synthetic(), 80);
        assert_eq!(&out.data.rows[..120], &data.rows[..]);
        assert_eq!(audit_segments(&out, 1e-9), 0);
    }

    #[test]
    fn balanced_input_is_untouched() {
        let data = plain(vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]], vec![0, 1, 0, 1]);
        let out = oversample(&data, &SmoteConfig::default()).unwrap();
        assert_eq!(out.data, data);
        assert_eq!(out.n_synthetic(), 0);
    }

    #[test]
    fn singleton_class_is_duplicated_with_warning() {
        let data = plain(vec![vec![1.0], vec![2.0], vec![3.0], vec![9.0]], vec![0, 0, 0, 4]);
        let out = oversample(&data, &SmoteConfig::default()).unwrap();
        assert_eq!(out.data.class_counts()[4], 3);
        assert_eq!(out.warnings.len(), 1);
        assert!(out.data.rows[4..].iter().all(|r| r == &vec![9.0]));
    }

    #[test]
    fn deterministic_under_seed() {
        let data = imbalanced();
        let cfg = SmoteConfig { k: 5, rng_seed: 42 };
        let a = oversample(&data, &cfg).unwrap();
        let b = oversample(&data, &cfg).unwrap();
        assert_eq!(a.data, b.data);
        let c = oversample(&data, &SmoteConfig { k: 5, rng_seed: 43 }).unwrap();
        assert_ne!(a.data, c.data);
    }
}
