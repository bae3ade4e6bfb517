use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use symptom_forecast::dataset::{Dataset, FeatureSchema};
use symptom_forecast::gbdt::{
    bin_features, find_best_split, grow_tree_leafwise, train_binned, train_binned_from, BinnedDataset, GbdtParams,
    SplitCandidate,
};

fn random_binned(seed: u64, n: usize, m: usize) -> BinnedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| rng.random_range(0..12) as f64).collect())
        .collect();
    let labels: Vec<u8> = rows
        .iter()
        .map(|r| ((r[0] + r[1 % m]) / 2.0 + rng.random_range(-1.5..1.5)).clamp(0.0, 10.0) as u8)
        .collect();
    bin_features(&Dataset::new(FeatureSchema::all_continuous(m), rows, labels).unwrap())
}

/// Replays growth: every executed split must be the best among the open
/// leaves (older leaf on ties), and growth stops only when the leaf budget is
/// spent or nothing splittable is left.
#[test]
fn splits_follow_best_first_order() {
    for seed in 0..30 {
        let data = random_binned(seed, 200, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        // dyadic values: sibling histograms built by subtraction stay exact
        let gh: Vec<(f64, f64)> = (0..200)
            .map(|_| (rng.random_range(-64..64) as f64 / 64.0, rng.random_range(8..32) as f64 / 128.0))
            .collect();
        let (g, h): (Vec<f64>, Vec<f64>) = gh.iter().copied().unzip();
        let params = GbdtParams {
            max_depth: 1 + (seed as usize % 5),
            max_leaves: 2 + (seed as usize % 12),
            min_samples_per_leaf: 5,
            ..GbdtParams::default()
        };
        let all: Vec<u32> = (0..200).collect();
        let tree = grow_tree_leafwise(&data, &all, &gh, &params);

        // (node id, depth, samples)
        let mut open: Vec<(usize, usize, Vec<u32>)> = vec![(0, 0, all.clone())];
        let mut next_id = 1;
        let best_open = |open: &[(usize, usize, Vec<u32>)]| {
            open.iter()
                .enumerate()
                .filter(|(_, l)| l.1 < params.max_depth)
                .filter_map(|(k, l)| find_best_split(&l.2, &g, &h, &data, &params).map(|s| (k, s)))
                // open leaves are in id order, so keeping the first on ties keeps the older
                .fold(None, |acc: Option<(usize, SplitCandidate)>, (k, s)| match acc {
                    Some((_, ref b)) if b.gain >= s.gain => acc,
                    _ => Some((k, s)),
                })
        };
        for event in &tree.splits {
            let (k, split) = best_open(&open).expect("an executed split must have been available");
            let (id, depth, samples) = open.remove(k);
            assert_eq!((event.node, event.depth, event.feature, event.gain), (id, depth, split.feature, split.gain));
            let (left, right): (Vec<u32>, Vec<u32>) = samples
                .iter()
                .partition(|&&i| split.rule.goes_left_bin(data.columns[split.feature][i as usize]));
            open.push((next_id, depth + 1, left));
            open.push((next_id + 1, depth + 1, right));
            open.sort_by_key(|l| l.0);
            next_id += 2;
        }
        assert_eq!(open.len(), tree.leaves.len());
        assert!(open.len() == params.max_leaves || best_open(&open).is_none());
    }
}

#[test]
fn best_first_refines_one_branch_before_its_sibling() {
    // feature 0 separates the halves; feature 1 matters a lot on the left
    // (also within each of its children) and barely on the right
    let mut rows = Vec::new();
    let mut gh = Vec::new();
    for i in 0..8 {
        let x0 = (i >= 4) as u8 as f64;
        let x1 = i % 4;
        rows.push(vec![x0, x1 as f64]);
        let g = if x0 == 0.0 { [-2.0, -1.5, -0.5, 0.0][x1] } else { [0.9, 0.9, 1.1, 1.1][x1] };
        gh.push((g, 1.0));
    }
    let data = bin_features(&Dataset::new(FeatureSchema::all_continuous(2), rows, vec![0; 8]).unwrap());
    let params = GbdtParams {
        max_depth: 3,
        max_leaves: 4,
        min_samples_per_leaf: 1,
        l2_lambda: 0.0,
        ..GbdtParams::default()
    };
    let all: Vec<u32> = (0..8).collect();
    let tree = grow_tree_leafwise(&data, &all, &gh, &params);
    let order: Vec<(usize, usize, usize)> = tree.splits.iter().map(|s| (s.node, s.depth, s.feature)).collect();
    // gains: root 8, left child 2.25, its children 0.125 each, right child 0.04;
    // a level-wise grower would split the right child (id 2) third
    assert_eq!(order, vec![(0, 0, 0), (1, 1, 1), (3, 2, 1)]);
    assert_eq!(tree.leaves.len(), 4);
}

#[test]
fn resuming_from_checkpoint_matches_training_from_scratch() {
    let data = random_binned(7, 600, 4);
    let base = GbdtParams {
        num_rounds: 12,
        min_samples_per_leaf: 5,
        ..GbdtParams::default()
    };
    let mut checkpoint = None;
    for depth in 1..=6 {
        let params = base.with_depth(depth);
        let (scratch, scratch_log, scratch_cp) = train_binned_from(&data, &params, None).unwrap();
        let (resumed, resumed_log, resumed_cp) = train_binned_from(&data, &params, checkpoint.as_ref()).unwrap();
        assert_eq!(scratch, resumed, "depth {depth}");
        assert_eq!(scratch_log, resumed_log);
        assert_eq!(scratch_cp.as_ref().map(|c| c.round()), resumed_cp.as_ref().map(|c| c.round()));
        if resumed_cp.is_none() {
            break;
        }
        checkpoint = resumed_cp;
    }
}

#[test]
fn unconstrained_model_is_unchanged_by_deeper_limits() {
    let data = random_binned(8, 300, 3);
    let params = GbdtParams {
        num_rounds: 8,
        max_leaves: 4,
        min_samples_per_leaf: 10,
        max_depth: 12,
        ..GbdtParams::default()
    };
    let (model, log) = train_binned(&data, &params).unwrap();
    assert!(!log.depth_limited);
    let (deeper, _) = train_binned(&data, &params.with_depth(20)).unwrap();
    assert_eq!(model.trees, deeper.trees);
    assert_eq!(model.base_scores, deeper.base_scores);
}

#[test]
fn depth_limited_models_change_with_depth() {
    let data = random_binned(9, 800, 4);
    let params = GbdtParams {
        num_rounds: 5,
        max_depth: 1,
        min_samples_per_leaf: 5,
        ..GbdtParams::default()
    };
    let (shallow, log) = train_binned(&data, &params).unwrap();
    assert!(log.depth_limited);
    let (deeper, _) = train_binned(&data, &params.with_depth(2)).unwrap();
    assert_ne!(shallow.trees, deeper.trees);
    assert!(shallow.trees.iter().all(|t| t.root.depth() <= 1));
}

#[test]
fn checkpoint_from_other_parameters_is_rejected() {
    let data = random_binned(10, 300, 3);
    let params = GbdtParams {
        num_rounds: 4,
        max_depth: 1,
        min_samples_per_leaf: 5,
        ..GbdtParams::default()
    };
    let (_, _, cp) = train_binned_from(&data, &params, None).unwrap();
    let cp = cp.expect("depth 1 binds");
    let other_lr = GbdtParams {
        learning_rate: 0.2,
        ..params.with_depth(3)
    };
    assert!(train_binned_from(&data, &other_lr, Some(&cp)).is_err());
    assert!(train_binned_from(&data, &params, Some(&cp)).is_err());
    let other_data = random_binned(11, 200, 3);
    assert!(train_binned_from(&other_data, &params.with_depth(2), Some(&cp)).is_err());
}
