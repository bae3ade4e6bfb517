//! Best-first (leaf-wise) tree growth.
//!
//! A max-heap holds every leaf that has an admissible split, keyed by that
//! split's gain. Each step splits the single best leaf anywhere in the tree,
//! so a branch can be refined repeatedly while its siblings stay shallow.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::binning::BinnedDataset;
use super::params::GbdtParams;
use super::split::{best_split_from_histogram, Histogram, SplitCandidate, SplitRule};
use super::tree::TreeNode;

/// One executed split, in growth order.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitEvent {
    /// Arena id of the node that was split (root is 0; children get the next ids).
    pub node: usize,
    pub depth: usize,
    pub feature: usize,
    pub gain: f64,
}

#[derive(Debug, Clone)]
pub struct GrownTree {
    pub root: TreeNode,
    pub splits: Vec<SplitEvent>,
    /// Final leaves as `(value, sample indices)`.
    pub leaves: Vec<(f64, Vec<u32>)>,
    /// A deeper limit would have produced a different tree: some leaf at
    /// `max_depth` had a split that the queue would have reached.
    pub depth_limited: bool,
}

struct Leaf {
    start: usize,
    len: usize,
    depth: usize,
    node: usize,
    hist: Histogram,
    best: Option<SplitCandidate>,
}

enum ArenaNode {
    Leaf {
        value: f64,
        cover: f64,
    },
    Split {
        feature: usize,
        rule: SplitRule,
        gain: f64,
        cover: f64,
        left: usize,
        right: usize,
    },
}

#[derive(PartialEq)]
struct QueueEntry {
    gain: f64,
    leaf: usize,
}

impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // larger gain first, then the older leaf
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.leaf.cmp(&self.leaf))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn leaf_value(grad: f64, hess: f64, lambda: f64) -> f64 {
    let v = -grad / (hess + lambda);
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// Grows one tree on the samples `indices` with per-sample `(gradient, hessian)`.
pub fn grow_tree_leafwise(
    data: &BinnedDataset,
    indices: &[u32],
    gh: &[(f64, f64)],
    params: &GbdtParams,
) -> GrownTree {
    assert!(!indices.is_empty(), "cannot grow a tree on an empty sample set");
    let lambda = params.l2_lambda;
    let mut order: Vec<u32> = indices.to_vec();
    let mut scratch: Vec<u32> = Vec::with_capacity(order.len());

    let mut arena: Vec<ArenaNode> = Vec::new();
    let mut leaves: Vec<Leaf> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut splits = Vec::new();
    // strongest split left out because its leaf is at max_depth, as a queue entry
    let mut blocked: Option<QueueEntry> = None;

    let add_leaf = |hist: Histogram,
                        start: usize,
                        len: usize,
                        depth: usize,
                        arena: &mut Vec<ArenaNode>,
                        leaves: &mut Vec<Leaf>,
                        heap: &mut BinaryHeap<QueueEntry>,
                        blocked: &mut Option<QueueEntry>| {
        let t = hist.totals();
        let node = arena.len();
        arena.push(ArenaNode::Leaf {
            value: leaf_value(t.grad, t.hess, lambda),
            cover: f64::from(t.count),
        });
        let best = best_split_from_histogram(&hist, &data.mappers, params);
        let id = leaves.len();
        let mut keep = None;
        if let Some(b) = best {
            let entry = QueueEntry { gain: b.gain, leaf: id };
            if depth < params.max_depth {
                heap.push(entry);
                keep = Some(b);
            } else if blocked.as_ref().is_none_or(|e| entry > *e) {
                *blocked = Some(entry);
            }
        }
        leaves.push(Leaf {
            start,
            len,
            depth,
            node,
            hist,
            best: keep,
        });
    };

    let root_hist = Histogram::build(data, &order, gh);
    add_leaf(root_hist, 0, order.len(), 0, &mut arena, &mut leaves, &mut heap, &mut blocked);
    let mut n_leaves = 1;
    let mut depth_limited = false;

    while n_leaves < params.max_leaves {
        let Some(entry) = heap.pop() else {
            // the blocked leaf would have been next
            depth_limited |= blocked.is_some();
            break;
        };
        // with a deeper limit the blocked leaf would have been popped first
        depth_limited |= blocked.as_ref().is_some_and(|b| *b > entry);
        let id = entry.leaf;
        let split = leaves[id].best.take().expect("queued leaf has a split");
        let (start, len, depth, node) = (leaves[id].start, leaves[id].len, leaves[id].depth, leaves[id].node);

        // stable partition of this leaf's segment
        let col = &data.columns[split.feature];
        let seg = &mut order[start..start + len];
        scratch.clear();
        let mut n_left = 0;
        for k in 0..seg.len() {
            let i = seg[k];
            if split.rule.goes_left_bin(col[i as usize]) {
                seg[n_left] = i;
                n_left += 1;
            } else {
                scratch.push(i);
            }
        }
        seg[n_left..].copy_from_slice(&scratch);
        debug_assert_eq!(n_left as u32, split.left.count);

        let parent_hist = std::mem::replace(&mut leaves[id].hist, Histogram::zeros(&[]));
        let (left_hist, right_hist) = if n_left <= len - n_left {
            let small = Histogram::build(data, &order[start..start + n_left], gh);
            let big = parent_hist.subtract(&small);
            (small, big)
        } else {
            let small = Histogram::build(data, &order[start + n_left..start + len], gh);
            let big = parent_hist.subtract(&small);
            (big, small)
        };

        let left_node = arena.len();
        add_leaf(left_hist, start, n_left, depth + 1, &mut arena, &mut leaves, &mut heap, &mut blocked);
        let right_node = arena.len();
        add_leaf(
            right_hist,
            start + n_left,
            len - n_left,
            depth + 1,
            &mut arena,
            &mut leaves,
            &mut heap,
            &mut blocked,
        );
        // the split leaf is no longer a leaf
        leaves[id].len = 0;

        let cover = match arena[node] {
            ArenaNode::Leaf { cover, .. } => cover,
            ArenaNode::Split { .. } => unreachable!("node split twice"),
        };
        arena[node] = ArenaNode::Split {
            feature: split.feature,
            rule: split.rule,
            gain: split.gain,
            cover,
            left: left_node,
            right: right_node,
        };
        splits.push(SplitEvent {
            node,
            depth,
            feature: split.feature,
            gain: split.gain,
        });
        n_leaves += 1;
    }

    let mut final_leaves = Vec::with_capacity(n_leaves);
    for leaf in &leaves {
        if let ArenaNode::Leaf { value, .. } = arena[leaf.node] {
            final_leaves.push((value, order[leaf.start..leaf.start + leaf.len].to_vec()));
        }
    }

    GrownTree {
        root: build_node(&arena, 0),
        splits,
        leaves: final_leaves,
        depth_limited,
    }
}

fn build_node(arena: &[ArenaNode], id: usize) -> TreeNode {
    match &arena[id] {
        ArenaNode::Leaf { value, cover } => TreeNode::leaf(*value, *cover),
        ArenaNode::Split {
            feature,
            rule,
            gain,
            cover,
            left,
            right,
        } => TreeNode::Internal {
            feature: *feature,
            rule: rule.clone(),
            gain: *gain,
            cover: Some(*cover),
            left: Box::new(build_node(arena, *left)),
            right: Box::new(build_node(arena, *right)),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, FeatureSchema};
    use crate::gbdt::binning::bin_features;

    fn data_1d(n: usize) -> BinnedDataset {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        bin_features(&Dataset::new(FeatureSchema::all_continuous(1), rows, vec![0; n]).unwrap())
    }

    fn p(max_depth: usize, max_leaves: usize) -> GbdtParams {
        GbdtParams {
            max_depth,
            max_leaves,
            min_samples_per_leaf: 1,
            ..GbdtParams::default()
        }
    }

    #[test]
    fn single_leaf_when_max_leaves_is_one() {
        let data = data_1d(10);
        let gh: Vec<(f64, f64)> = (0..10).map(|i| (i as f64 - 2.0, 0.5)).collect();
        let idx: Vec<u32> = (0..10).collect();
        let t = grow_tree_leafwise(&data, &idx, &gh, &p(5, 1));
        let g: f64 = gh.iter().map(|x| x.0).sum();
        let h: f64 = gh.iter().map(|x| x.1).sum();
        assert_eq!(t.root, TreeNode::leaf(-g / (h + 1.0), 10.0));
        assert!(t.splits.is_empty());
    }

    #[test]
    fn depth_one_is_a_stump() {
        let data = data_1d(30);
        let gh: Vec<(f64, f64)> = (0..30).map(|i| (((i * 7) % 11) as f64 - 5.0, 1.0)).collect();
        let idx: Vec<u32> = (0..30).collect();
        let t = grow_tree_leafwise(&data, &idx, &gh, &p(1, 31));
        assert_eq!(t.splits.len(), 1);
        assert_eq!(t.root.depth(), 1);
        assert!(t.depth_limited);
    }

    #[test]
    fn leaves_partition_the_samples() {
        let data = data_1d(50);
        let gh: Vec<(f64, f64)> = (0..50).map(|i| (((i * 13) % 17) as f64 - 8.0, 1.0)).collect();
        let idx: Vec<u32> = (0..50).collect();
        let t = grow_tree_leafwise(&data, &idx, &gh, &p(4, 8));
        let mut all: Vec<u32> = t.leaves.iter().flat_map(|(_, s)| s.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, idx);
        assert_eq!(t.leaves.len(), t.root.n_leaves());
        for (value, samples) in &t.leaves {
            for &s in samples {
                assert_eq!(t.root.predict_bins(&[data.columns[0][s as usize]]), *value);
            }
        }
    }
}
