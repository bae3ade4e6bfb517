use serde::{Deserialize, Serialize};

use super::split::SplitRule;

/// A regression tree over binned features. Leaf values are unscaled; the
/// model applies the learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Internal {
        feature: usize,
        rule: SplitRule,
        gain: f64,
        /// Number of training samples reaching this node.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cover: Option<f64>,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        value: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cover: Option<f64>,
    },
}

impl TreeNode {
    pub fn leaf(value: f64, cover: f64) -> Self {
        TreeNode::Leaf {
            value,
            cover: Some(cover),
        }
    }

    pub fn cover(&self) -> Option<f64> {
        match self {
            TreeNode::Internal { cover, .. } | TreeNode::Leaf { cover, .. } => *cover,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    /// Depth of the deepest leaf; a lone leaf has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Pre-order visit of every node with its depth.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a TreeNode, usize)) {
        fn go<'a>(n: &'a TreeNode, d: usize, f: &mut impl FnMut(&'a TreeNode, usize)) {
            f(n, d);
            if let TreeNode::Internal { left, right, .. } = n {
                go(left, d + 1, f);
                go(right, d + 1, f);
            }
        }
        go(self, 0, f);
    }

    /// Leaf value reached by a binned sample.
    pub fn predict_bins(&self, bins: &[u8]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Internal {
                    feature, rule, left, right, ..
                } => {
                    node = if rule.goes_left_bin(bins[*feature]) { left } else { right };
                }
            }
        }
    }

    pub fn strip_covers(&mut self) {
        match self {
            TreeNode::Leaf { cover, .. } => *cover = None,
            TreeNode::Internal {
                cover, left, right, ..
            } => {
                *cover = None;
                left.strip_covers();
                right.strip_covers();
            }
        }
    }
}

/// Array form of a tree for fast evaluation.
#[derive(Debug, Clone)]
pub(crate) struct FlatTree {
    nodes: Vec<FlatNode>,
}

#[derive(Debug, Clone)]
enum FlatNode {
    Leaf(f64),
    Threshold {
        feature: usize,
        bin: u8,
        left: u32,
        right: u32,
    },
    Categories {
        feature: usize,
        mask: [u64; 4],
        left: u32,
        right: u32,
    },
}

impl FlatTree {
    pub(crate) fn from_node(root: &TreeNode) -> Self {
        fn push(n: &TreeNode, nodes: &mut Vec<FlatNode>) -> u32 {
            let id = nodes.len();
            match n {
                TreeNode::Leaf { value, .. } => nodes.push(FlatNode::Leaf(*value)),
                TreeNode::Internal {
                    feature, rule, left, right, ..
                } => {
                    nodes.push(FlatNode::Leaf(0.0));
                    let l = push(left, nodes);
                    let r = push(right, nodes);
                    nodes[id] = match rule {
                        SplitRule::Threshold { bin, .. } => FlatNode::Threshold {
                            feature: *feature,
                            bin: *bin,
                            left: l,
                            right: r,
                        },
                        SplitRule::Categories { left: cats } => {
                            let mut mask = [0u64; 4];
                            for &c in cats {
                                if c < 256 {
                                    mask[(c / 64) as usize] |= 1 << (c % 64);
                                }
                            }
                            FlatNode::Categories {
                                feature: *feature,
                                mask,
                                left: l,
                                right: r,
                            }
                        }
                    };
                }
            }
            id as u32
        }
        let mut nodes = Vec::new();
        push(root, &mut nodes);
        Self { nodes }
    }

    #[inline]
    pub(crate) fn predict_bins(&self, bins: &[u8]) -> f64 {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                FlatNode::Leaf(v) => return *v,
                FlatNode::Threshold {
                    feature,
                    bin,
                    left,
                    right,
                } => {
                    i = if bins[*feature] <= *bin { *left } else { *right } as usize;
                }
                FlatNode::Categories {
                    feature,
                    mask,
                    left,
                    right,
                } => {
                    let b = bins[*feature];
                    let hit = mask[(b / 64) as usize] & (1 << (b % 64)) != 0;
                    i = if hit { *left } else { *right } as usize;
                }
            }
        }
    }
}
