//! Histogram-based gradient-boosted decision trees with leaf-wise growth and a
//! multiclass softmax objective.

pub mod binning;
pub mod grower;
pub mod model;
pub mod objective;
pub mod params;
pub mod split;
pub mod tree;

pub use binning::{bin_features, BinMapper, BinnedDataset, MAX_BINS};
pub use grower::{grow_tree_leafwise, GrownTree, SplitEvent};
pub use model::{train, train_binned, train_binned_from, BoostedTree, DepthCheckpoint, GbdtModel, TrainingLog, FORMAT_VERSION};
pub use objective::{cross_entropy, softmax, softmax_grad_hess, softmax_with_loss};
pub use params::GbdtParams;
pub use split::{find_best_split, split_gain, BinStats, SplitCandidate, SplitRule};
pub use tree::TreeNode;
