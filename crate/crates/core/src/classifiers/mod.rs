//! From-scratch classifiers: class-weighted soft-margin SVM and
//! depth-limited decision trees.

mod svm;
mod tree;

pub use svm::{
    solve_dual, svm_fit_gram, svm_predict, svm_train, ClassWeighting, ClassWeights, DualSolution,
    GramFit, Kernel, LinearGram, Prediction, SvmConfig, SvmModel,
};
pub use tree::{
    tree_fit_rows, tree_predict, tree_train, Criterion, Split, TreeConfig, TreeModel, TreeNode,
    PROFILE_DEPTH_RANGE, RAW_MAP_DEPTH_RANGE,
};
