//! Model families and hyperparameter search.

pub mod artifact;
pub mod forest;
pub mod gbdt;
pub mod grid;
pub(crate) mod grow;
pub mod knn;
pub mod logreg;
pub mod mlp;
pub mod nb;
pub mod tree;

pub use artifact::{FittedModel, ModelArtifact, ModelKind, ModelParams};
pub use forest::{train_random_forest, ForestFit, ForestParams, MaxFeatures};
pub use gbdt::{train_gbdt, GbdtFit, GbdtParams, GrowthPolicy};
pub use grid::{grid_search, grid_search_with, CvRow, GridResult, GridSpec};
pub use tree::{EnsembleKind, Tree, TreeEnsemble, TreeNode};
