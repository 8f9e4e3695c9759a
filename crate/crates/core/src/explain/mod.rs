//! Tree SHAP, feature ablation and cohort statistics.

pub mod ablation;
pub mod shap;
pub mod stats;

pub use ablation::{AblationCell, AblationResult, FeatureAblation};
pub use shap::{shap_brute_force, tree_shap, ShapAttribution};
pub use stats::{chi_square, t_test, StatTestResult, TVariant};
