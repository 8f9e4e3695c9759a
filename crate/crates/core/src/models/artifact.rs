//! Serializable fitted models with a schema-checked prediction entry point.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::models::forest::{train_random_forest, ForestParams};
use crate::models::gbdt::{train_gbdt, GbdtParams};
use crate::models::knn::{train_knn, Knn, KnnParams};
use crate::models::logreg::{train_logreg, LogReg, LogRegParams};
use crate::models::mlp::{train_mlp, Mlp, MlpParams};
use crate::models::nb::{train_nb, GaussianNb, NbParams};
use crate::models::tree::TreeEnsemble;
use crate::preprocess::FeatureMatrix;
use crate::{Error, Result};

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gbdt,
    RandomForest,
    Logreg,
    Knn,
    GaussianNb,
    Mlp,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gbdt => "gbdt",
            ModelKind::RandomForest => "random_forest",
            ModelKind::Logreg => "logreg",
            ModelKind::Knn => "knn",
            ModelKind::GaussianNb => "gaussian_nb",
            ModelKind::Mlp => "mlp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ModelParams {
    Gbdt(GbdtParams),
    RandomForest(ForestParams),
    Logreg(LogRegParams),
    Knn(KnnParams),
    GaussianNb(NbParams),
    Mlp(MlpParams),
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Gbdt(_) => ModelKind::Gbdt,
            ModelParams::RandomForest(_) => ModelKind::RandomForest,
            ModelParams::Logreg(_) => ModelKind::Logreg,
            ModelParams::Knn(_) => ModelKind::Knn,
            ModelParams::GaussianNb(_) => ModelKind::GaussianNb,
            ModelParams::Mlp(_) => ModelKind::Mlp,
        }
    }

    /// Same parameters with the model's random seed replaced (no-op for
    /// deterministic learners).
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut p = self.clone();
        match &mut p {
            ModelParams::Gbdt(g) => g.seed = seed,
            ModelParams::RandomForest(f) => f.seed = seed,
            ModelParams::Mlp(m) => m.seed = seed,
            ModelParams::Logreg(_) | ModelParams::Knn(_) | ModelParams::GaussianNb(_) => {}
        }
        p
    }

    pub fn fit(&self, train: &FeatureMatrix) -> Result<ModelArtifact> {
        let model = match self {
            ModelParams::Gbdt(p) => FittedModel::Trees(train_gbdt(train, p)?.ensemble),
            ModelParams::RandomForest(p) => FittedModel::Trees(train_random_forest(train, p)?.ensemble),
            ModelParams::Logreg(p) => FittedModel::Logreg(train_logreg(train, p)?),
            ModelParams::Knn(p) => FittedModel::Knn(train_knn(train, p)?),
            ModelParams::GaussianNb(p) => FittedModel::GaussianNb(train_nb(train, p)?),
            ModelParams::Mlp(p) => FittedModel::Mlp(train_mlp(train, p)?),
        };
        Ok(ModelArtifact { version: ARTIFACT_VERSION, feature_names: train.feature_names().to_vec(), params: self.clone(), model })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "state", rename_all = "snake_case")]
pub enum FittedModel {
    Trees(TreeEnsemble),
    Logreg(LogReg),
    Knn(Knn),
    GaussianNb(GaussianNb),
    Mlp(Mlp),
}

impl FittedModel {
    pub fn probability(&self, x: &[f64], observed: &[bool]) -> f64 {
        match self {
            FittedModel::Trees(e) => e.probability(x, observed),
            FittedModel::Logreg(m) => m.probability(x),
            FittedModel::Knn(m) => m.probability(x),
            FittedModel::GaussianNb(m) => m.probability(x),
            FittedModel::Mlp(m) => m.probability(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub version: u32,
    pub feature_names: Vec<String>,
    pub params: ModelParams,
    pub model: FittedModel,
}

impl ModelArtifact {
    pub fn kind(&self) -> ModelKind {
        self.params.kind()
    }

    pub fn check_schema(&self, names: &[String]) -> Result<()> {
        if names == self.feature_names.as_slice() {
            return Ok(());
        }
        let missing: Vec<String> = self.feature_names.iter().filter(|n| !names.contains(n)).cloned().collect();
        let extra: Vec<String> = names.iter().filter(|n| !self.feature_names.contains(n)).cloned().collect();
        if missing.is_empty() && extra.is_empty() {
            Err(Error::FeatureOrder)
        } else {
            Err(Error::SchemaMismatch { missing, extra })
        }
    }

    pub fn predict_proba(&self, rows: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_schema(rows.feature_names())?;
        Ok((0..rows.n_rows()).map(|i| self.model.probability(rows.row(i), rows.row_mask(i))).collect())
    }

    pub fn ensemble(&self) -> Option<&TreeEnsemble> {
        match &self.model {
            FittedModel::Trees(e) => Some(e),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tree::EnsembleKind;
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn empty_ensemble_scores_half() {
        let art = ModelArtifact {
            version: ARTIFACT_VERSION,
            feature_names: vec!["a".to_string()],
            params: ModelParams::Gbdt(GbdtParams::default()),
            model: FittedModel::Trees(TreeEnsemble { trees: vec![], base_margin: 0.0, kind: EnsembleKind::Boosted, learning_rate: 0.1, n_features: 1 }),
        };
        let m = FeatureMatrix::from_rows(vec!["a".to_string()], &[vec![0.2], vec![0.9]], vec![false, true]).unwrap();
        assert_eq!(art.predict_proba(&m).unwrap(), vec![0.5, 0.5]);
        let other = FeatureMatrix::from_rows(vec!["b".to_string()], &[vec![0.2]], vec![false]).unwrap();
        assert_eq!(
            art.predict_proba(&other),
            Err(Error::SchemaMismatch { missing: vec!["a".to_string()], extra: vec!["b".to_string()] })
        );
    }

    #[test]
    fn column_order_is_checked() {
        let names = vec!["a".to_string(), "b".to_string()];
        let m = FeatureMatrix::from_rows(names.clone(), &[vec![0.0, 1.0], vec![1.0, 0.0]], vec![false, true]).unwrap();
        let art = ModelParams::Knn(KnnParams { k: 1, ..Default::default() }).fit(&m).unwrap();
        let swapped = m.select_features(&["b".to_string(), "a".to_string()]).unwrap();
        assert_eq!(art.predict_proba(&swapped), Err(Error::FeatureOrder));
    }
}
