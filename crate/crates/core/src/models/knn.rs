//! k-nearest-neighbour classifier over stored training rows.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math::sqrt;
use crate::preprocess::FeatureMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    Manhattan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Uniform,
    /// Inverse distance; exact matches take all the weight.
    Distance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnnParams {
    pub k: usize,
    pub metric: Metric,
    pub weights: Weighting,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5, metric: Metric::Euclidean, weights: Weighting::Uniform }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub params: KnnParams,
    pub n_features: usize,
    /// Row-major training rows.
    pub rows: Vec<f64>,
    pub labels: Vec<bool>,
}

pub fn train_knn(train: &FeatureMatrix, params: &KnnParams) -> Result<Knn> {
    if params.k < 1 {
        return Err(Error::InvalidParam("k must be >= 1".into()));
    }
    if train.n_rows() == 0 {
        return Err(Error::InvalidParam("empty training set".into()));
    }
    let rows = (0..train.n_rows()).flat_map(|i| train.row(i).iter().copied()).collect();
    Ok(Knn { params: params.clone(), n_features: train.n_features(), rows, labels: train.labels().to_vec() })
}

impl Knn {
    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.params.metric {
            Metric::Euclidean => sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()),
            Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        let p = self.n_features;
        let n = self.labels.len();
        let k = self.params.k.min(n);
        let mut d: Vec<(f64, usize)> = (0..n).map(|i| (self.distance(x, &self.rows[i * p..(i + 1) * p]), i)).collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < n {
            d.select_nth_unstable_by(k - 1, order);
            d.truncate(k);
        }
        d.sort_by(order);
        let score = |w: &dyn Fn(f64) -> f64, items: &[(f64, usize)]| {
            let (mut num, mut den) = (0.0, 0.0);
            for &(dist, i) in items {
                let wt = w(dist);
                den += wt;
                if self.labels[i] {
                    num += wt;
                }
            }
            num / den
        };
        match self.params.weights {
            Weighting::Uniform => score(&|_| 1.0, &d),
            Weighting::Distance => {
                let exact: Vec<(f64, usize)> = d.iter().copied().filter(|&(dist, _)| dist == 0.0).collect();
                if exact.is_empty() {
                    score(&|dist| 1.0 / dist, &d)
                } else {
                    score(&|_| 1.0, &exact)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::String;
    use alloc::vec;

    fn data() -> FeatureMatrix {
        let rows = [vec![0.0, 0.0], vec![0.1, 0.0], vec![1.0, 1.0], vec![0.9, 1.0], vec![0.5, 0.6]];
        FeatureMatrix::from_rows(vec![String::from("a"), String::from("b")], &rows, vec![false, false, true, true, true]).unwrap()
    }

    #[test]
    fn nearest_self() {
        let m = data();
        let knn = train_knn(&m, &KnnParams { k: 1, ..Default::default() }).unwrap();
        for i in 0..m.n_rows() {
            assert_eq!(knn.probability(m.row(i)), if m.labels()[i] { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn full_neighbourhood_is_prevalence() {
        let m = data();
        let knn = train_knn(&m, &KnnParams { k: 5, ..Default::default() }).unwrap();
        assert!((knn.probability(&[0.3, 0.2]) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn distance_weighting_and_manhattan() {
        let m = data();
        let knn = train_knn(&m, &KnnParams { k: 5, metric: Metric::Manhattan, weights: Weighting::Distance }).unwrap();
        assert!(knn.probability(&[0.95, 1.0]) > 0.8);
        assert_eq!(knn.probability(&[0.0, 0.0]), 0.0);
    }
}
