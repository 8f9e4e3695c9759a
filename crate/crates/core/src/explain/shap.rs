//! Exact Shapley values for tree ensembles in margin space, using cover
//! fractions as the conditional expectation for absent features.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::models::tree::{Tree, TreeEnsemble, TreeNode};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapAttribution {
    pub phi: Vec<f64>,
    /// Cover-weighted expected margin.
    pub base_value: f64,
}

impl ShapAttribution {
    pub fn total(&self) -> f64 {
        self.base_value + self.phi.iter().sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy)]
struct PathElem {
    feature: usize,
    zero: f64,
    one: f64,
    weight: f64,
}

const NO_FEATURE: usize = usize::MAX;

fn extend(path: &mut Vec<PathElem>, zero: f64, one: f64, feature: usize) {
    let depth = path.len();
    path.push(PathElem { feature, zero, one, weight: if depth == 0 { 1.0 } else { 0.0 } });
    let d = depth as f64;
    for i in (0..depth).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / (d + 1.0);
        path[i].weight = zero * path[i].weight * (d - i as f64) / (d + 1.0);
    }
}

fn unwind(path: &mut Vec<PathElem>, index: usize) {
    let depth = path.len() - 1;
    let d = depth as f64;
    let (one, zero) = (path[index].one, path[index].zero);
    let mut next = path[depth].weight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next * (d + 1.0) / ((i + 1) as f64 * one);
            next = tmp - path[i].weight * zero * (d - i as f64) / (d + 1.0);
        } else {
            path[i].weight = path[i].weight * (d + 1.0) / (zero * (d - i as f64));
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
    path.pop();
}

fn unwound_sum(path: &[PathElem], index: usize) -> f64 {
    let depth = path.len() - 1;
    let d = depth as f64;
    let (one, zero) = (path[index].one, path[index].zero);
    let mut next = path[depth].weight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next * (d + 1.0) / ((i + 1) as f64 * one);
            total += tmp;
            next = path[i].weight - tmp * zero * (d - i as f64) / (d + 1.0);
        } else {
            total += path[i].weight / zero / ((d - i as f64) / (d + 1.0));
        }
    }
    total
}

fn recurse(
    tree: &Tree,
    node: usize,
    x: &[f64],
    observed: &[bool],
    phi: &mut [f64],
    mut path: Vec<PathElem>,
    zero: f64,
    one: f64,
    feature: usize,
) {
    extend(&mut path, zero, one, feature);
    match tree.nodes[node] {
        TreeNode::Leaf { weight, .. } => {
            for i in 1..path.len() {
                let w = unwound_sum(&path, i);
                let el = path[i];
                phi[el.feature] += w * (el.one - el.zero) * weight;
            }
        }
        TreeNode::Split { feature: split, threshold, left, right, cover, missing_goes_left, .. } => {
            let go_left = if observed[split] { x[split] < threshold } else { missing_goes_left };
            let (hot, cold) = if go_left { (left, right) } else { (right, left) };
            let hot_zero = tree.nodes[hot].cover() / cover;
            let cold_zero = tree.nodes[cold].cover() / cover;
            let (mut in_zero, mut in_one) = (1.0, 1.0);
            if let Some(k) = path.iter().position(|e| e.feature == split) {
                in_zero = path[k].zero;
                in_one = path[k].one;
                unwind(&mut path, k);
            }
            recurse(tree, hot, x, observed, phi, path.clone(), hot_zero * in_zero, in_one, split);
            recurse(tree, cold, x, observed, phi, path, cold_zero * in_zero, 0.0, split);
        }
    }
}

/// Per-tree Shapley values by path tracking, added into `phi` with `scale`.
pub fn tree_shap_single(tree: &Tree, x: &[f64], observed: &[bool], scale: f64, phi: &mut [f64]) -> Result<()> {
    tree.check_covers()?;
    let mut local = vec![0.0; phi.len()];
    recurse(tree, 0, x, observed, &mut local, Vec::with_capacity(16), 1.0, 1.0, NO_FEATURE);
    for (p, l) in phi.iter_mut().zip(local) {
        *p += scale * l;
    }
    Ok(())
}

/// Exact SHAP values of the ensemble margin for one instance.
pub fn tree_shap(ensemble: &TreeEnsemble, x: &[f64], observed: &[bool]) -> Result<ShapAttribution> {
    let mut phi = vec![0.0; ensemble.n_features];
    let scale = ensemble.tree_weight();
    for tree in &ensemble.trees {
        tree_shap_single(tree, x, observed, scale, &mut phi)?;
    }
    Ok(ShapAttribution { phi, base_value: ensemble.expected_margin() })
}

/// Cover-weighted expectation of a tree's output given only the features in
/// `present` (bit mask).
fn conditional_expectation(tree: &Tree, node: usize, x: &[f64], observed: &[bool], present: u32) -> f64 {
    match tree.nodes[node] {
        TreeNode::Leaf { weight, .. } => weight,
        TreeNode::Split { feature, threshold, left, right, cover, missing_goes_left, .. } => {
            if present & (1 << feature) != 0 {
                let go_left = if observed[feature] { x[feature] < threshold } else { missing_goes_left };
                conditional_expectation(tree, if go_left { left } else { right }, x, observed, present)
            } else {
                (tree.nodes[left].cover() * conditional_expectation(tree, left, x, observed, present)
                    + tree.nodes[right].cover() * conditional_expectation(tree, right, x, observed, present))
                    / cover
            }
        }
    }
}

pub const BRUTE_FORCE_MAX_FEATURES: usize = 12;

/// Shapley values by direct enumeration of all feature subsets with weights
/// `|S|! (p - |S| - 1)! / p!`.
pub fn shap_brute_force(ensemble: &TreeEnsemble, x: &[f64], observed: &[bool]) -> Result<ShapAttribution> {
    let p = ensemble.n_features;
    if p > BRUTE_FORCE_MAX_FEATURES {
        return Err(Error::TooManyFeatures(p));
    }
    for t in &ensemble.trees {
        t.check_covers()?;
    }
    let scale = ensemble.tree_weight();
    let value = |s: u32| -> f64 {
        ensemble.base_margin + scale * ensemble.trees.iter().map(|t| conditional_expectation(t, 0, x, observed, s)).sum::<f64>()
    };
    let values: Vec<f64> = (0..1u32 << p).map(value).collect();
    let mut fact = vec![1.0f64; p + 1];
    for i in 1..=p {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut phi = vec![0.0; p];
    for (i, ph) in phi.iter_mut().enumerate() {
        let bit = 1u32 << i;
        for s in 0..1u32 << p {
            if s & bit != 0 {
                continue;
            }
            let k = s.count_ones() as usize;
            let w = fact[k] * fact[p - k - 1] / fact[p];
            *ph += w * (values[(s | bit) as usize] - values[s as usize]);
        }
    }
    Ok(ShapAttribution { phi, base_value: values[0] })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapSummaryRow {
    pub feature: String,
    pub instance_id: String,
    pub shap_value: f64,
    pub feature_value: f64,
}

/// Mean |phi| per feature, ordered descending (ties keep column order).
pub fn mean_abs_shap(names: &[String], attributions: &[ShapAttribution]) -> Vec<(String, f64)> {
    let n = attributions.len().max(1) as f64;
    let mut out: Vec<(usize, f64)> =
        (0..names.len()).map(|j| (j, attributions.iter().map(|a| a.phi[j].abs()).sum::<f64>() / n)).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out.into_iter().map(|(j, v)| (names[j].clone(), v)).collect()
}

/// Long-format summary: one row per (feature, instance), features ordered by
/// mean |phi| descending, instances in input order.
pub fn shap_summary_rows(names: &[String], ids: &[String], values: &[Vec<f64>], attributions: &[ShapAttribution]) -> Vec<ShapSummaryRow> {
    let order = mean_abs_shap(names, attributions);
    let mut rows = Vec::with_capacity(names.len() * attributions.len());
    for (name, _) in order {
        let j = names.iter().position(|n| *n == name).expect("name from list");
        for (i, a) in attributions.iter().enumerate() {
            rows.push(ShapSummaryRow { feature: name.clone(), instance_id: ids[i].clone(), shap_value: a.phi[j], feature_value: values[i][j] });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tree::EnsembleKind;
    use alloc::string::ToString;

    fn stump() -> TreeEnsemble {
        let tree = Tree {
            nodes: vec![
                TreeNode::Split { feature: 0, threshold: 0.5, left: 1, right: 2, cover: 2.0, missing_goes_left: true, gain: 1.0 },
                TreeNode::Leaf { weight: 0.0, cover: 1.0 },
                TreeNode::Leaf { weight: 1.0, cover: 1.0 },
            ],
        };
        TreeEnsemble { trees: vec![tree], base_margin: 0.0, kind: EnsembleKind::Boosted, learning_rate: 1.0, n_features: 3 }
    }

    #[test]
    fn stump_example() {
        let e = stump();
        let x = [0.9, 0.0, 0.0];
        let a = tree_shap(&e, &x, &[true; 3]).unwrap();
        assert_eq!(a.phi, vec![0.5, 0.0, 0.0]);
        assert_eq!(a.base_value, 0.5);
        assert_eq!(shap_brute_force(&e, &x, &[true; 3]).unwrap(), a);
    }

    #[test]
    fn empty_ensemble() {
        let e = TreeEnsemble { trees: vec![], base_margin: -1.5, kind: EnsembleKind::Boosted, learning_rate: 0.1, n_features: 2 };
        let a = tree_shap(&e, &[0.0, 0.0], &[true, true]).unwrap();
        assert_eq!((a.phi, a.base_value), (vec![0.0, 0.0], -1.5));
    }

    #[test]
    fn duplicated_trees_double() {
        let mut e = stump();
        let one = tree_shap(&e, &[0.2, 0.0, 0.0], &[true; 3]).unwrap();
        e.trees.push(e.trees[0].clone());
        let two = tree_shap(&e, &[0.2, 0.0, 0.0], &[true; 3]).unwrap();
        assert_eq!(two.phi[0], 2.0 * one.phi[0]);
    }

    #[test]
    fn repeated_feature_on_path() {
        // x0 split twice on the same path exercises unwinding
        let tree = Tree {
            nodes: vec![
                TreeNode::Split { feature: 0, threshold: 0.5, left: 1, right: 2, cover: 10.0, missing_goes_left: true, gain: 1.0 },
                TreeNode::Split { feature: 1, threshold: 0.5, left: 3, right: 4, cover: 6.0, missing_goes_left: true, gain: 1.0 },
                TreeNode::Leaf { weight: 3.0, cover: 4.0 },
                TreeNode::Split { feature: 0, threshold: 0.2, left: 5, right: 6, cover: 2.0, missing_goes_left: true, gain: 1.0 },
                TreeNode::Leaf { weight: -1.0, cover: 4.0 },
                TreeNode::Leaf { weight: 0.5, cover: 1.0 },
                TreeNode::Leaf { weight: 2.0, cover: 1.0 },
            ],
        };
        let e = TreeEnsemble { trees: vec![tree], base_margin: 0.3, kind: EnsembleKind::Boosted, learning_rate: 0.7, n_features: 2 };
        for x in [[0.1, 0.1], [0.3, 0.2], [0.9, 0.9], [0.3, 0.7]] {
            let a = tree_shap(&e, &x, &[true, true]).unwrap();
            let b = shap_brute_force(&e, &x, &[true, true]).unwrap();
            for j in 0..2 {
                assert!((a.phi[j] - b.phi[j]).abs() < 1e-12);
            }
            assert!((a.total() - e.margin(&x, &[true, true])).abs() < 1e-12);
        }
    }

    #[test]
    fn summary_order() {
        let names = vec!["a".to_string(), "b".to_string()];
        let attrs = vec![ShapAttribution { phi: vec![0.1, -0.4], base_value: 0.0 }];
        let rows = shap_summary_rows(&names, &["i0".to_string()], &[vec![0.3, 0.6]], &attrs);
        assert_eq!(rows[0].feature, "b");
        assert_eq!(rows[0].feature_value, 0.6);
        assert_eq!(rows.len(), 2);
    }

    #[test]
    fn brute_force_limit() {
        let e = TreeEnsemble { trees: vec![], base_margin: 0.0, kind: EnsembleKind::Boosted, learning_rate: 0.1, n_features: 13 };
        assert_eq!(shap_brute_force(&e, &[0.0; 13], &[true; 13]), Err(Error::TooManyFeatures(13)));
    }
}
