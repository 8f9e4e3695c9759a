#![allow(dead_code)]

use panc_risk_core::cohort::{generate_synthetic, CohortSpec};
use panc_risk_core::models::tree::{EnsembleKind, Tree, TreeEnsemble, TreeNode};
use panc_risk_core::pipeline::{prepare, PipelineConfig, Prepared};
use panc_risk_core::preprocess::FeatureMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Reference synthetic cohort, excluded, split, imputed and scaled.
pub fn reference_prepared(seed: u64) -> Prepared {
    let cohort = generate_synthetic(&CohortSpec::readmission_reference(), seed).unwrap();
    prepare(&cohort, &PipelineConfig::default(), seed).unwrap()
}

pub fn matrix(rows: &[Vec<f64>], labels: &[bool]) -> FeatureMatrix {
    let p = rows.first().map_or(0, Vec::len);
    let names = (0..p).map(|j| format!("x{j}")).collect();
    FeatureMatrix::from_rows(names, rows, labels.to_vec()).unwrap()
}

fn grow(rng: &mut ChaCha8Rng, nodes: &mut Vec<TreeNode>, depth: usize, max_depth: usize, p: usize) -> usize {
    let at = nodes.len();
    if depth == max_depth || (depth > 0 && rng.random_bool(0.25)) {
        nodes.push(TreeNode::Leaf { weight: rng.random_range(-2.0..2.0), cover: rng.random_range(1.0..20.0) });
        return at;
    }
    nodes.push(TreeNode::Leaf { weight: 0.0, cover: 0.0 });
    let left = grow(rng, nodes, depth + 1, max_depth, p);
    let right = grow(rng, nodes, depth + 1, max_depth, p);
    let cover = nodes[left].cover() + nodes[right].cover();
    nodes[at] = TreeNode::Split {
        feature: rng.random_range(0..p),
        threshold: rng.random_range(0.0..1.0),
        left,
        right,
        cover,
        missing_goes_left: rng.random_bool(0.5),
        gain: 1.0,
    };
    at
}

/// Random tree with random leaf covers; internal covers are the child sums.
pub fn random_tree(rng: &mut ChaCha8Rng, max_depth: usize, p: usize) -> Tree {
    let mut nodes = Vec::new();
    grow(rng, &mut nodes, 0, max_depth, p);
    Tree { nodes }
}

pub fn random_ensemble(rng: &mut ChaCha8Rng, max_trees: usize, max_depth: usize, p: usize) -> TreeEnsemble {
    let trees = (0..rng.random_range(1..=max_trees))
        .map(|_| {
            let depth = rng.random_range(1..=max_depth);
            random_tree(rng, depth, p)
        })
        .collect();
    let kind = if rng.random_bool(0.5) { EnsembleKind::Boosted } else { EnsembleKind::Bagged };
    TreeEnsemble { trees, base_margin: rng.random_range(-1.0..1.0), kind, learning_rate: rng.random_range(0.05..1.0), n_features: p }
}

/// Pair-counting AUROC: P(s+ > s-) + P(s+ = s-)/2.
pub fn pair_count_auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0.0);
    for i in (0..scores.len()).filter(|&i| labels[i]) {
        for j in (0..scores.len()).filter(|&j| !labels[j]) {
            pairs += 1.0;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / pairs
}
