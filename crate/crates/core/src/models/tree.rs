use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math::sigmoid;
use crate::{Error, Result};

/// One node of a binary decision tree. Rows go left when the feature is
/// observed and `x < threshold`, or when it is missing and
/// `missing_goes_left` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Training samples reaching the node.
        cover: f64,
        missing_goes_left: bool,
        /// Loss reduction of the split (Gini decrease for forests, second-order
        /// gain for boosting).
        gain: f64,
    },
    Leaf {
        weight: f64,
        cover: f64,
    },
}

impl TreeNode {
    pub fn cover(&self) -> f64 {
        match *self {
            TreeNode::Split { cover, .. } | TreeNode::Leaf { cover, .. } => cover,
        }
    }
}

/// A tree stored as a node arena with the root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf(weight: f64, cover: f64) -> Self {
        Self { nodes: alloc::vec![TreeNode::Leaf { weight, cover }] }
    }

    /// Index of the leaf reached by a row.
    pub fn leaf_index(&self, x: &[f64], observed: &[bool]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { .. } => return i,
                TreeNode::Split { feature, threshold, left, right, missing_goes_left, .. } => {
                    let go_left = if observed[feature] { x[feature] < threshold } else { missing_goes_left };
                    i = if go_left { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64], observed: &[bool]) -> f64 {
        match self.nodes[self.leaf_index(x, observed)] {
            TreeNode::Leaf { weight, .. } => weight,
            TreeNode::Split { .. } => unreachable!(),
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    /// Cover-weighted mean leaf value.
    pub fn expected_value(&self) -> f64 {
        fn go(t: &Tree, i: usize) -> f64 {
            match t.nodes[i] {
                TreeNode::Leaf { weight, .. } => weight,
                TreeNode::Split { left, right, cover, .. } => {
                    (t.nodes[left].cover() * go(t, left) + t.nodes[right].cover() * go(t, right)) / cover
                }
            }
        }
        go(self, 0)
    }

    /// Every split node has positive cover equal to the sum of its children's.
    pub fn check_covers(&self) -> Result<()> {
        for (i, n) in self.nodes.iter().enumerate() {
            if let TreeNode::Split { left, right, cover, .. } = *n {
                let sum = self.nodes[left].cover() + self.nodes[right].cover();
                if !(cover > 0.0) || (cover - sum).abs() > 1e-9 * cover.max(1.0) {
                    return Err(Error::MissingCover(i));
                }
            }
        }
        Ok(())
    }

    pub fn uses_feature(&self, feature: usize) -> bool {
        self.nodes.iter().any(|n| matches!(*n, TreeNode::Split { feature: f, .. } if f == feature))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    /// Additive margin `base + eta * sum(trees)` passed through a sigmoid.
    Boosted,
    /// Mean of per-tree class fractions.
    Bagged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub trees: Vec<Tree>,
    pub base_margin: f64,
    pub kind: EnsembleKind,
    /// Boosting shrinkage; unused for bagged ensembles.
    pub learning_rate: f64,
    pub n_features: usize,
}

impl TreeEnsemble {
    /// Scale applied to each tree's output in the margin.
    pub fn tree_weight(&self) -> f64 {
        match self.kind {
            EnsembleKind::Boosted => self.learning_rate,
            EnsembleKind::Bagged if self.trees.is_empty() => 0.0,
            EnsembleKind::Bagged => 1.0 / self.trees.len() as f64,
        }
    }

    pub fn margin(&self, x: &[f64], observed: &[bool]) -> f64 {
        let w = self.tree_weight();
        self.base_margin + w * self.trees.iter().map(|t| t.predict(x, observed)).sum::<f64>()
    }

    pub fn probability(&self, x: &[f64], observed: &[bool]) -> f64 {
        let m = self.margin(x, observed);
        match self.kind {
            EnsembleKind::Boosted => sigmoid(m),
            EnsembleKind::Bagged => m.clamp(0.0, 1.0),
        }
    }

    /// Cover-weighted expected margin.
    pub fn expected_margin(&self) -> f64 {
        self.base_margin + self.tree_weight() * self.trees.iter().map(Tree::expected_value).sum::<f64>()
    }
}
