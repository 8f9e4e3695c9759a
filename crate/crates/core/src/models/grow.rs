//! Exact greedy tree growth shared by boosting and random forests.
//!
//! Columns are sorted once per training run; split search scans each sorted
//! column once per level (depthwise) or once per pair of new leaves
//! (leafwise), routing rows to their current node through `node_of`.

use alloc::vec;
use alloc::vec::Vec;

use crate::models::tree::{Tree, TreeNode};
use crate::preprocess::FeatureMatrix;

const NONE: u32 = u32::MAX;

/// Split objective. `Stats` are additive per-row sufficient statistics.
pub(crate) trait Criterion {
    type Stats: Copy + Default;

    fn row_stats(&self, row: usize) -> Self::Stats;
    fn add(acc: &mut Self::Stats, s: &Self::Stats);
    fn sub(a: &Self::Stats, b: &Self::Stats) -> Self::Stats;
    /// Gain of an admissible split, `None` when the split is rejected.
    fn split_gain(&self, parent: &Self::Stats, left: &Self::Stats, right: &Self::Stats) -> Option<f64>;
    fn splittable(&self, s: &Self::Stats) -> bool;
    fn leaf_weight(&self, s: &Self::Stats) -> f64;
    fn cover(&self, s: &Self::Stats) -> f64;
}

/// Observed `(row, value)` pairs per column in ascending value order (ties by
/// row index), plus the rows where the column is missing.
#[derive(Debug, Clone)]
pub(crate) struct SortedColumns {
    cols: Vec<Vec<(u32, f64)>>,
    missing: Vec<Vec<u32>>,
}

impl SortedColumns {
    pub fn new(x: &FeatureMatrix) -> Self {
        let (n, p) = (x.n_rows(), x.n_features());
        let mut cols = Vec::with_capacity(p);
        let mut missing = Vec::with_capacity(p);
        for f in 0..p {
            let mut col = Vec::with_capacity(n);
            let mut miss = Vec::new();
            for r in 0..n {
                if x.observed(r, f) {
                    col.push((r as u32, x.value(r, f)));
                } else {
                    miss.push(r as u32);
                }
            }
            col.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            cols.push(col);
            missing.push(miss);
        }
        Self { cols, missing }
    }

    pub fn restrict(&self, keep: &[bool]) -> Self {
        Self {
            cols: self.cols.iter().map(|c| c.iter().copied().filter(|&(r, _)| keep[r as usize]).collect()).collect(),
            missing: self.missing.iter().map(|m| m.iter().copied().filter(|&r| keep[r as usize]).collect()).collect(),
        }
    }

    fn retain_active(&mut self, node_of: &[u32]) {
        for c in &mut self.cols {
            c.retain(|&(r, _)| node_of[r as usize] != NONE);
        }
        for m in &mut self.missing {
            m.retain(|&r| node_of[r as usize] != NONE);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Growth {
    Depthwise,
    Leafwise { max_leaves: usize },
}

#[derive(Clone, Copy)]
struct Candidate<S> {
    feature: usize,
    threshold: f64,
    gain: f64,
    _left: S,
}

struct Grower<'a, C: Criterion> {
    crit: &'a C,
    x: &'a FeatureMatrix,
    nodes: Vec<TreeNode>,
    stats: Vec<C::Stats>,
    depth: Vec<usize>,
    node_of: Vec<u32>,
    slot: Vec<u32>,
}

impl<C: Criterion> Grower<'_, C> {
    fn new_node(&mut self, depth: usize) -> usize {
        self.nodes.push(TreeNode::Leaf { weight: 0.0, cover: 0.0 });
        self.stats.push(C::Stats::default());
        self.depth.push(depth);
        self.slot.push(NONE);
        self.nodes.len() - 1
    }

    /// Best split per target node; each target only considers the features
    /// it ranks. Equal gains go to the lower-ranked feature, then to the
    /// lower threshold.
    fn find_splits(&mut self, sorted: &SortedColumns, targets: &[usize], ranks: &[Vec<u32>]) -> Vec<Option<Candidate<C::Stats>>> {
        let t_n = targets.len();
        let mut best: Vec<Option<Candidate<C::Stats>>> = vec![None; t_n];
        for (t, &node) in targets.iter().enumerate() {
            self.slot[node] = t as u32;
        }
        let mut left = vec![C::Stats::default(); t_n];
        let mut last = vec![f64::NAN; t_n];
        for f in 0..self.x.n_features() {
            if ranks.iter().all(|m| m[f] == UNRANKED) {
                continue;
            }
            left.iter_mut().for_each(|s| *s = C::Stats::default());
            last.iter_mut().for_each(|v| *v = f64::NAN);
            for &r in &sorted.missing[f] {
                let node = self.node_of[r as usize];
                if node == NONE {
                    continue;
                }
                let t = self.slot[node as usize];
                if t != NONE && ranks[t as usize][f] != UNRANKED {
                    C::add(&mut left[t as usize], &self.crit.row_stats(r as usize));
                }
            }
            for &(r, v) in &sorted.cols[f] {
                let node = self.node_of[r as usize];
                if node == NONE {
                    continue;
                }
                let t = self.slot[node as usize];
                if t == NONE || ranks[t as usize][f] == UNRANKED {
                    continue;
                }
                let t = t as usize;
                let lv = last[t];
                if !lv.is_nan() && v > lv {
                    let parent = &self.stats[node as usize];
                    let right = C::sub(parent, &left[t]);
                    if let Some(gain) = self.crit.split_gain(parent, &left[t], &right) {
                        let rank = &ranks[t];
                        if best[t].as_ref().is_none_or(|b| gain > b.gain || (gain == b.gain && rank[f] < rank[b.feature])) {
                            let mut threshold = lv + (v - lv) * 0.5;
                            if !(threshold > lv) {
                                threshold = v;
                            }
                            best[t] = Some(Candidate { feature: f, threshold, gain, _left: left[t] });
                        }
                    }
                }
                C::add(&mut left[t], &self.crit.row_stats(r as usize));
                last[t] = v;
            }
        }
        for &node in targets {
            self.slot[node] = NONE;
        }
        best
    }

    /// Turn `node` into a split with two fresh children; returns their ids.
    fn split(&mut self, node: usize, c: &Candidate<C::Stats>) -> (usize, usize) {
        let d = self.depth[node] + 1;
        let l = self.new_node(d);
        let r = self.new_node(d);
        self.nodes[node] = TreeNode::Split {
            feature: c.feature,
            threshold: c.threshold,
            left: l,
            right: r,
            cover: self.crit.cover(&self.stats[node]),
            missing_goes_left: true,
            gain: c.gain,
        };
        (l, r)
    }

    /// Move rows of freshly split nodes to their children and accumulate the
    /// children's statistics in row order.
    fn route(&mut self, rows: &[u32]) {
        for &r in rows {
            let node = self.node_of[r as usize];
            if node == NONE {
                continue;
            }
            if let TreeNode::Split { feature, threshold, left, right, missing_goes_left, .. } = self.nodes[node as usize] {
                let r = r as usize;
                let go_left = if self.x.observed(r, feature) { self.x.value(r, feature) < threshold } else { missing_goes_left };
                let child = if go_left { left } else { right };
                self.node_of[r] = child as u32;
                C::add(&mut self.stats[child], &self.crit.row_stats(r));
            }
        }
    }

    fn finish(mut self) -> Tree {
        for i in 0..self.nodes.len() {
            if let TreeNode::Leaf { .. } = self.nodes[i] {
                self.nodes[i] = TreeNode::Leaf { weight: self.crit.leaf_weight(&self.stats[i]), cover: self.crit.cover(&self.stats[i]) };
            }
        }
        Tree { nodes: self.nodes }
    }
}

pub(crate) const UNRANKED: u32 = u32::MAX;

/// Index order as ranks, with columns outside `mask` excluded.
pub(crate) fn index_ranks(mask: &[bool]) -> Vec<u32> {
    mask.iter().enumerate().map(|(f, &m)| if m { f as u32 } else { UNRANKED }).collect()
}

/// Grow one tree on `rows` (indices into `x`). `sorted` must already be
/// restricted to exactly those rows. `features` is called once per node that
/// becomes a split candidate, in creation order, and returns a rank per
/// column: [`UNRANKED`] columns are excluded and lower ranks win gain ties.
pub(crate) fn grow<C, F>(
    crit: &C,
    x: &FeatureMatrix,
    mut sorted: SortedColumns,
    rows: &[u32],
    max_depth: usize,
    growth: Growth,
    mut features: F,
) -> Tree
where
    C: Criterion,
    F: FnMut() -> Vec<u32>,
{
    let mut g = Grower {
        crit,
        x,
        nodes: Vec::new(),
        stats: Vec::new(),
        depth: Vec::new(),
        node_of: vec![NONE; x.n_rows()],
        slot: Vec::new(),
    };
    let root = g.new_node(0);
    for &r in rows {
        g.node_of[r as usize] = root as u32;
        C::add(&mut g.stats[root], &crit.row_stats(r as usize));
    }
    match growth {
        Growth::Depthwise => {
            let mut frontier = vec![root];
            for _ in 0..max_depth {
                let targets: Vec<usize> = frontier.iter().copied().filter(|&n| crit.splittable(&g.stats[n])).collect();
                if targets.is_empty() {
                    break;
                }
                let ranks: Vec<Vec<u32>> = targets.iter().map(|_| features()).collect();
                let cands = g.find_splits(&sorted, &targets, &ranks);
                let mut next = Vec::new();
                for (&node, c) in targets.iter().zip(&cands) {
                    if let Some(c) = c {
                        let (l, r) = g.split(node, c);
                        next.push(l);
                        next.push(r);
                    }
                }
                if next.is_empty() {
                    break;
                }
                g.route(rows);
                // rows that stayed in an unsplit node are finished
                let mut open = vec![false; g.nodes.len()];
                for &n in &next {
                    open[n] = true;
                }
                for &r in rows {
                    let n = g.node_of[r as usize];
                    if n != NONE && !open[n as usize] {
                        g.node_of[r as usize] = NONE;
                    }
                }
                sorted.retain_active(&g.node_of);
                frontier = next;
            }
        }
        Growth::Leafwise { max_leaves } => {
            let mut cand: Vec<Option<Candidate<C::Stats>>> = vec![None];
            if max_depth > 0 && crit.splittable(&g.stats[root]) {
                let ranks = features();
                cand[root] = g.find_splits(&sorted, &[root], &[ranks])[0];
            }
            let mut leaves = 1;
            while leaves < max_leaves {
                let mut pick: Option<usize> = None;
                for (i, c) in cand.iter().enumerate() {
                    if let Some(c) = c {
                        if pick.is_none_or(|p| c.gain > cand[p].as_ref().map_or(f64::NEG_INFINITY, |b| b.gain)) {
                            pick = Some(i);
                        }
                    }
                }
                let Some(node) = pick else { break };
                let c = cand[node].take().expect("picked candidate");
                let (l, r) = g.split(node, &c);
                cand.push(None);
                cand.push(None);
                g.route(rows);
                leaves += 1;
                let targets: Vec<usize> =
                    [l, r].into_iter().filter(|&n| g.depth[n] < max_depth && crit.splittable(&g.stats[n])).collect();
                if !targets.is_empty() {
                    let ranks: Vec<Vec<u32>> = targets.iter().map(|_| features()).collect();
                    let found = g.find_splits(&sorted, &targets, &ranks);
                    for (&n, c) in targets.iter().zip(found) {
                        cand[n] = c;
                    }
                }
            }
        }
    }
    g.finish()
}
