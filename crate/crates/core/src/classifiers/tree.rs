//! Binary split trees shared by the decision tree, random forest and
//! gradient boosting learners.
//!
//! Bag-of-words columns are mostly zeros, so each feature keeps only its
//! nonzero entries pre-sorted by value. A node scan walks those entries once
//! and treats the node's zero-valued rows as one aggregated block, which
//! makes split search cost proportional to the nonzeros instead of `n * d`.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{ClassifierError, Criterion};
use crate::corpus::Label;
use crate::linalg::Matrix;
use crate::seed::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize, samples: f64 },
    /// For classification trees `value` is the flaky fraction; for boosting
    /// trees it is the unscaled Newton step.
    Leaf { value: f64, samples: f64 },
}

/// Arena of nodes; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_for(&self, row: &[f64]) -> &Node {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split { feature, threshold, left, right, .. } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
                leaf => return leaf,
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.leaf_for(row) {
            Node::Leaf { value, .. } => *value,
            Node::Split { .. } => unreachable!(),
        }
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, at: usize) -> usize {
            match t.nodes[at] {
                Node::Split { left, right, .. } => 1 + walk(t, left).max(walk(t, right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(self, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value, samples } => Some((*value, *samples)),
            Node::Split { .. } => None,
        })
    }

    pub fn splits(&self) -> impl Iterator<Item = &Node> + '_ {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. }))
    }
}

/// Per-feature nonzero entries sorted by `(value, row)`.
pub(crate) struct ColumnIndex {
    cols: Vec<Vec<(f64, u32)>>,
}

impl ColumnIndex {
    pub(crate) fn new(x: &Matrix) -> Self {
        let mut cols = vec![Vec::new(); x.cols()];
        for (r, row) in x.iter_rows().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    cols[j].push((v, r as u32));
                }
            }
        }
        for c in &mut cols {
            c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        Self { cols }
    }

    pub(crate) fn n_features(&self) -> usize {
        self.cols.len()
    }
}

pub(crate) trait SplitStats: Copy + Default {
    fn add(&mut self, other: &Self);
    fn minus(&self, other: &Self) -> Self;
}

pub(crate) struct FeatureScan {
    /// `(gain, threshold)` of the best admissible split on this feature.
    pub best: Option<(f64, f64)>,
    pub constant: bool,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let t = a / 2.0 + b / 2.0;
    if t >= b || !t.is_finite() {
        a
    } else {
        t
    }
}

pub(crate) struct NodeView<'a, S> {
    pub in_node: &'a [bool],
    pub n_rows: usize,
    pub total: S,
    pub row_stats: &'a [S],
}

/// Evaluates every midpoint between consecutive distinct values of one
/// feature within a node. Ties keep the lower threshold.
pub(crate) fn scan_feature<S: SplitStats>(
    column: &[(f64, u32)],
    node: &NodeView<'_, S>,
    gain: &impl Fn(&S, &S) -> Option<f64>,
) -> FeatureScan {
    let mut present: Vec<(f64, usize)> = Vec::new();
    let mut nz_total = S::default();
    for &(v, r) in column {
        let r = r as usize;
        if node.in_node[r] {
            present.push((v, r));
            nz_total.add(&node.row_stats[r]);
        }
    }
    let zero_rows = node.n_rows - present.len();
    let zero_stats = node.total.minus(&nz_total);
    let split_at = present.partition_point(|&(v, _)| v < 0.0);

    let mut left = S::default();
    let mut prev: Option<f64> = None;
    let mut best: Option<(f64, f64)> = None;
    let mut groups = 0usize;
    let mut visit = |value: f64, stats: &S, left: &mut S| {
        if let Some(p) = prev {
            if value != p {
                let right = node.total.minus(left);
                if let Some(g) = gain(left, &right) {
                    if best.is_none_or(|(bg, _)| g > bg) {
                        best = Some((g, midpoint(p, value)));
                    }
                }
                groups += 1;
            }
        } else {
            groups = 1;
        }
        left.add(stats);
        prev = Some(value);
    };
    for &(v, r) in &present[..split_at] {
        visit(v, &node.row_stats[r], &mut left);
    }
    if zero_rows > 0 {
        visit(0.0, &zero_stats, &mut left);
    }
    for &(v, r) in &present[split_at..] {
        visit(v, &node.row_stats[r], &mut left);
    }
    FeatureScan { best, constant: groups <= 1 }
}

/// Learner-specific pieces of tree growth.
pub(crate) trait Grower {
    type Stats: SplitStats;
    fn leaf_value(&self, total: &Self::Stats) -> f64;
    fn samples(&self, total: &Self::Stats) -> f64;
    fn is_terminal(&self, total: &Self::Stats, depth: usize) -> bool;
    fn split_gain(&self, parent: &Self::Stats, left: &Self::Stats, right: &Self::Stats) -> Option<f64>;
}

/// Which features a node may split on.
pub(crate) enum FeatureSampler<'a> {
    All,
    /// Visit features in random order until `max_features` non-constant
    /// ones have been evaluated (or all features are exhausted).
    Random { max_features: usize, rng: &'a mut Rng },
}

struct Builder<'a, G: Grower> {
    grower: &'a G,
    x: &'a Matrix,
    index: &'a ColumnIndex,
    row_stats: &'a [G::Stats],
    in_node: Vec<bool>,
    nodes: Vec<Node>,
}

pub(crate) fn grow<G: Grower>(
    grower: &G,
    x: &Matrix,
    index: &ColumnIndex,
    row_stats: &[G::Stats],
    rows: Vec<usize>,
    sampler: &mut FeatureSampler<'_>,
) -> Tree {
    let mut b = Builder { grower, x, index, row_stats, in_node: vec![false; x.rows()], nodes: Vec::new() };
    b.build(rows, 0, sampler);
    Tree { nodes: b.nodes }
}

impl<G: Grower> Builder<'_, G> {
    fn build(&mut self, rows: Vec<usize>, depth: usize, sampler: &mut FeatureSampler<'_>) -> usize {
        let mut total = G::Stats::default();
        for &r in &rows {
            total.add(&self.row_stats[r]);
        }
        let id = self.nodes.len();
        let samples = self.grower.samples(&total);
        self.nodes.push(Node::Leaf { value: self.grower.leaf_value(&total), samples });
        if self.grower.is_terminal(&total, depth) {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&rows, total, sampler) else {
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| self.x.get(r, feature) <= threshold);
        let left = self.build(left_rows, depth + 1, sampler);
        let right = self.build(right_rows, depth + 1, sampler);
        self.nodes[id] = Node::Split { feature, threshold, left, right, samples };
        id
    }

    fn best_split(&mut self, rows: &[usize], total: G::Stats, sampler: &mut FeatureSampler<'_>) -> Option<(usize, f64)> {
        for &r in rows {
            self.in_node[r] = true;
        }
        let node = NodeView { in_node: &self.in_node, n_rows: rows.len(), total, row_stats: self.row_stats };
        let gain = |l: &G::Stats, r: &G::Stats| self.grower.split_gain(&total, l, r);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut consider = |j: usize, scan: &FeatureScan| {
            if let Some((g, t)) = scan.best {
                let better = match best {
                    None => true,
                    Some((bg, bj, bt)) => g > bg || (g == bg && (j, t) < (bj, bt)),
                };
                if better {
                    best = Some((g, j, t));
                }
            }
        };
        let d = self.index.n_features();
        match sampler {
            FeatureSampler::All => {
                for j in 0..d {
                    let scan = scan_feature(&self.index.cols[j], &node, &gain);
                    consider(j, &scan);
                }
            }
            FeatureSampler::Random { max_features, rng } => {
                // partial Fisher-Yates over feature ids
                let mut order: Vec<usize> = (0..d).collect();
                let mut informative = 0;
                for pos in 0..d {
                    if informative >= *max_features {
                        break;
                    }
                    let pick = rng.random_range(pos..d);
                    order.swap(pos, pick);
                    let j = order[pos];
                    let scan = scan_feature(&self.index.cols[j], &node, &gain);
                    if !scan.constant {
                        informative += 1;
                    }
                    consider(j, &scan);
                }
            }
        }
        for &r in rows {
            self.in_node[r] = false;
        }
        best.map(|(_, j, t)| (j, t))
    }
}

/// Weighted class counts.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct ClassStats {
    pub flaky: f64,
    pub nonflaky: f64,
}

impl ClassStats {
    pub(crate) fn of(label: Label, weight: f64) -> Self {
        if label.is_flaky() {
            ClassStats { flaky: weight, nonflaky: 0.0 }
        } else {
            ClassStats { flaky: 0.0, nonflaky: weight }
        }
    }

    pub(crate) fn total(&self) -> f64 {
        self.flaky + self.nonflaky
    }
}

impl SplitStats for ClassStats {
    fn add(&mut self, o: &Self) {
        self.flaky += o.flaky;
        self.nonflaky += o.nonflaky;
    }

    fn minus(&self, o: &Self) -> Self {
        ClassStats { flaky: self.flaky - o.flaky, nonflaky: self.nonflaky - o.nonflaky }
    }
}

/// Impurity of a weighted two-class distribution.
pub(crate) fn class_impurity(stats: &ClassStats, criterion: Criterion) -> f64 {
    let total = stats.total();
    if total <= 0.0 {
        return 0.0;
    }
    let ps = [stats.flaky / total, stats.nonflaky / total];
    match criterion {
        Criterion::Entropy => -ps.iter().filter(|&&p| p > 0.0).map(|p| p * p.log2()).sum::<f64>(),
        Criterion::Gini => 1.0 - ps.iter().map(|p| p * p).sum::<f64>(),
    }
}

/// Impurity of a label multiset.
pub fn impurity(labels: &[Label], criterion: Criterion) -> Result<f64, ClassifierError> {
    if labels.is_empty() {
        return Err(ClassifierError::EmptySet);
    }
    let mut stats = ClassStats::default();
    for &l in labels {
        stats.add(&ClassStats::of(l, 1.0));
    }
    Ok(class_impurity(&stats, criterion))
}

/// CART-style growth for classification trees.
pub(crate) struct ClassGrower {
    pub criterion: Criterion,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Grower for ClassGrower {
    type Stats = ClassStats;

    fn leaf_value(&self, total: &ClassStats) -> f64 {
        if total.total() > 0.0 {
            total.flaky / total.total()
        } else {
            0.0
        }
    }

    fn samples(&self, total: &ClassStats) -> f64 {
        total.total()
    }

    fn is_terminal(&self, total: &ClassStats, depth: usize) -> bool {
        depth >= self.max_depth
            || total.flaky == 0.0
            || total.nonflaky == 0.0
            || total.total() < self.min_samples_split as f64
    }

    fn split_gain(&self, parent: &ClassStats, left: &ClassStats, right: &ClassStats) -> Option<f64> {
        let min_leaf = self.min_samples_leaf as f64;
        if left.total() < min_leaf || right.total() < min_leaf {
            return None;
        }
        let w = parent.total();
        let gain = class_impurity(parent, self.criterion)
            - left.total() / w * class_impurity(left, self.criterion)
            - right.total() / w * class_impurity(right, self.criterion);
        (gain > 1e-12).then_some(gain)
    }
}

/// Trains a classification tree on rows with the given multiplicities
/// (rows with zero weight are excluded).
pub(crate) fn fit_class_tree(
    x: &Matrix,
    index: &ColumnIndex,
    y: &[Label],
    weights: &[f64],
    grower: &ClassGrower,
    sampler: &mut FeatureSampler<'_>,
) -> Tree {
    let stats: Vec<ClassStats> = y.iter().zip(weights).map(|(&l, &w)| ClassStats::of(l, w)).collect();
    let rows: Vec<usize> = (0..y.len()).filter(|&i| weights[i] > 0.0).collect();
    grow(grower, x, index, &stats, rows, sampler)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Flaky as F, NonFlaky as N};

    fn grower(max_depth: usize, min_split: usize, min_leaf: usize) -> ClassGrower {
        ClassGrower { criterion: Criterion::Entropy, max_depth, min_samples_split: min_split, min_samples_leaf: min_leaf }
    }

    fn fit(x: &Matrix, y: &[Label], g: &ClassGrower) -> Tree {
        let index = ColumnIndex::new(x);
        fit_class_tree(x, &index, y, &vec![1.0; y.len()], g, &mut FeatureSampler::All)
    }

    #[test]
    fn impurity_values() {
        assert_eq!(impurity(&[F, F, N, N], Criterion::Entropy).unwrap(), 1.0);
        assert_eq!(impurity(&[F, F, F, F], Criterion::Entropy).unwrap(), 0.0);
        assert_eq!(impurity(&[F, F, F, F], Criterion::Gini).unwrap(), 0.0);
        let e = impurity(&[F, F, F, N], Criterion::Entropy).unwrap();
        let oracle = -(0.75f64 * 0.75f64.log2() + 0.25 * 0.25f64.log2());
        assert!((e - 0.811278).abs() < 1e-6 && (e - oracle).abs() < 1e-15);
        assert_eq!(impurity(&[F, N], Criterion::Gini).unwrap(), 0.5);
        assert_eq!(impurity(&[], Criterion::Gini), Err(ClassifierError::EmptySet));
    }

    #[test]
    fn separable_line_splits_once() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [10.0], [11.0]]).unwrap();
        let y = [N, N, F, F];
        let t = fit(&x, &y, &grower(10, 2, 1));
        assert_eq!(t.depth(), 1);
        match &t.nodes[0] {
            Node::Split { threshold, .. } => assert!(*threshold > 1.0 && *threshold < 10.0),
            Node::Leaf { .. } => panic!("expected split"),
        }
        for (row, label) in x.iter_rows().zip(y) {
            assert_eq!(t.predict_row(row), if label.is_flaky() { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn zero_block_and_negative_values() {
        // zeros sit between negatives and positives in the sorted walk
        let x = Matrix::from_rows(&[[-2.0], [-1.0], [0.0], [0.0], [3.0], [4.0]]).unwrap();
        let y = [F, F, N, N, F, F];
        let t = fit(&x, &y, &grower(5, 2, 1));
        for (row, label) in x.iter_rows().zip(y) {
            assert_eq!(t.predict_row(row), if label.is_flaky() { 1.0 } else { 0.0 });
        }
        assert_eq!(t.depth(), 2);
    }

    #[test]
    fn stopping_rules() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let t = fit(&x, &[F, F, F, F], &grower(10, 2, 1));
        assert_eq!(t.nodes.len(), 1);
        let t = fit(&x, &[F, N, F, N], &grower(0, 2, 1));
        assert_eq!(t.nodes, vec![Node::Leaf { value: 0.5, samples: 4.0 }]);
        // min_samples_split above node size
        let t = fit(&x, &[F, F, N, N], &grower(10, 5, 1));
        assert_eq!(t.nodes.len(), 1);
        // min_samples_leaf=3 forbids every split of 4 rows
        let t = fit(&x, &[F, F, N, N], &grower(10, 2, 3));
        assert_eq!(t.nodes.len(), 1);
    }

    #[test]
    fn ties_prefer_lower_feature() {
        // both features separate perfectly
        let x = Matrix::from_rows(&[[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]]).unwrap();
        let t = fit(&x, &[N, N, F, F], &grower(3, 2, 1));
        assert!(matches!(t.nodes[0], Node::Split { feature: 0, threshold, .. } if threshold == 0.5));
    }

    #[test]
    fn weights_act_as_multiplicity() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let index = ColumnIndex::new(&x);
        let t = fit_class_tree(&x, &index, &[F, N, N], &[3.0, 0.0, 1.0], &grower(0, 2, 1), &mut FeatureSampler::All);
        assert_eq!(t.nodes, vec![Node::Leaf { value: 0.75, samples: 4.0 }]);
    }
}
