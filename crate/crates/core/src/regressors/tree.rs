//! Binary regression trees and the depth-first builders shared by the
//! forests and the boosters.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl RegressionTree {
    pub fn predict_row(&self, x: &DMatrix<f64>, row: usize) -> f64 {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    id = if x[(row, feature)] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows()).map(|i| self.predict_row(x, i)).collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value } => Some(*value),
            _ => None,
        })
    }

    pub fn single_leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
            max_depth: Some(0),
            min_samples_leaf: 1,
        }
    }
}

/// Split scoring. Targets are summed per side; a split is kept only when
/// its score is strictly positive.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Criterion {
    /// `|S|·Δ(S, f, θ)`: parent minus weighted child variances, scaled by
    /// the node size. Leaf value is the target mean.
    Variance,
    /// Targets are gradients `g` with unit hessians. Gain is
    /// `½[G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)] − γ`; leaf is `−G/(H+λ)`.
    SecondOrder { lambda: f64, gamma: f64 },
}

impl Criterion {
    pub(crate) fn leaf_value(self, sum: f64, count: usize) -> f64 {
        match self {
            Criterion::Variance => sum / count as f64,
            Criterion::SecondOrder { lambda, .. } => -sum / (count as f64 + lambda),
        }
    }

    pub(crate) fn score(self, sum_l: f64, n_l: usize, sum: f64, n: usize) -> f64 {
        let sum_r = sum - sum_l;
        let n_r = n - n_l;
        match self {
            Criterion::Variance => {
                sum_l * sum_l / n_l as f64 + sum_r * sum_r / n_r as f64 - sum * sum / n as f64
            }
            Criterion::SecondOrder { lambda, gamma } => {
                0.5 * (sum_l * sum_l / (n_l as f64 + lambda) + sum_r * sum_r / (n_r as f64 + lambda)
                    - sum * sum / (n as f64 + lambda))
                    - gamma
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Thresholds {
    /// Every midpoint between consecutive distinct values in the node.
    Exhaustive,
    /// One uniform draw in `(min, max)` of the node sample per feature.
    RandomUniform,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct GrowParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features examined per node; `None` means all of them.
    pub max_features: Option<usize>,
    pub thresholds: Thresholds,
    pub criterion: Criterion,
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

fn better(best: &Option<Candidate>, score: f64) -> bool {
    score > 0.0 && best.is_none_or(|b| score > b.score)
}

fn best_exhaustive(
    x: &DMatrix<f64>,
    targets: &[f64],
    rows: &[usize],
    feature: usize,
    params: &GrowParams,
    sum: f64,
    best: &mut Option<Candidate>,
) -> bool {
    let mut pairs: Vec<(f64, f64)> = rows.iter().map(|&i| (x[(i, feature)], targets[i])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pairs.len();
    if pairs[0].0 >= pairs[n - 1].0 {
        return false;
    }
    let min_leaf = params.min_samples_leaf.max(1);
    let mut sum_l = 0.0;
    for k in 1..n {
        sum_l += pairs[k - 1].1;
        if k < min_leaf || n - k < min_leaf {
            continue;
        }
        let (lo, hi) = (pairs[k - 1].0, pairs[k].0);
        if lo >= hi {
            continue;
        }
        let threshold = 0.5 * (lo + hi);
        if threshold <= lo || threshold >= hi {
            continue;
        }
        let score = params.criterion.score(sum_l, k, sum, n);
        if better(best, score) {
            *best = Some(Candidate { feature, threshold, score });
        }
    }
    true
}

fn best_random(
    x: &DMatrix<f64>,
    targets: &[f64],
    rows: &[usize],
    feature: usize,
    params: &GrowParams,
    sum: f64,
    rng: &mut ChaCha8Rng,
    best: &mut Option<Candidate>,
) -> bool {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &i in rows {
        let v = x[(i, feature)];
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo >= hi {
        return false;
    }
    let threshold = loop {
        let t = rng.random_range(lo..hi);
        if t > lo {
            break t;
        }
    };
    let (mut sum_l, mut n_l) = (0.0, 0usize);
    for &i in rows {
        if x[(i, feature)] <= threshold {
            sum_l += targets[i];
            n_l += 1;
        }
    }
    let n = rows.len();
    let min_leaf = params.min_samples_leaf.max(1);
    if n_l >= min_leaf && n - n_l >= min_leaf {
        let score = params.criterion.score(sum_l, n_l, sum, n);
        if better(best, score) {
            *best = Some(Candidate { feature, threshold, score });
        }
    }
    true
}

/// Grows a tree on `rows` of `x` against `targets` (indexed by row id).
/// Ties between equal scores keep the lowest feature index, then the
/// lowest threshold.
pub(crate) fn grow(
    x: &DMatrix<f64>,
    targets: &[f64],
    rows: &[usize],
    params: &GrowParams,
    rng: &mut ChaCha8Rng,
) -> RegressionTree {
    let p = x.ncols();
    let mut nodes = Vec::new();
    // (node id, rows, depth)
    let mut stack: Vec<(usize, Vec<usize>, usize)> = Vec::new();
    nodes.push(Node::Leaf { value: 0.0 });
    stack.push((0, rows.to_vec(), 0));

    while let Some((id, node_rows, depth)) = stack.pop() {
        let sum: f64 = node_rows.iter().map(|&i| targets[i]).sum();
        let leaf = Node::Leaf { value: params.criterion.leaf_value(sum, node_rows.len()) };
        let depth_ok = params.max_depth.is_none_or(|d| depth < d);
        let pure = matches!(params.criterion, Criterion::Variance)
            && node_rows.iter().all(|&i| targets[i] == targets[node_rows[0]]);
        if !depth_ok || pure || node_rows.len() < 2 * params.min_samples_leaf.max(1) {
            nodes[id] = leaf;
            continue;
        }

        let mut features: Vec<usize> = match params.max_features {
            Some(m) if m < p => sample(rng, p, m).into_vec(),
            _ => (0..p).collect(),
        };
        features.sort_unstable();

        let mut best = None;
        let mut any_range = false;
        for &f in &features {
            any_range |= match params.thresholds {
                Thresholds::Exhaustive => best_exhaustive(x, targets, &node_rows, f, params, sum, &mut best),
                Thresholds::RandomUniform => best_random(x, targets, &node_rows, f, params, sum, rng, &mut best),
            };
        }
        let Some(split) = best.filter(|_| any_range) else {
            nodes[id] = leaf;
            continue;
        };

        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            node_rows.iter().partition(|&&i| x[(i, split.feature)] <= split.threshold);
        let left = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        let right = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        // Right pushed first so the left subtree is expanded first.
        stack.push((right, right_rows, depth + 1));
        stack.push((left, left_rows, depth + 1));
    }

    RegressionTree {
        nodes,
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
    }
}

/// Variance reduction `Var(S) − |S_L|/|S|·Var(S_L) − |S_R|/|S|·Var(S_R)`
/// with population variances, computed directly from the three samples.
pub fn variance_reduction(parent: &[f64], left: &[f64], right: &[f64]) -> f64 {
    fn var(xs: &[f64]) -> f64 {
        if xs.is_empty() {
            return 0.0;
        }
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64
    }
    let n = parent.len() as f64;
    var(parent) - left.len() as f64 / n * var(left) - right.len() as f64 / n * var(right)
}

/// Asserts the structural invariant: each split threshold lies strictly
/// inside the range of its feature over the rows reaching that node.
pub fn thresholds_strictly_inside(tree: &RegressionTree, x: &DMatrix<f64>, rows: &[usize]) -> bool {
    fn walk(tree: &RegressionTree, x: &DMatrix<f64>, id: usize, rows: &[usize]) -> bool {
        match tree.nodes[id] {
            Node::Leaf { value } => value.is_finite(),
            Node::Split { feature, threshold, left, right } => {
                let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    (lo.min(x[(i, feature)]), hi.max(x[(i, feature)]))
                });
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[(i, feature)] <= threshold);
                lo < threshold && threshold < hi && walk(tree, x, left, &l) && walk(tree, x, right, &r)
            }
        }
    }
    walk(tree, x, 0, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    fn cart(max_depth: Option<usize>, min_leaf: usize) -> GrowParams {
        GrowParams {
            max_depth,
            min_samples_leaf: min_leaf,
            max_features: None,
            thresholds: Thresholds::Exhaustive,
            criterion: Criterion::Variance,
        }
    }

    #[test]
    fn hand_variance_reduction() {
        // Var{1,2,3,4} = 1.25, Var{1,2} = Var{3,4} = 0.25.
        let d = variance_reduction(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0], &[3.0, 4.0]);
        assert!((d - 1.0).abs() < 1e-15);
        // The scaled criterion agrees: |S|·Δ = 4.
        let s = Criterion::Variance.score(3.0, 2, 10.0, 4);
        assert!((s - 4.0).abs() < 1e-12);
    }

    #[test]
    fn pure_node_is_leaf() {
        let x = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let y = [2.5; 4];
        let mut rng = stats::rng(0);
        for thresholds in [Thresholds::Exhaustive, Thresholds::RandomUniform] {
            let params = GrowParams { thresholds, ..cart(None, 1) };
            let tree = grow(&x, &y, &[0, 1, 2, 3], &params, &mut rng);
            assert_eq!(tree.nodes.len(), 1);
            assert_eq!(tree.predict(&x), vec![2.5; 4]);
        }
    }

    #[test]
    fn interpolates_distinct_rows() {
        let mut rng = stats::rng(5);
        let x = DMatrix::from_fn(30, 3, |_, _| rng.random::<f64>());
        let y: Vec<f64> = (0..30).map(|_| rng.random::<f64>()).collect();
        let rows: Vec<usize> = (0..30).collect();
        for thresholds in [Thresholds::Exhaustive, Thresholds::RandomUniform] {
            let params = GrowParams { thresholds, max_features: Some(2), ..cart(None, 1) };
            let tree = grow(&x, &y, &rows, &params, &mut rng);
            for (p, t) in tree.predict(&x).iter().zip(&y) {
                assert!((p - t).abs() < 1e-12);
            }
            assert!(thresholds_strictly_inside(&tree, &x, &rows));
        }
    }

    #[test]
    fn depth_and_leaf_size_limits() {
        let mut rng = stats::rng(6);
        let x = DMatrix::from_fn(64, 2, |_, _| rng.random::<f64>());
        let y: Vec<f64> = (0..64).map(|i| x[(i, 0)] * 3.0 + x[(i, 1)]).collect();
        let rows: Vec<usize> = (0..64).collect();
        let tree = grow(&x, &y, &rows, &cart(Some(3), 5), &mut rng);
        assert!(tree.depth() <= 3);
        assert!(tree.n_leaves() <= 8);
        // Every leaf holds at least 5 rows.
        let mut counts = std::collections::HashMap::new();
        for i in 0..64 {
            let mut id = 0;
            while let Node::Split { feature, threshold, left, right } = tree.nodes[id] {
                id = if x[(i, feature)] <= threshold { left } else { right };
            }
            *counts.entry(id).or_insert(0) += 1;
        }
        assert!(counts.values().all(|&c| c >= 5));
    }

    #[test]
    fn second_order_root_leaf_values() {
        // Residuals {1,1,3,3}: g = -r, so w* = 8 / (4 + λ).
        let x = DMatrix::from_column_slice(4, 1, &[1.0, 1.0, 1.0, 1.0]);
        let g = [-1.0, -1.0, -3.0, -3.0];
        let mut rng = stats::rng(0);
        let params = |lambda| GrowParams {
            criterion: Criterion::SecondOrder { lambda, gamma: 0.0 },
            ..cart(None, 1)
        };
        let tree = grow(&x, &g, &[0, 1, 2, 3], &params(4.0), &mut rng);
        assert_eq!(tree.predict_row(&x, 0), 1.0);
        let tree = grow(&x, &g, &[0, 1, 2, 3], &params(0.0), &mut rng);
        assert_eq!(tree.predict_row(&x, 0), 2.0);
    }

    #[test]
    fn large_gamma_blocks_every_split() {
        let mut rng = stats::rng(7);
        let x = DMatrix::from_fn(40, 2, |_, _| rng.random::<f64>());
        let g: Vec<f64> = (0..40).map(|i| x[(i, 0)] - 0.5).collect();
        let params = GrowParams {
            criterion: Criterion::SecondOrder { lambda: 1.0, gamma: 1e6 },
            ..cart(None, 1)
        };
        let tree = grow(&x, &g, &(0..40).collect::<Vec<_>>(), &params, &mut rng);
        assert_eq!(tree.nodes.len(), 1);
    }
}
