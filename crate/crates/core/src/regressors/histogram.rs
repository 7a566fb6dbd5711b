//! Histogram-based second-order boosting with leaf-wise growth.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::boosting::{boost, validate_boosting};
use super::tree::{Criterion, Node, RegressionTree};
use super::{EnsembleKind, EnsembleModel};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub n_bins: usize,
    pub max_leaves: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub subsample: f64,
    pub seed: u64,
}

impl Default for HistogramParams {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.1,
            n_bins: 255,
            max_leaves: 31,
            max_depth: None,
            min_samples_leaf: 1,
            lambda: 1.0,
            gamma: 0.0,
            subsample: 1.0,
            seed: 0,
        }
    }
}

/// Per-feature bin boundaries. Boundaries are midpoints between adjacent
/// distinct training values, so a value `v` lands in bin `#{b < v}` and
/// `bin <= k` is equivalent to `v <= boundaries[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinMapper {
    pub boundaries: Vec<Vec<f64>>,
}

impl BinMapper {
    pub fn fit(x: &DMatrix<f64>, n_bins: usize) -> Self {
        let boundaries = (0..x.ncols())
            .map(|j| {
                let mut values: Vec<f64> = x.column(j).iter().copied().collect();
                values.sort_by(|a, b| a.total_cmp(b));
                let n = values.len();
                let mut distinct: Vec<(f64, usize)> = Vec::new();
                for v in values {
                    match distinct.last_mut() {
                        Some((d, c)) if *d == v => *c += 1,
                        _ => distinct.push((v, 1)),
                    }
                }
                let mut cuts = Vec::new();
                if distinct.len() <= n_bins {
                    cuts.extend(1..distinct.len());
                } else {
                    // Cut after the distinct value where the cumulative count
                    // first reaches each k/n_bins quantile.
                    let mut cum = 0;
                    let mut k = 1;
                    for (idx, &(_, c)) in distinct.iter().enumerate().take(distinct.len() - 1) {
                        cum += c;
                        if k < n_bins && cum * n_bins >= k * n {
                            cuts.push(idx + 1);
                            while k < n_bins && cum * n_bins >= k * n {
                                k += 1;
                            }
                        }
                    }
                }
                cuts.iter()
                    .map(|&i| 0.5 * (distinct[i - 1].0 + distinct[i].0))
                    .filter(|&b| b > distinct[0].0 && b < distinct[distinct.len() - 1].0)
                    .collect::<Vec<f64>>()
            })
            .collect();
        Self { boundaries }
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.boundaries[feature].len() + 1
    }

    pub fn bin(&self, feature: usize, value: f64) -> usize {
        self.boundaries[feature].partition_point(|&b| b < value)
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> Vec<Vec<u16>> {
        (0..x.ncols())
            .map(|j| x.column(j).iter().map(|&v| self.bin(j, v) as u16).collect())
            .collect()
    }
}

#[derive(Clone, Copy, Debug)]
struct Split {
    feature: usize,
    bin: usize,
    gain: f64,
}

struct OpenLeaf {
    node: usize,
    rows: Vec<usize>,
    depth: usize,
    split: Option<Split>,
}

struct Grower<'a> {
    bins: &'a [Vec<u16>],
    mapper: &'a BinMapper,
    criterion: Criterion,
    min_leaf: usize,
}

impl Grower<'_> {
    fn best_split(&self, g: &[f64], rows: &[usize]) -> Option<Split> {
        let n = rows.len();
        if n < 2 * self.min_leaf {
            return None;
        }
        let sum: f64 = rows.iter().map(|&i| g[i]).sum();
        let mut best: Option<Split> = None;
        for (f, column) in self.bins.iter().enumerate() {
            let nb = self.mapper.n_bins(f);
            if nb < 2 {
                continue;
            }
            let mut hist_g = vec![0.0; nb];
            let mut hist_n = vec![0usize; nb];
            for &i in rows {
                let b = column[i] as usize;
                hist_g[b] += g[i];
                hist_n[b] += 1;
            }
            let (mut sum_l, mut n_l) = (0.0, 0usize);
            for b in 0..nb - 1 {
                sum_l += hist_g[b];
                n_l += hist_n[b];
                if hist_n[b] == 0 || n_l < self.min_leaf || n - n_l < self.min_leaf {
                    continue;
                }
                let gain = self.criterion.score(sum_l, n_l, sum, n);
                if gain > 0.0 && best.is_none_or(|s| gain > s.gain) {
                    best = Some(Split { feature: f, bin: b, gain });
                }
            }
        }
        best
    }

    fn grow(&self, g: &[f64], rows: &[usize], max_leaves: usize, max_depth: Option<usize>) -> RegressionTree {
        let leaf_value = |rows: &[usize]| {
            let sum: f64 = rows.iter().map(|&i| g[i]).sum();
            self.criterion.leaf_value(sum, rows.len())
        };
        let can_split = |depth: usize| max_depth.is_none_or(|d| depth < d);
        let mut nodes = vec![Node::Leaf { value: leaf_value(rows) }];
        let mut open = vec![OpenLeaf {
            node: 0,
            rows: rows.to_vec(),
            depth: 0,
            split: if can_split(0) { self.best_split(g, rows) } else { None },
        }];
        let mut n_leaves = 1;
        while n_leaves < max_leaves {
            // Largest gain wins; ties keep the earliest-created leaf.
            let pick = open
                .iter()
                .enumerate()
                .filter_map(|(k, l)| l.split.map(|s| (k, s.gain)))
                .fold(None, |best: Option<(usize, f64)>, (k, gain)| match best {
                    Some((_, b)) if gain <= b => best,
                    _ => Some((k, gain)),
                });
            let Some((k, _)) = pick else { break };
            let leaf = open.remove(k);
            let split = leaf.split.expect("picked leaf has a split");
            let column = &self.bins[split.feature];
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
                leaf.rows.iter().partition(|&&i| column[i] as usize <= split.bin);
            let left = nodes.len();
            nodes.push(Node::Leaf { value: leaf_value(&left_rows) });
            let right = nodes.len();
            nodes.push(Node::Leaf { value: leaf_value(&right_rows) });
            nodes[leaf.node] = Node::Split {
                feature: split.feature,
                threshold: self.mapper.boundaries[split.feature][split.bin],
                left,
                right,
            };
            let depth = leaf.depth + 1;
            for (node, rows) in [(left, left_rows), (right, right_rows)] {
                let split = if can_split(depth) { self.best_split(g, &rows) } else { None };
                open.push(OpenLeaf { node, rows, depth, split });
            }
            n_leaves += 1;
        }
        RegressionTree {
            nodes,
            max_depth,
            min_samples_leaf: self.min_leaf,
        }
    }
}

pub fn fit_histogram_boosting(x: &DMatrix<f64>, y: &[f64], params: &HistogramParams) -> Result<EnsembleModel> {
    validate_boosting(x, y, params.learning_rate, params.subsample)?;
    if params.n_bins < 2 || params.n_bins > u16::MAX as usize {
        return Err(Error::invalid(format!("n_bins {} outside 2..=65535", params.n_bins)));
    }
    if params.max_leaves == 0 {
        return Err(Error::invalid("max_leaves must be positive"));
    }
    if params.lambda < 0.0 || params.gamma < 0.0 {
        return Err(Error::invalid("lambda and gamma must be non-negative"));
    }
    let mapper = BinMapper::fit(x, params.n_bins);
    let bins = mapper.transform(x);
    let grower = Grower {
        bins: &bins,
        mapper: &mapper,
        criterion: Criterion::SecondOrder { lambda: params.lambda, gamma: params.gamma },
        min_leaf: params.min_samples_leaf.max(1),
    };
    Ok(boost(
        x,
        y,
        params.n_rounds,
        params.learning_rate,
        params.subsample,
        params.seed,
        EnsembleKind::Histogram,
        |residuals, rows, _| {
            let gradients: Vec<f64> = residuals.iter().map(|r| -r).collect();
            (grower.grow(&gradients, rows, params.max_leaves, params.max_depth), 1.0)
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regressors::boosting::{fit_second_order_boosting, SecondOrderParams};
    use crate::stats;
    use rand::Rng;

    fn data(seed: u64, n: usize, p: usize) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = stats::rng(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>());
        let y = (0..n).map(|i| (4.0 * x[(i, 0)]).cos() + x[(i, p - 1)] + 0.1 * rng.random::<f64>()).collect();
        (x, y)
    }

    #[test]
    fn bins_respect_boundaries() {
        let (x, _) = data(1, 500, 2);
        let mapper = BinMapper::fit(&x, 16);
        for j in 0..2 {
            let b = &mapper.boundaries[j];
            assert!(b.len() <= 15 && b.len() >= 10);
            assert!(b.windows(2).all(|w| w[0] < w[1]));
            for i in 0..500 {
                let v = x[(i, j)];
                let k = mapper.bin(j, v);
                assert!(k == 0 || b[k - 1] < v);
                assert!(k == b.len() || v <= b[k]);
            }
        }
    }

    #[test]
    fn constant_column_has_one_bin() {
        let mut x = DMatrix::from_element(20, 2, 3.0);
        for i in 0..20 {
            x[(i, 1)] = i as f64;
        }
        let y: Vec<f64> = (0..20).map(|i| (i as f64).sqrt()).collect();
        let model = fit_histogram_boosting(&x, &y, &HistogramParams { n_rounds: 10, ..Default::default() }).unwrap();
        for tree in &model.trees {
            for node in &tree.nodes {
                if let Node::Split { feature, .. } = node {
                    assert_eq!(*feature, 1);
                }
            }
        }
    }

    #[test]
    fn one_leaf_is_constant_shift() {
        let (x, y) = data(2, 30, 3);
        let model = fit_histogram_boosting(&x, &y, &HistogramParams { max_leaves: 1, ..Default::default() }).unwrap();
        let pred = model.predict_unchecked(&x);
        assert!(pred.iter().all(|&v| (v - pred[0]).abs() < 1e-15));
    }

    #[test]
    fn matches_depth_wise_booster_on_fine_bins() {
        for seed in 0..10 {
            let (x, y) = data(10 + seed, 30, 2);
            for (max_leaves, depth) in [(2, Some(1)), (usize::MAX, None)] {
                let hist = fit_histogram_boosting(
                    &x,
                    &y,
                    &HistogramParams {
                        n_rounds: 5,
                        learning_rate: 0.5,
                        n_bins: 64,
                        max_leaves,
                        lambda: 0.5,
                        ..Default::default()
                    },
                )
                .unwrap();
                let exact = fit_second_order_boosting(
                    &x,
                    &y,
                    &SecondOrderParams {
                        n_rounds: 5,
                        learning_rate: 0.5,
                        max_depth: depth,
                        lambda: 0.5,
                        ..Default::default()
                    },
                )
                .unwrap();
                for (a, b) in hist.predict_unchecked(&x).iter().zip(exact.predict_unchecked(&x)) {
                    assert!((a - b).abs() < 1e-10, "seed {seed}: {a} vs {b}");
                }
            }
        }
    }
}
