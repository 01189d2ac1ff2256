//! CART trees on a squared-error criterion, bagged into forests or boosted on logistic loss.
//!
//! With 0/1 targets the squared-error impurity of a node is half its Gini impurity, so the same
//! split search serves both classification (forest) and residual regression (boosting).

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sigmoid, FittedState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Nodes stored flat with the root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    target: &'a [f64],
    /// Per-sample Hessians; leaves take the Newton step `Σ target / Σ hess` when present.
    hess: Option<&'a [f64]>,
    max_depth: usize,
    /// Features examined per split, drawn without replacement.
    mtry: Option<(usize, ChaCha8Rng)>,
    nodes: Vec<Node>,
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    cost: f64,
}

impl Builder<'_> {
    fn leaf_value(&self, idx: &[usize]) -> f64 {
        let s: f64 = idx.iter().map(|&i| self.target[i]).sum();
        match self.hess {
            Some(h) => s / idx.iter().map(|&i| h[i]).sum::<f64>().max(1e-12),
            None => s / idx.len() as f64,
        }
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x[0].len();
        match &mut self.mtry {
            Some((m, rng)) if *m < d => {
                let mut f = sample(rng, d, *m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<SplitChoice> {
        let total: f64 = idx.iter().map(|&i| self.target[i]).sum();
        let total_sq: f64 = idx.iter().map(|&i| self.target[i].powi(2)).sum();
        let n = idx.len() as f64;
        let mut best: Option<SplitChoice> = None;
        let mut order = idx.to_vec();
        for f in self.candidate_features() {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let (mut s, mut sq) = (0.0, 0.0);
            for pos in 0..order.len() - 1 {
                let t = self.target[order[pos]];
                s += t;
                sq += t * t;
                let (lo, hi) = (self.x[order[pos]][f], self.x[order[pos + 1]][f]);
                if lo == hi {
                    continue;
                }
                let nl = (pos + 1) as f64;
                let nr = n - nl;
                let cost = (sq - s * s / nl) + ((total_sq - sq) - (total - s).powi(2) / nr);
                if best.as_ref().is_none_or(|b| cost < b.cost) {
                    let mid = lo + (hi - lo) / 2.0;
                    best = Some(SplitChoice {
                        feature: f,
                        threshold: if mid < hi { mid } else { lo },
                        cost,
                    });
                }
            }
        }
        best
    }

    fn build(&mut self, idx: &[usize], depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: self.leaf_value(idx),
        });
        let first = self.target[idx[0]];
        if depth >= self.max_depth || idx.len() < 2 || idx.iter().all(|&i| self.target[i] == first) {
            return id;
        }
        let Some(split) = self.best_split(idx) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][split.feature] <= split.threshold);
        let left = self.build(&l, depth + 1);
        let right = self.build(&r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

fn grow(
    x: &[Vec<f64>],
    target: &[f64],
    hess: Option<&[f64]>,
    idx: &[usize],
    max_depth: usize,
    mtry: Option<(usize, ChaCha8Rng)>,
) -> (Tree, Option<ChaCha8Rng>) {
    let mut b = Builder {
        x,
        target,
        hess,
        max_depth,
        mtry,
        nodes: Vec::new(),
    };
    b.build(idx, 0);
    (Tree { nodes: b.nodes }, b.mtry.map(|(_, rng)| rng))
}

/// Bootstrap-bagged classification trees with `round(√d)` candidate features per split.
/// Each leaf holds the fraction of positive bootstrap samples reaching it.
pub(super) fn fit_forest(x: &[Vec<f64>], y: &[bool], trees: usize, depth: usize, seed: u64) -> FittedState {
    let n = x.len();
    let d = x[0].len();
    let target: Vec<f64> = y.iter().map(|&l| f64::from(u8::from(l))).collect();
    let mtry = ((d as f64).sqrt().round() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(trees);
    for _ in 0..trees {
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let (tree, back) = grow(x, &target, None, &idx, depth, Some((mtry, rng)));
        rng = back.expect("forest builder keeps its rng");
        out.push(tree);
    }
    FittedState::Forest { trees: out }
}

/// Gradient boosting on logistic loss: residual-fitted trees with Newton leaf values.
pub(super) fn fit_boosted(x: &[Vec<f64>], y: &[bool], rounds: usize, depth: usize, shrinkage: f64) -> FittedState {
    let n = x.len();
    let t: Vec<f64> = y.iter().map(|&l| f64::from(u8::from(l))).collect();
    let p0 = (t.iter().sum::<f64>() / n as f64).clamp(1e-6, 1.0 - 1e-6);
    let base = (p0 / (1.0 - p0)).ln();
    let mut f = vec![base; n];
    let idx: Vec<usize> = (0..n).collect();
    let mut trees = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let p: Vec<f64> = f.iter().map(|&v| sigmoid(v)).collect();
        let residual: Vec<f64> = t.iter().zip(&p).map(|(a, b)| a - b).collect();
        let hess: Vec<f64> = p.iter().map(|v| v * (1.0 - v)).collect();
        let (tree, _) = grow(x, &residual, Some(&hess), &idx, depth, None);
        for (fi, row) in f.iter_mut().zip(x) {
            *fi += shrinkage * tree.evaluate(row);
        }
        trees.push(tree);
    }
    FittedState::Boosted { base, shrinkage, trees }
}
