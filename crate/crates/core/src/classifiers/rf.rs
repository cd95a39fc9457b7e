//! Random forest of Gini trees grown to purity.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::check_training;
use crate::linalg::Matrix;
use crate::seed;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfParams {
    pub n_trees: usize,
    /// Fit each tree on an n-sized resample drawn with replacement.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for RfParams {
    fn default() -> Self {
        Self { n_trees: 30, bootstrap: true, seed: 0 }
    }
}

/// Gini impurity `1 - Σ p_c²` of a binary label multiset.
pub fn gini(labels: &[bool]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let p = labels.iter().filter(|&&l| l).count() as f64 / labels.len() as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Grows a tree on the rows listed in `rows` (repeats allowed). Every
    /// impure node takes the split with the lowest weighted Gini impurity
    /// over all features and midpoint thresholds, the first one found on
    /// ties, even when it does not lower the impurity.
    pub fn fit(x: &Matrix, y: &[bool], rows: &[usize]) -> Tree {
        let mut tree = Tree { nodes: Vec::new() };
        let mut buf = Vec::with_capacity(rows.len());
        tree.grow(x, y, rows.to_vec(), &mut buf);
        tree
    }

    fn grow(&mut self, x: &Matrix, y: &[bool], rows: Vec<usize>, buf: &mut Vec<(f64, bool)>) -> usize {
        let id = self.nodes.len();
        let pos = rows.iter().filter(|&&i| y[i]).count();
        let value = pos as f64 / rows.len() as f64;
        self.nodes.push(Node::Leaf { value });
        if pos == 0 || pos == rows.len() {
            return id;
        }
        let Some((feature, threshold)) = best_split(x, y, &rows, buf) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x.get(i, feature) <= threshold);
        let left = self.grow(x, y, l, buf);
        let right = self.grow(x, y, r, buf);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }

    pub fn score_row(&self, q: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    at = if q[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

fn best_split(x: &Matrix, y: &[bool], rows: &[usize], buf: &mut Vec<(f64, bool)>) -> Option<(usize, f64)> {
    let n = rows.len();
    let total_pos = rows.iter().filter(|&&i| y[i]).count();
    let mut best: Option<(f64, usize, f64)> = None;
    for j in 0..x.cols() {
        buf.clear();
        buf.extend(rows.iter().map(|&i| (x.get(i, j), y[i])));
        buf.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_pos = 0usize;
        for k in 1..n {
            left_pos += usize::from(buf[k - 1].1);
            if buf[k - 1].0 == buf[k].0 {
                continue;
            }
            let (nl, nr) = (k as f64, (n - k) as f64);
            let (pl, pr) = (left_pos as f64, (total_pos - left_pos) as f64);
            // n_l * gini_l + n_r * gini_r
            let impurity = 2.0 * pl * (nl - pl) / nl + 2.0 * pr * (nr - pr) / nr;
            if best.map_or(true, |b| impurity < b.0) {
                let (lo, hi) = (buf[k - 1].0, buf[k].0);
                let mid = lo + (hi - lo) / 2.0;
                // Adjacent floats can round the midpoint up to `hi`.
                best = Some((impurity, j, if mid < hi { mid } else { lo }));
            }
        }
    }
    best.map(|(_, j, t)| (j, t))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfModel {
    pub trees: Vec<Tree>,
    pub n_features: usize,
}

pub fn train(x: &Matrix, y: &[bool], params: &RfParams) -> Result<RfModel> {
    check_training(x, y, 1)?;
    if params.n_trees == 0 {
        return Err(Error::InvalidHyperparameter("a forest needs at least one tree".into()));
    }
    let n = x.rows();
    let trees = (0..params.n_trees)
        .map(|t| {
            let rows: Vec<usize> = if params.bootstrap {
                let mut rng = seed::rng_for(params.seed, "tree", t as u64);
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            Tree::fit(x, y, &rows)
        })
        .collect();
    Ok(RfModel { trees, n_features: x.cols() })
}

impl RfModel {
    pub fn score_row(&self, q: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.score_row(q)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.n_features {
            return Err(Error::ColumnMismatch);
        }
        Ok(x.iter_rows().map(|r| self.score_row(r)).collect())
    }
}
