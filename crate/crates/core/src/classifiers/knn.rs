//! k-nearest-neighbour vote under Euclidean distance.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::check_training;
use crate::linalg::{squared_distance, Matrix};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub x: Matrix,
    pub y: Vec<bool>,
}

pub fn train(x: &Matrix, y: &[bool], k: usize) -> Result<KnnModel> {
    if k == 0 {
        return Err(Error::InvalidHyperparameter("k must be positive".into()));
    }
    check_training(x, y, k)?;
    Ok(KnnModel { k, x: x.clone(), y: y.to_vec() })
}

impl KnnModel {
    /// Indices of the `k` nearest training rows, nearest first, ties to
    /// the lower index.
    pub fn neighbours(&self, q: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self
            .x
            .iter_rows()
            .enumerate()
            .map(|(i, r)| (squared_distance(q, r), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }

    pub fn score_row(&self, q: &[f64]) -> f64 {
        let nn = self.neighbours(q);
        nn.iter().filter(|&&i| self.y[i]).count() as f64 / nn.len() as f64
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.x.cols() {
            return Err(Error::ColumnMismatch);
        }
        Ok(x.iter_rows().map(|r| self.score_row(r)).collect())
    }
}
