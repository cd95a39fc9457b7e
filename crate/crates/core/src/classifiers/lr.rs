//! L2-regularized logistic regression.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_training, lbfgs};
use crate::linalg::{dot, Matrix};
use crate::math;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrParams {
    /// Weight of `‖w‖² / 2` against the summed log-loss.
    pub l2: f64,
    /// Gradient 2-norm at which optimization stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LrParams {
    fn default() -> Self {
        Self { l2: 1.0, tol: 1e-4, max_iter: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

impl LrModel {
    pub fn zero(dim: usize) -> Self {
        Self { weights: alloc::vec![0.0; dim], bias: 0.0, iterations: 0, grad_norm: 0.0 }
    }

    pub fn score_row(&self, x: &[f64]) -> f64 {
        math::sigmoid(dot(&self.weights, x) + self.bias)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.weights.len() {
            return Err(Error::ColumnMismatch);
        }
        Ok(x.iter_rows().map(|r| self.score_row(r)).collect())
    }
}

/// Objective and gradient at `theta = [w, b]`:
/// `Σ_i log(1 + e^{z_i}) - y_i z_i + l2/2 ‖w‖²`, `z_i = w·x_i + b`.
pub fn objective(theta: &[f64], x: &Matrix, y: &[bool], l2: f64, grad: &mut [f64]) -> f64 {
    let d = x.cols();
    let (w, b) = (&theta[..d], theta[d]);
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    for (row, &label) in x.iter_rows().zip(y) {
        let z = dot(w, row) + b;
        let t = if label { 1.0 } else { 0.0 };
        loss += math::softplus(z) - t * z;
        let r = math::sigmoid(z) - t;
        for (g, xi) in grad[..d].iter_mut().zip(row) {
            *g += r * xi;
        }
        grad[d] += r;
    }
    for (g, wi) in grad[..d].iter_mut().zip(w) {
        *g += l2 * wi;
    }
    loss + 0.5 * l2 * dot(w, w)
}

pub fn train(x: &Matrix, y: &[bool], params: &LrParams) -> Result<LrModel> {
    check_training(x, y, 1)?;
    if !(params.l2 >= 0.0) || !(params.tol > 0.0) || params.max_iter == 0 {
        return Err(Error::InvalidHyperparameter("LR needs l2 >= 0, tol > 0, max_iter > 0".into()));
    }
    let d = x.cols();
    let out = lbfgs::minimize(
        |theta, g| objective(theta, x, y, params.l2, g),
        alloc::vec![0.0; d + 1],
        params.tol,
        params.max_iter,
    );
    Ok(LrModel {
        bias: out.x[d],
        weights: out.x[..d].to_vec(),
        iterations: out.iterations,
        grad_norm: out.grad_norm,
    })
}
