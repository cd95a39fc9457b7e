//! One-hidden-layer perceptron (ReLU hidden units, logistic output) trained
//! with Adam on mini-batches.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::check_training;
use crate::linalg::{dot, Matrix};
use crate::math;
use crate::seed;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a `tol` improvement of the training loss before
    /// stopping.
    pub patience: usize,
    pub tol: f64,
    /// L2 penalty on the weights.
    pub alpha: f64,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: 200,
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 200,
            patience: 10,
            tol: 1e-4,
            alpha: 1e-4,
            seed: 0,
        }
    }
}

/// Largest absolute column mean accepted as standardized input.
pub const MAX_COLUMN_MEAN: f64 = 0.5;

/// Parameters flattened as `[W1 (hidden x inputs, row-major), b1, w2, b2]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub inputs: usize,
    pub hidden: usize,
    pub theta: Vec<f64>,
    pub epochs: usize,
    pub loss_curve: Vec<f64>,
}

pub fn param_count(inputs: usize, hidden: usize) -> usize {
    hidden * inputs + 2 * hidden + 1
}

struct View<'a> {
    w1: &'a [f64],
    b1: &'a [f64],
    w2: &'a [f64],
    b2: f64,
}

fn view(theta: &[f64], d: usize, h: usize) -> View<'_> {
    let (w1, rest) = theta.split_at(h * d);
    let (b1, rest) = rest.split_at(h);
    let (w2, rest) = rest.split_at(h);
    View { w1, b1, w2, b2: rest[0] }
}

fn forward(v: &View<'_>, d: usize, x: &[f64], act: &mut [f64]) -> f64 {
    for (k, a) in act.iter_mut().enumerate() {
        *a = (v.b1[k] + dot(&v.w1[k * d..(k + 1) * d], x)).max(0.0);
    }
    v.b2 + dot(v.w2, act)
}

/// Mean cross-entropy over `rows` plus `alpha / (2 |rows|)` times the
/// squared weight norm, and its gradient written into `grad`.
#[allow(clippy::too_many_arguments)]
pub fn loss_and_grad(
    theta: &[f64],
    inputs: usize,
    hidden: usize,
    x: &Matrix,
    y: &[bool],
    rows: &[usize],
    alpha: f64,
    grad: &mut [f64],
) -> f64 {
    let (d, h) = (inputs, hidden);
    let v = view(theta, d, h);
    grad.iter_mut().for_each(|g| *g = 0.0);
    let b = rows.len() as f64;
    let mut act = alloc::vec![0.0; h];
    let mut loss = 0.0;
    {
        let (g_w1, rest) = grad.split_at_mut(h * d);
        let (g_b1, rest) = rest.split_at_mut(h);
        let (g_w2, g_b2) = rest.split_at_mut(h);
        for &i in rows {
            let xi = x.row(i);
            let z = forward(&v, d, xi, &mut act);
            let t = if y[i] { 1.0 } else { 0.0 };
            loss += math::softplus(z) - t * z;
            let dz = (math::sigmoid(z) - t) / b;
            g_b2[0] += dz;
            for k in 0..h {
                g_w2[k] += dz * act[k];
                if act[k] > 0.0 {
                    let delta = dz * v.w2[k];
                    g_b1[k] += delta;
                    for (g, xv) in g_w1[k * d..(k + 1) * d].iter_mut().zip(xi) {
                        *g += delta * xv;
                    }
                }
            }
        }
        let reg = alpha / b;
        for (g, w) in g_w1.iter_mut().zip(v.w1) {
            *g += reg * w;
        }
        for (g, w) in g_w2.iter_mut().zip(v.w2) {
            *g += reg * w;
        }
    }
    loss / b + 0.5 * alpha / b * (dot(v.w1, v.w1) + dot(v.w2, v.w2))
}

/// Glorot-uniform initialization; the output layer uses the narrower
/// bound suited to a logistic unit.
pub fn init(inputs: usize, hidden: usize, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng_for(seed, "mlp-init", 0);
    let b1 = math::sqrt(6.0 / (inputs + hidden) as f64);
    let b2 = math::sqrt(2.0 / (hidden + 1) as f64);
    let mut theta = Vec::with_capacity(param_count(inputs, hidden));
    theta.extend((0..hidden * inputs + hidden).map(|_| rng.gen_range(-b1..b1)));
    theta.extend((0..hidden + 1).map(|_| rng.gen_range(-b2..b2)));
    theta
}

fn check_standardized(x: &Matrix) -> Result<()> {
    let n = x.rows() as f64;
    for j in 0..x.cols() {
        let mean = x.column(j).sum::<f64>() / n;
        if math::abs(mean) > MAX_COLUMN_MEAN {
            return Err(Error::NotStandardized { col: j, mean });
        }
    }
    Ok(())
}

pub fn train(x: &Matrix, y: &[bool], params: &MlpParams) -> Result<MlpModel> {
    check_training(x, y, 1)?;
    if params.hidden == 0 || params.batch_size == 0 || params.max_epochs == 0 || !(params.learning_rate > 0.0) {
        return Err(Error::InvalidHyperparameter(
            "MLP needs positive hidden size, batch size, epoch cap and learning rate".into(),
        ));
    }
    check_standardized(x)?;
    let (d, h) = (x.cols(), params.hidden);
    let mut theta = init(d, h, params.seed);
    let p = theta.len();
    let (beta1, beta2, eps) = (0.9, 0.999, 1e-8);
    let mut m1 = alloc::vec![0.0; p];
    let mut m2 = alloc::vec![0.0; p];
    let mut grad = alloc::vec![0.0; p];
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut rng = seed::rng_for(params.seed, "mlp-shuffle", 0);
    let mut step = 0i32;
    let mut best = f64::INFINITY;
    let mut stale = 0;
    let mut curve = Vec::new();
    for _ in 0..params.max_epochs {
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let mut epoch_loss = 0.0;
        for batch in order.chunks(params.batch_size) {
            epoch_loss += batch.len() as f64
                * loss_and_grad(&theta, d, h, x, y, batch, params.alpha, &mut grad);
            step += 1;
            let c1 = 1.0 - math::powf(beta1, step as f64);
            let c2 = 1.0 - math::powf(beta2, step as f64);
            let lr = params.learning_rate * math::sqrt(c2) / c1;
            for k in 0..p {
                m1[k] = beta1 * m1[k] + (1.0 - beta1) * grad[k];
                m2[k] = beta2 * m2[k] + (1.0 - beta2) * grad[k] * grad[k];
                theta[k] -= lr * m1[k] / (math::sqrt(m2[k]) + eps);
            }
        }
        let loss = epoch_loss / x.rows() as f64;
        curve.push(loss);
        if loss > best - params.tol {
            stale += 1;
        } else {
            stale = 0;
        }
        best = best.min(loss);
        if stale > params.patience {
            break;
        }
    }
    Ok(MlpModel { inputs: d, hidden: h, theta, epochs: curve.len(), loss_curve: curve })
}

impl MlpModel {
    pub fn score_row(&self, q: &[f64]) -> f64 {
        let v = view(&self.theta, self.inputs, self.hidden);
        let mut act = alloc::vec![0.0; self.hidden];
        math::sigmoid(forward(&v, self.inputs, q, &mut act))
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.inputs {
            return Err(Error::ColumnMismatch);
        }
        let v = view(&self.theta, self.inputs, self.hidden);
        let mut act = alloc::vec![0.0; self.hidden];
        Ok(x.iter_rows()
            .map(|r| math::sigmoid(forward(&v, self.inputs, r, &mut act)))
            .collect())
    }
}
