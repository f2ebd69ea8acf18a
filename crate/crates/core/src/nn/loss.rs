//! Losses, mean-reduced over the batch (rows), each with its gradient with
//! respect to the pre-activation logits.

use super::activation::{sigmoid, softmax_in_place};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const PROB_EPS: f64 = 1e-12;

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

fn same_shape(a: &Tensor, b: &Tensor, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("{what}: {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// Binary cross-entropy on probabilities, summed over label columns and
/// averaged over rows.
pub fn bce(p: &Tensor, y: &Tensor) -> Result<f64> {
    same_shape(p, y, "bce")?;
    let total: f64 = p
        .data()
        .iter()
        .zip(y.data())
        .map(|(&p, &y)| {
            let p = clamp_prob(p);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / p.rows() as f64)
}

/// Categorical cross-entropy of row-stochastic `p` against one-hot `y`.
pub fn cce(p: &Tensor, y: &Tensor) -> Result<f64> {
    same_shape(p, y, "cce")?;
    let total: f64 = p
        .data()
        .iter()
        .zip(y.data())
        .filter(|(_, &y)| y != 0.0)
        .map(|(&p, &y)| -y * clamp_prob(p).ln())
        .sum();
    Ok(total / p.rows() as f64)
}

/// `bce(sigmoid(z), y)` and its gradient `(sigmoid(z) - y) / batch`.
pub fn bce_with_logits(logits: &Tensor, y: &Tensor) -> Result<(f64, Tensor)> {
    let p = logits.map(sigmoid);
    let loss = bce(&p, y)?;
    let batch = logits.rows() as f64;
    let mut grad = p;
    for (g, &t) in grad.data_mut().iter_mut().zip(y.data()) {
        *g = (*g - t) / batch;
    }
    Ok((loss, grad))
}

/// `cce(softmax(z), y)` and its gradient `(softmax(z) - y) / batch`.
pub fn softmax_cross_entropy(logits: &Tensor, y: &Tensor) -> Result<(f64, Tensor)> {
    same_shape(logits, y, "softmax_cross_entropy")?;
    let mut p = logits.clone();
    for i in 0..p.rows() {
        softmax_in_place(p.row_mut(i));
    }
    let loss = cce(&p, y)?;
    let batch = logits.rows() as f64;
    for (g, &t) in p.data_mut().iter_mut().zip(y.data()) {
        *g = (*g - t) / batch;
    }
    Ok((loss, p))
}
