//! Recurrent encoding over variable-length batches and backpropagation
//! through time.
//!
//! Sequences in a [`SeqBatch`] are ordered by decreasing length, so the
//! examples still running at step `t` are always the first `active(t)` rows.
//! Padded timesteps are never materialized: they cannot influence the
//! forward pass, the loss, or any gradient.

use super::dense::Dense;
use super::gru::{GruCache, GruCell};
use super::loss::{bce_with_logits, softmax_cross_entropy};
use super::lstm::{LstmCache, LstmCell};
use super::param::{HasParameters, Parameter};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SeqBatch {
    input_dim: usize,
    lengths: Vec<usize>,
    /// `steps[t]` is `[active(t) × input_dim]`
    steps: Vec<Tensor>,
}

impl SeqBatch {
    /// Builds a batch from `(rows, length)` pairs where `rows` is
    /// `[T × input_dim]` and only the first `length` rows are real.
    ///
    /// Returns the batch and `order`, where batch row `i` holds input
    /// `order[i]`. Sorting by length is stable.
    pub fn from_padded(items: &[(&Tensor, usize)]) -> Result<(SeqBatch, Vec<usize>)> {
        let input_dim = items.first().map_or(0, |(x, _)| x.cols());
        for (x, len) in items {
            if x.cols() != input_dim || *len > x.rows() {
                return Err(Error::Shape(format!(
                    "sequence {:?} with length {len} in a batch of input_dim {input_dim}",
                    x.shape()
                )));
            }
        }
        let mut order: Vec<usize> = (0..items.len()).collect();
        order.sort_by(|&a, &b| items[b].1.cmp(&items[a].1));
        let lengths: Vec<usize> = order.iter().map(|&i| items[i].1).collect();
        let max_len = lengths.first().copied().unwrap_or(0);
        let mut steps = Vec::with_capacity(max_len);
        for t in 0..max_len {
            let active = lengths.iter().take_while(|&&l| l > t).count();
            let mut step = Tensor::zeros(&[active, input_dim]);
            for (row, &i) in order[..active].iter().enumerate() {
                step.row_mut(row).copy_from_slice(items[i].0.row(t));
            }
            steps.push(step);
        }
        Ok((
            SeqBatch {
                input_dim,
                lengths,
                steps,
            },
            order,
        ))
    }

    pub fn batch_size(&self) -> usize {
        self.lengths.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Sequence lengths in batch order (non-increasing).
    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn max_len(&self) -> usize {
        self.steps.len()
    }

    /// Number of sequences still running at step `t`.
    pub fn active(&self, t: usize) -> usize {
        self.steps.get(t).map_or(0, Tensor::rows)
    }

    pub fn step(&self, t: usize) -> &Tensor {
        &self.steps[t]
    }

    /// The real rows of batch entry `i`, oldest first.
    pub fn sequence(&self, i: usize) -> Vec<&[f64]> {
        (0..self.lengths[i]).map(|t| self.steps[t].row(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RecurrentEncoder {
    Gru(GruCell),
    Lstm(LstmCell),
}

#[derive(Debug, Clone)]
enum StepCache {
    Gru(GruCache),
    Lstm(LstmCache),
}

/// Per-step caches from [`RecurrentEncoder::forward`].
#[derive(Debug, Clone)]
pub struct EncoderCache {
    steps: Vec<StepCache>,
}

impl RecurrentEncoder {
    pub fn hidden_dim(&self) -> usize {
        match self {
            RecurrentEncoder::Gru(c) => c.hidden_dim(),
            RecurrentEncoder::Lstm(c) => c.hidden_dim(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            RecurrentEncoder::Gru(c) => c.input_dim(),
            RecurrentEncoder::Lstm(c) => c.input_dim(),
        }
    }

    /// Runs the cell over each sequence; returns the hidden state after each
    /// sequence's last real step (`[batch × hidden]`, batch order).
    pub fn forward(&self, batch: &SeqBatch) -> Result<(Tensor, EncoderCache)> {
        if batch.input_dim() != self.input_dim() && batch.max_len() > 0 {
            return Err(Error::Shape(format!(
                "encoder expects input_dim {}, batch has {}",
                self.input_dim(),
                batch.input_dim()
            )));
        }
        let hd = self.hidden_dim();
        let mut h = Tensor::zeros(&[batch.batch_size(), hd]);
        let mut c = Tensor::zeros(&[batch.batch_size(), hd]);
        let mut caches = Vec::with_capacity(batch.max_len());
        for t in 0..batch.max_len() {
            let n = batch.active(t);
            let h_prev = h.head_rows(n);
            match self {
                RecurrentEncoder::Gru(cell) => {
                    let (h_new, cache) = cell.forward(batch.step(t), &h_prev)?;
                    h.set_head_rows(&h_new);
                    caches.push(StepCache::Gru(cache));
                }
                RecurrentEncoder::Lstm(cell) => {
                    let c_prev = c.head_rows(n);
                    let (h_new, c_new, cache) = cell.forward(batch.step(t), &h_prev, &c_prev)?;
                    h.set_head_rows(&h_new);
                    c.set_head_rows(&c_new);
                    caches.push(StepCache::Lstm(cache));
                }
            }
        }
        Ok((h, EncoderCache { steps: caches }))
    }

    /// Backpropagates `d_final` (gradient w.r.t. the final hidden states)
    /// through every real timestep, accumulating parameter gradients.
    pub fn backward(&mut self, batch: &SeqBatch, cache: &EncoderCache, d_final: &Tensor) {
        let hd = self.hidden_dim();
        let mut dh = d_final.clone();
        let mut dc = Tensor::zeros(&[batch.batch_size(), hd]);
        for t in (0..batch.max_len()).rev() {
            let n = batch.active(t);
            let dh_t = dh.head_rows(n);
            match (&mut *self, &cache.steps[t]) {
                (RecurrentEncoder::Gru(cell), StepCache::Gru(step)) => {
                    let (_, dh_prev) = cell.backward(step, &dh_t);
                    dh.set_head_rows(&dh_prev);
                }
                (RecurrentEncoder::Lstm(cell), StepCache::Lstm(step)) => {
                    let dc_t = dc.head_rows(n);
                    let (_, dh_prev, dc_prev) = cell.backward(step, &dh_t, &dc_t);
                    dh.set_head_rows(&dh_prev);
                    dc.set_head_rows(&dc_prev);
                }
                _ => unreachable!("cache kind always matches the encoder that produced it"),
            }
        }
    }
}

impl HasParameters for RecurrentEncoder {
    fn parameters(&self) -> Vec<&Parameter> {
        match self {
            RecurrentEncoder::Gru(c) => c.parameters(),
            RecurrentEncoder::Lstm(c) => c.parameters(),
        }
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        match self {
            RecurrentEncoder::Gru(c) => c.parameters_mut(),
            RecurrentEncoder::Lstm(c) => c.parameters_mut(),
        }
    }
}

/// Output head loss: sigmoid + binary cross-entropy per column, or softmax +
/// categorical cross-entropy over columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadLoss {
    Sigmoid,
    Softmax,
}

impl HeadLoss {
    pub fn loss_and_grad(self, logits: &Tensor, targets: &Tensor) -> Result<(f64, Tensor)> {
        match self {
            HeadLoss::Sigmoid => bce_with_logits(logits, targets),
            HeadLoss::Softmax => softmax_cross_entropy(logits, targets),
        }
    }
}

/// Encoder + affine readout on the last real hidden state + loss.
///
/// Computes the batch loss and accumulates gradients into every encoder and
/// readout parameter. `targets` rows follow batch order.
pub fn backprop_through_time(
    encoder: &mut RecurrentEncoder,
    readout: &mut Dense,
    batch: &SeqBatch,
    targets: &Tensor,
    head: HeadLoss,
) -> Result<f64> {
    let (h, cache) = encoder.forward(batch)?;
    let logits = readout.forward(&h)?;
    let (loss, dlogits) = head.loss_and_grad(&logits, targets)?;
    let dh = readout.backward(&h, &dlogits);
    encoder.backward(batch, &cache, &dh);
    Ok(loss)
}
