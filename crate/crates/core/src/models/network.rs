//! The four architectures behind the predictors.
//!
//! Every network reads a batch of `[T × V]` inputs with per-example lengths;
//! rows at or past an example's length are never read.

use super::config::ModelKind;
use crate::error::{Error, Result};
use crate::nn::{
    relu, Conv1d, Dense, GruCell, HasParameters, HeadLoss, LstmCell, Parameter, RecurrentEncoder, SeqBatch, Tensor,
};
use crate::rng::SplitMix64;

pub const TCNN_WIDTH: usize = 3;
pub const LSTM_FORGET_BIAS: f64 = 1.0;

/// One input sequence: `[T × V]` rows, of which the first `len` are real.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqInput {
    pub x: Tensor,
    pub len: usize,
}

// one per predictor, so variant size does not matter
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Lr { readout: Dense },
    Recurrent { encoder: RecurrentEncoder, readout: Dense },
    Tcnn { conv: Conv1d, readout: Dense },
}

fn masked_mean(batch: &[&SeqInput], v: usize) -> Tensor {
    let mut out = Tensor::zeros(&[batch.len(), v]);
    for (i, s) in batch.iter().enumerate() {
        if s.len == 0 {
            continue;
        }
        let row = out.row_mut(i);
        for t in 0..s.len {
            for (o, x) in row.iter_mut().zip(s.x.row(t)) {
                *o += x;
            }
        }
        let inv = 1.0 / s.len as f64;
        row.iter_mut().for_each(|o| *o *= inv);
    }
    out
}

/// Copy of `s.x` with rows past `len` zeroed.
fn zero_padding(s: &SeqInput) -> Tensor {
    let mut x = s.x.clone();
    for t in s.len..x.rows() {
        x.row_mut(t).fill(0.0);
    }
    x
}

/// Number of conv positions pooled: windows that start on a real visit,
/// and at least one.
fn pooled_positions(len: usize, t: usize) -> usize {
    len.min(t + 1 - TCNN_WIDTH).max(1)
}

struct TcnnForward {
    inputs: Vec<Tensor>,
    pre: Vec<Tensor>,
    /// per example, per filter: position of the (first) maximum
    argmax: Vec<Vec<usize>>,
    pooled: Tensor,
}

impl Network {
    pub fn new(kind: ModelKind, input_dim: usize, hidden_dim: usize, output_dim: usize, rng: &mut SplitMix64) -> Self {
        match kind {
            ModelKind::Lr => Network::Lr {
                readout: Dense::new(input_dim, output_dim, rng),
            },
            ModelKind::Gru => Network::Recurrent {
                encoder: RecurrentEncoder::Gru(GruCell::new(input_dim, hidden_dim, rng)),
                readout: Dense::new(hidden_dim, output_dim, rng),
            },
            ModelKind::Lstm => {
                let mut cell = LstmCell::new(input_dim, hidden_dim, rng);
                cell.set_forget_bias(LSTM_FORGET_BIAS);
                Network::Recurrent {
                    encoder: RecurrentEncoder::Lstm(cell),
                    readout: Dense::new(hidden_dim, output_dim, rng),
                }
            }
            ModelKind::Tcnn => Network::Tcnn {
                conv: Conv1d::new(input_dim, hidden_dim, TCNN_WIDTH, rng),
                readout: Dense::new(hidden_dim, output_dim, rng),
            },
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Network::Lr { .. } => ModelKind::Lr,
            Network::Recurrent {
                encoder: RecurrentEncoder::Gru(_),
                ..
            } => ModelKind::Gru,
            Network::Recurrent {
                encoder: RecurrentEncoder::Lstm(_),
                ..
            } => ModelKind::Lstm,
            Network::Tcnn { .. } => ModelKind::Tcnn,
        }
    }

    pub fn readout(&self) -> &Dense {
        match self {
            Network::Lr { readout } | Network::Recurrent { readout, .. } | Network::Tcnn { readout, .. } => readout,
        }
    }

    pub fn readout_mut(&mut self) -> &mut Dense {
        match self {
            Network::Lr { readout } | Network::Recurrent { readout, .. } | Network::Tcnn { readout, .. } => readout,
        }
    }

    /// Parameters with component-qualified names, in a fixed order.
    pub fn named_parameters(&self) -> Vec<(String, &Parameter)> {
        let (prefix, body): (&str, Vec<&Parameter>) = match self {
            Network::Lr { .. } => ("", Vec::new()),
            Network::Recurrent { encoder, .. } => ("encoder", encoder.parameters()),
            Network::Tcnn { conv, .. } => ("conv", conv.parameters()),
        };
        body.into_iter()
            .map(|p| (format!("{prefix}.{}", p.name), p))
            .chain(
                self.readout()
                    .parameters()
                    .into_iter()
                    .map(|p| (format!("readout.{}", p.name), p)),
            )
            .collect()
    }

    fn tcnn_forward(conv: &Conv1d, batch: &[&SeqInput]) -> Result<TcnnForward> {
        let k = conv.filters();
        let mut fwd = TcnnForward {
            inputs: Vec::with_capacity(batch.len()),
            pre: Vec::with_capacity(batch.len()),
            argmax: Vec::with_capacity(batch.len()),
            pooled: Tensor::zeros(&[batch.len(), k]),
        };
        for (i, s) in batch.iter().enumerate() {
            let x = zero_padding(s);
            let pre = conv.forward(&x)?;
            let p = pooled_positions(s.len, x.rows());
            let mut arg = vec![0; k];
            let out = fwd.pooled.row_mut(i);
            for (f, a) in arg.iter_mut().enumerate() {
                let mut best = 0;
                for t in 1..p {
                    if pre.get(t, f) > pre.get(best, f) {
                        best = t;
                    }
                }
                *a = best;
                // relu is monotone, so pooling before it is equivalent
                out[f] = relu(pre.get(best, f));
            }
            fwd.inputs.push(x);
            fwd.pre.push(pre);
            fwd.argmax.push(arg);
        }
        Ok(fwd)
    }

    /// Pre-activation outputs `[batch × output_dim]` in input order.
    pub fn logits(&self, batch: &[&SeqInput]) -> Result<Tensor> {
        match self {
            Network::Lr { readout } => readout.forward(&masked_mean(batch, readout.input_dim())),
            Network::Recurrent { encoder, readout } => {
                let items: Vec<(&Tensor, usize)> = batch.iter().map(|s| (&s.x, s.len)).collect();
                let (seq, order) = SeqBatch::from_padded(&items)?;
                let (h, _) = encoder.forward(&seq)?;
                let sorted = readout.forward(&h)?;
                let mut out = Tensor::zeros(&[batch.len(), readout.output_dim()]);
                for (row, &i) in order.iter().enumerate() {
                    out.row_mut(i).copy_from_slice(sorted.row(row));
                }
                Ok(out)
            }
            Network::Tcnn { conv, readout } => readout.forward(&Self::tcnn_forward(conv, batch)?.pooled),
        }
    }

    /// Batch loss; accumulates gradients into every parameter.
    /// `targets` rows follow input order.
    pub fn loss_and_backward(&mut self, batch: &[&SeqInput], targets: &Tensor, head: HeadLoss) -> Result<f64> {
        match self {
            Network::Lr { readout } => {
                let x = masked_mean(batch, readout.input_dim());
                let logits = readout.forward(&x)?;
                let (loss, d) = head.loss_and_grad(&logits, targets)?;
                readout.backward(&x, &d);
                Ok(loss)
            }
            Network::Recurrent { encoder, readout } => {
                let items: Vec<(&Tensor, usize)> = batch.iter().map(|s| (&s.x, s.len)).collect();
                let (seq, order) = SeqBatch::from_padded(&items)?;
                let mut sorted = Tensor::zeros(&[batch.len(), targets.cols()]);
                for (row, &i) in order.iter().enumerate() {
                    sorted.row_mut(row).copy_from_slice(targets.row(i));
                }
                crate::nn::backprop_through_time(encoder, readout, &seq, &sorted, head)
            }
            Network::Tcnn { conv, readout } => {
                let fwd = Self::tcnn_forward(conv, batch)?;
                let logits = readout.forward(&fwd.pooled)?;
                let (loss, d) = head.loss_and_grad(&logits, targets)?;
                let dpooled = readout.backward(&fwd.pooled, &d);
                for i in 0..batch.len() {
                    let pre = &fwd.pre[i];
                    let mut dy = Tensor::zeros(pre.shape());
                    for (f, &t) in fwd.argmax[i].iter().enumerate() {
                        if pre.get(t, f) > 0.0 {
                            dy.row_mut(t)[f] = dpooled.get(i, f);
                        }
                    }
                    conv.backward(&fwd.inputs[i], &dy);
                }
                Ok(loss)
            }
        }
    }
}

impl HasParameters for Network {
    fn parameters(&self) -> Vec<&Parameter> {
        self.named_parameters().into_iter().map(|(_, p)| p).collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        match self {
            Network::Lr { readout } => readout.parameters_mut(),
            Network::Recurrent { encoder, readout } => encoder
                .parameters_mut()
                .into_iter()
                .chain(readout.parameters_mut())
                .collect(),
            Network::Tcnn { conv, readout } => conv
                .parameters_mut()
                .into_iter()
                .chain(readout.parameters_mut())
                .collect(),
        }
    }
}

/// Checks that a network's input/output dims are usable.
pub fn check_dims(kind: ModelKind, input_dim: usize, max_visits: usize, output_dim: usize) -> Result<()> {
    use crate::common::check_count;
    check_count(input_dim, 1, 1 << 24, "input_dim")?;
    check_count(max_visits, 1, 1 << 24, "max_visits")?;
    check_count(output_dim, 1, 1 << 24, "output_dim")?;
    if kind == ModelKind::Tcnn && max_visits < TCNN_WIDTH {
        return Err(Error::Validation(crate::common::ValidationError::range(
            "max_visits",
            format!("tcnn kernel width {TCNN_WIDTH} exceeds the sequence length {max_visits}"),
            max_visits,
        )));
    }
    Ok(())
}
