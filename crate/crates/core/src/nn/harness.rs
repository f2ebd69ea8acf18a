//! Randomized gradient-check fixtures for every layer and for full BPTT.
//!
//! Each fixture draws a small instance from a seed, treats the layer inputs
//! as parameters too, and scores the outputs with a fixed random projection
//! (or a cross-entropy head for BPTT) so every coordinate gets a non-trivial
//! gradient.

use super::conv1d::Conv1d;
use super::dense::Dense;
use super::gradcheck::{gradient_check, GradCheck};
use super::gru::GruCell;
use super::lstm::LstmCell;
use super::param::{HasParameters, Parameter};
use super::recurrent::{backprop_through_time, HeadLoss, RecurrentEncoder, SeqBatch};
use super::tensor::Tensor;
use crate::rng::SplitMix64;

pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckTarget {
    Dense,
    GruCell,
    LstmCell,
    Conv1d,
    GruBptt,
    LstmBptt,
}

impl CheckTarget {
    pub const ALL: [CheckTarget; 6] = [
        CheckTarget::Dense,
        CheckTarget::GruCell,
        CheckTarget::LstmCell,
        CheckTarget::Conv1d,
        CheckTarget::GruBptt,
        CheckTarget::LstmBptt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckTarget::Dense => "dense",
            CheckTarget::GruCell => "gru_cell",
            CheckTarget::LstmCell => "lstm_cell",
            CheckTarget::Conv1d => "conv1d",
            CheckTarget::GruBptt => "gru_bptt",
            CheckTarget::LstmBptt => "lstm_bptt",
        }
    }
}

fn random(shape: &[usize], rng: &mut SplitMix64) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()).expect("non-empty shape")
}

fn input(name: &str, shape: &[usize], rng: &mut SplitMix64) -> Parameter {
    Parameter::new(name, random(shape, rng))
}

fn project(y: &Tensor, r: &Tensor) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn add_into(p: &mut Parameter, g: &Tensor) {
    for (a, b) in p.grad.data_mut().iter_mut().zip(g.data()) {
        *a += b;
    }
}

/// A layer together with its inputs (as parameters) and a loss closure.
struct Fixture<L> {
    layer: L,
    inputs: Vec<Parameter>,
}

impl<L: HasParameters> HasParameters for Fixture<L> {
    fn parameters(&self) -> Vec<&Parameter> {
        self.layer.parameters().into_iter().chain(self.inputs.iter()).collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        self.layer
            .parameters_mut()
            .into_iter()
            .chain(self.inputs.iter_mut())
            .collect()
    }
}

fn scale_grads<M: HasParameters>(m: &mut M, factor: f64) {
    if factor != 1.0 {
        for p in m.parameters_mut() {
            p.grad.data_mut().iter_mut().for_each(|g| *g *= factor);
        }
    }
}

/// Runs the gradient check for `target` on the instance drawn from `seed`.
///
/// `corruption` scales every analytic gradient by `1 + corruption` before the
/// comparison (0 for an honest check).
pub fn check_layer(target: CheckTarget, seed: u64, corruption: f64) -> GradCheck {
    let mut rng = SplitMix64::new(seed);
    let factor = 1.0 + corruption;
    match target {
        CheckTarget::Dense => {
            let mut f = Fixture {
                layer: Dense::new(4, 3, &mut rng),
                inputs: vec![input("x", &[3, 4], &mut rng)],
            };
            randomize_bias(f.layer.bias.value.data_mut(), &mut rng);
            let r = random(&[3, 3], &mut rng);
            gradient_check(
                &mut f,
                |f| {
                    let x = f.inputs[0].value.clone();
                    let y = f.layer.forward(&x).expect("shapes fixed");
                    let dx = f.layer.backward(&x, &r);
                    add_into(&mut f.inputs[0], &dx);
                    scale_grads(f, factor);
                    project(&y, &r)
                },
                FD_STEP,
                seed,
            )
        }
        CheckTarget::GruCell => {
            let mut f = Fixture {
                layer: GruCell::new(3, 4, &mut rng),
                inputs: vec![input("x", &[2, 3], &mut rng), input("h", &[2, 4], &mut rng)],
            };
            randomize_bias(f.layer.bias.value.data_mut(), &mut rng);
            let r = random(&[2, 4], &mut rng);
            gradient_check(
                &mut f,
                |f| {
                    let (x, h) = (f.inputs[0].value.clone(), f.inputs[1].value.clone());
                    let (h_new, cache) = f.layer.forward(&x, &h).expect("shapes fixed");
                    let (dx, dh) = f.layer.backward(&cache, &r);
                    add_into(&mut f.inputs[0], &dx);
                    add_into(&mut f.inputs[1], &dh);
                    scale_grads(f, factor);
                    project(&h_new, &r)
                },
                FD_STEP,
                seed,
            )
        }
        CheckTarget::LstmCell => {
            let mut f = Fixture {
                layer: LstmCell::new(3, 4, &mut rng),
                inputs: vec![
                    input("x", &[2, 3], &mut rng),
                    input("h", &[2, 4], &mut rng),
                    input("c", &[2, 4], &mut rng),
                ],
            };
            randomize_bias(f.layer.bias.value.data_mut(), &mut rng);
            let rh = random(&[2, 4], &mut rng);
            let rc = random(&[2, 4], &mut rng);
            gradient_check(
                &mut f,
                |f| {
                    let x = f.inputs[0].value.clone();
                    let h = f.inputs[1].value.clone();
                    let c = f.inputs[2].value.clone();
                    let (h_new, c_new, cache) = f.layer.forward(&x, &h, &c).expect("shapes fixed");
                    let (dx, dh, dc) = f.layer.backward(&cache, &rh, &rc);
                    add_into(&mut f.inputs[0], &dx);
                    add_into(&mut f.inputs[1], &dh);
                    add_into(&mut f.inputs[2], &dc);
                    scale_grads(f, factor);
                    project(&h_new, &rh) + project(&c_new, &rc)
                },
                FD_STEP,
                seed,
            )
        }
        CheckTarget::Conv1d => {
            let mut f = Fixture {
                layer: Conv1d::new(3, 2, 3, &mut rng),
                inputs: vec![input("x", &[6, 3], &mut rng)],
            };
            randomize_bias(f.layer.bias.value.data_mut(), &mut rng);
            let r = random(&[4, 2], &mut rng);
            gradient_check(
                &mut f,
                |f| {
                    let x = f.inputs[0].value.clone();
                    let y = f.layer.forward(&x).expect("shapes fixed");
                    let dx = f.layer.backward(&x, &r);
                    add_into(&mut f.inputs[0], &dx);
                    scale_grads(f, factor);
                    project(&y, &r)
                },
                FD_STEP,
                seed,
            )
        }
        CheckTarget::GruBptt | CheckTarget::LstmBptt => {
            let encoder = if target == CheckTarget::GruBptt {
                RecurrentEncoder::Gru(GruCell::new(3, 4, &mut rng))
            } else {
                RecurrentEncoder::Lstm(LstmCell::new(3, 4, &mut rng))
            };
            let mut model = BpttFixture {
                encoder,
                readout: Dense::new(4, 1, &mut rng),
            };
            let seqs: Vec<Tensor> = (0..3).map(|_| random(&[3, 3], &mut rng)).collect();
            let lengths = [3, 2, 1];
            let items: Vec<(&Tensor, usize)> = seqs.iter().zip(lengths).collect();
            let (batch, order) = SeqBatch::from_padded(&items).expect("shapes fixed");
            let y = [1.0, 0.0, 1.0];
            let targets = Tensor::from_vec(&[3, 1], order.iter().map(|&i| y[i]).collect()).expect("shapes fixed");
            gradient_check(
                &mut model,
                |m| {
                    let loss =
                        backprop_through_time(&mut m.encoder, &mut m.readout, &batch, &targets, HeadLoss::Sigmoid)
                            .expect("shapes fixed");
                    scale_grads(m, factor);
                    loss
                },
                FD_STEP,
                seed,
            )
        }
    }
}

fn randomize_bias(bias: &mut [f64], rng: &mut SplitMix64) {
    bias.iter_mut().for_each(|b| *b = rng.uniform(-0.5, 0.5));
}

struct BpttFixture {
    encoder: RecurrentEncoder,
    readout: Dense,
}

impl HasParameters for BpttFixture {
    fn parameters(&self) -> Vec<&Parameter> {
        self.encoder
            .parameters()
            .into_iter()
            .chain(self.readout.parameters())
            .collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        self.encoder
            .parameters_mut()
            .into_iter()
            .chain(self.readout.parameters_mut())
            .collect()
    }
}
