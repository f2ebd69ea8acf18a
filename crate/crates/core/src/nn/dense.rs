use super::param::{HasParameters, Layer, LayerKind, Parameter};
use super::tensor::{gemm_nn, gemm_nt, gemm_tn, Tensor};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Affine map `y = x·W + b` over rows of `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Parameter,
    pub bias: Parameter,
}

impl Dense {
    pub fn new(input_dim: usize, output_dim: usize, rng: &mut SplitMix64) -> Self {
        Self {
            weight: Parameter::new(
                "weight",
                Tensor::xavier(&[input_dim, output_dim], input_dim, output_dim, rng),
            ),
            bias: Parameter::new("bias", Tensor::zeros(&[output_dim])),
        }
    }

    pub fn zeros(input_dim: usize, output_dim: usize) -> Self {
        Self {
            weight: Parameter::new("weight", Tensor::zeros(&[input_dim, output_dim])),
            bias: Parameter::new("bias", Tensor::zeros(&[output_dim])),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (n_in, n_out) = (self.input_dim(), self.output_dim());
        if x.cols() != n_in {
            return Err(Error::Shape(format!(
                "dense expects {n_in} inputs, got {:?}",
                x.shape()
            )));
        }
        let b = x.rows();
        let mut out = Tensor::zeros(&[b, n_out]);
        for i in 0..b {
            out.row_mut(i).copy_from_slice(self.bias.value.data());
        }
        gemm_nn(x.data(), self.weight.value.data(), out.data_mut(), b, n_in, n_out);
        Ok(out)
    }

    /// Accumulates parameter gradients and returns `d loss / d x`.
    pub fn backward(&mut self, x: &Tensor, dy: &Tensor) -> Tensor {
        let (n_in, n_out) = (self.input_dim(), self.output_dim());
        let b = x.rows();
        gemm_tn(x.data(), dy.data(), self.weight.grad.data_mut(), b, n_in, n_out);
        let bg = self.bias.grad.data_mut();
        for i in 0..b {
            for (g, d) in bg.iter_mut().zip(dy.row(i)) {
                *g += d;
            }
        }
        let mut dx = Tensor::zeros(&[b, n_in]);
        gemm_nt(dy.data(), self.weight.value.data(), dx.data_mut(), b, n_out, n_in);
        dx
    }
}

impl HasParameters for Dense {
    fn parameters(&self) -> Vec<&Parameter> {
        vec![&self.weight, &self.bias]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.weight, &mut self.bias]
    }
}

impl Layer for Dense {
    fn kind(&self) -> LayerKind {
        LayerKind::Dense
    }
}
