use super::param::{HasParameters, Layer, LayerKind, Parameter};
use super::tensor::{gemm_nn, gemm_nt, gemm_tn, Tensor};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Valid (unpadded) 1-D cross-correlation over time:
/// `y[t, k] = b[k] + Σ_j Σ_v x[t + j, v] · kernel[j, v, k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    /// `[width, input_dim, filters]`
    pub kernel: Parameter,
    pub bias: Parameter,
}

impl Conv1d {
    pub fn new(input_dim: usize, filters: usize, width: usize, rng: &mut SplitMix64) -> Self {
        let fan_in = width * input_dim;
        Self {
            kernel: Parameter::new(
                "kernel",
                Tensor::xavier(&[width, input_dim, filters], fan_in, filters, rng),
            ),
            bias: Parameter::new("bias", Tensor::zeros(&[filters])),
        }
    }

    pub fn width(&self) -> usize {
        self.kernel.value.shape()[0]
    }

    pub fn input_dim(&self) -> usize {
        self.kernel.value.shape()[1]
    }

    pub fn filters(&self) -> usize {
        self.kernel.value.shape()[2]
    }

    /// `x` is `[T × input_dim]`; output is `[(T - width + 1) × filters]`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (w, v, k) = (self.width(), self.input_dim(), self.filters());
        if x.shape().len() != 2 || x.cols() != v {
            return Err(Error::Shape(format!("conv1d expects [T x {v}], got {:?}", x.shape())));
        }
        let t = x.rows();
        if t < w {
            return Err(Error::Shape(format!(
                "conv1d kernel width {w} exceeds sequence length {t}"
            )));
        }
        let l = t - w + 1;
        let mut out = Tensor::zeros(&[l, k]);
        for i in 0..l {
            out.row_mut(i).copy_from_slice(self.bias.value.data());
        }
        // consecutive rows of x are contiguous, so window i is x.data[i*v .. (i+w)*v]
        for i in 0..l {
            let window = &x.data()[i * v..(i + w) * v];
            gemm_nn(window, self.kernel.value.data(), out.row_mut(i), 1, w * v, k);
        }
        Ok(out)
    }

    /// Accumulates kernel and bias gradients; returns `d loss / d x`.
    pub fn backward(&mut self, x: &Tensor, dy: &Tensor) -> Tensor {
        let (w, v, k) = (self.width(), self.input_dim(), self.filters());
        let t = x.rows();
        let l = dy.rows();
        let mut dx = Tensor::zeros(&[t, v]);
        let bg = self.bias.grad.data_mut();
        for i in 0..l {
            for (g, d) in bg.iter_mut().zip(dy.row(i)) {
                *g += d;
            }
        }
        for i in 0..l {
            let window = &x.data()[i * v..(i + w) * v];
            gemm_tn(window, dy.row(i), self.kernel.grad.data_mut(), 1, w * v, k);
            gemm_nt(
                dy.row(i),
                self.kernel.value.data(),
                &mut dx.data_mut()[i * v..(i + w) * v],
                1,
                k,
                w * v,
            );
        }
        dx
    }
}

impl HasParameters for Conv1d {
    fn parameters(&self) -> Vec<&Parameter> {
        vec![&self.kernel, &self.bias]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.kernel, &mut self.bias]
    }
}

impl Layer for Conv1d {
    fn kind(&self) -> LayerKind {
        LayerKind::Conv1d
    }
}
