use super::activation::{sigmoid, tanh};
use super::param::{HasParameters, Layer, LayerKind, Parameter};
use super::tensor::{gemm_nn, gemm_nt, gemm_tn, Tensor};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Long short-term memory cell with gates packed `[i | f | g | o]`:
///
/// ```text
/// a = x·Wx + h·Wh + b
/// i, f, o = σ(a_i), σ(a_f), σ(a_o);  g = tanh(a_g)
/// c' = f ⊙ c + i ⊙ g
/// h' = o ⊙ tanh(c')
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub w_input: Parameter,
    pub w_hidden: Parameter,
    pub bias: Parameter,
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    pub(crate) x: Tensor,
    pub(crate) h_prev: Tensor,
    pub(crate) c_prev: Tensor,
    /// post-activation gates, `[i | f | g | o]`
    pub(crate) gates: Tensor,
    pub(crate) tanh_c: Tensor,
}

impl LstmCell {
    pub fn new(input_dim: usize, hidden_dim: usize, rng: &mut SplitMix64) -> Self {
        let h = hidden_dim;
        Self {
            w_input: Parameter::new("w_input", Tensor::xavier(&[input_dim, 4 * h], input_dim, 4 * h, rng)),
            w_hidden: Parameter::new("w_hidden", Tensor::xavier(&[h, 4 * h], h, 4 * h, rng)),
            bias: Parameter::new("bias", Tensor::zeros(&[4 * h])),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.value.shape()[0]
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hidden.value.shape()[0]
    }

    /// Sets the forget-gate slice of the bias.
    pub fn set_forget_bias(&mut self, value: f64) {
        let h = self.hidden_dim();
        self.bias.value.data_mut()[h..2 * h].iter_mut().for_each(|b| *b = value);
    }

    pub fn forward(&self, x: &Tensor, h_prev: &Tensor, c_prev: &Tensor) -> Result<(Tensor, Tensor, LstmCache)> {
        let (d, h) = (self.input_dim(), self.hidden_dim());
        let b = x.rows();
        if x.cols() != d || h_prev.cols() != h || c_prev.shape() != h_prev.shape() || h_prev.rows() != b {
            return Err(Error::Shape(format!(
                "lstm cell ({d} -> {h}) got x {:?}, h {:?}, c {:?}",
                x.shape(),
                h_prev.shape(),
                c_prev.shape()
            )));
        }
        let mut gates = Tensor::zeros(&[b, 4 * h]);
        for i in 0..b {
            gates.row_mut(i).copy_from_slice(self.bias.value.data());
        }
        gemm_nn(x.data(), self.w_input.value.data(), gates.data_mut(), b, d, 4 * h);
        gemm_nn(h_prev.data(), self.w_hidden.value.data(), gates.data_mut(), b, h, 4 * h);

        let mut c = Tensor::zeros(&[b, h]);
        let mut tanh_c = Tensor::zeros(&[b, h]);
        let mut h_new = Tensor::zeros(&[b, h]);
        for i in 0..b {
            let row = gates.row_mut(i);
            for j in 0..h {
                row[j] = sigmoid(row[j]);
                row[h + j] = sigmoid(row[h + j]);
                row[2 * h + j] = tanh(row[2 * h + j]);
                row[3 * h + j] = sigmoid(row[3 * h + j]);
            }
            let row = gates.row(i);
            for j in 0..h {
                let cj = row[h + j] * c_prev.row(i)[j] + row[j] * row[2 * h + j];
                let tc = tanh(cj);
                c.row_mut(i)[j] = cj;
                tanh_c.row_mut(i)[j] = tc;
                h_new.row_mut(i)[j] = row[3 * h + j] * tc;
            }
        }
        let cache = LstmCache {
            x: x.clone(),
            h_prev: h_prev.clone(),
            c_prev: c_prev.clone(),
            gates,
            tanh_c,
        };
        Ok((h_new, c, cache))
    }

    /// Accumulates parameter gradients; returns `(dx, dh_prev, dc_prev)`.
    pub fn backward(&mut self, cache: &LstmCache, dh: &Tensor, dc: &Tensor) -> (Tensor, Tensor, Tensor) {
        let (d, h) = (self.input_dim(), self.hidden_dim());
        let b = dh.rows();
        let mut da = Tensor::zeros(&[b, 4 * h]);
        let mut dc_prev = Tensor::zeros(&[b, h]);
        for i in 0..b {
            let g = cache.gates.row(i);
            for j in 0..h {
                let (ig, fg, gg, og) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let tc = cache.tanh_c.row(i)[j];
                let dhj = dh.row(i)[j];
                let dcj = dc.row(i)[j] + dhj * og * (1.0 - tc * tc);
                let row = da.row_mut(i);
                row[j] = dcj * gg * ig * (1.0 - ig);
                row[h + j] = dcj * cache.c_prev.row(i)[j] * fg * (1.0 - fg);
                row[2 * h + j] = dcj * ig * (1.0 - gg * gg);
                row[3 * h + j] = dhj * tc * og * (1.0 - og);
                dc_prev.row_mut(i)[j] = dcj * fg;
            }
        }
        gemm_tn(cache.x.data(), da.data(), self.w_input.grad.data_mut(), b, d, 4 * h);
        gemm_tn(
            cache.h_prev.data(),
            da.data(),
            self.w_hidden.grad.data_mut(),
            b,
            h,
            4 * h,
        );
        let bg = self.bias.grad.data_mut();
        for i in 0..b {
            for (g, v) in bg.iter_mut().zip(da.row(i)) {
                *g += v;
            }
        }
        let mut dx = Tensor::zeros(&[b, d]);
        gemm_nt(da.data(), self.w_input.value.data(), dx.data_mut(), b, 4 * h, d);
        let mut dh_prev = Tensor::zeros(&[b, h]);
        gemm_nt(da.data(), self.w_hidden.value.data(), dh_prev.data_mut(), b, 4 * h, h);
        (dx, dh_prev, dc_prev)
    }
}

impl HasParameters for LstmCell {
    fn parameters(&self) -> Vec<&Parameter> {
        vec![&self.w_input, &self.w_hidden, &self.bias]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.w_input, &mut self.w_hidden, &mut self.bias]
    }
}

impl Layer for LstmCell {
    fn kind(&self) -> LayerKind {
        LayerKind::LstmCell
    }
}
