use super::activation::{sigmoid, tanh};
use super::param::{HasParameters, Layer, LayerKind, Parameter};
use super::tensor::{gemm_nn, gemm_nt, gemm_tn, Tensor};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Gated recurrent unit:
///
/// ```text
/// z = σ(x·Wz + h·Uz + bz)          update gate
/// r = σ(x·Wr + h·Ur + br)          reset gate
/// n = tanh(x·Wn + (r ⊙ h)·Un + bn) candidate
/// h' = (1 - z) ⊙ n + z ⊙ h
/// ```
///
/// `w_input` packs `[Wz | Wr | Wn]`, `w_gates` packs `[Uz | Ur]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub w_input: Parameter,
    pub w_gates: Parameter,
    pub w_candidate: Parameter,
    pub bias: Parameter,
}

/// Forward intermediates needed by [`GruCell::backward`].
#[derive(Debug, Clone)]
pub struct GruCache {
    x: Tensor,
    h_prev: Tensor,
    z: Tensor,
    r: Tensor,
    n: Tensor,
    rh: Tensor,
}

impl GruCell {
    pub fn new(input_dim: usize, hidden_dim: usize, rng: &mut SplitMix64) -> Self {
        let h = hidden_dim;
        Self {
            w_input: Parameter::new("w_input", Tensor::xavier(&[input_dim, 3 * h], input_dim, 3 * h, rng)),
            w_gates: Parameter::new("w_gates", Tensor::xavier(&[h, 2 * h], h, 2 * h, rng)),
            w_candidate: Parameter::new("w_candidate", Tensor::xavier(&[h, h], h, h, rng)),
            bias: Parameter::new("bias", Tensor::zeros(&[3 * h])),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.value.shape()[0]
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_candidate.value.shape()[0]
    }

    pub fn forward(&self, x: &Tensor, h_prev: &Tensor) -> Result<(Tensor, GruCache)> {
        let (d, h) = (self.input_dim(), self.hidden_dim());
        let b = x.rows();
        if x.cols() != d || h_prev.cols() != h || h_prev.rows() != b {
            return Err(Error::Shape(format!(
                "gru cell ({d} -> {h}) got x {:?}, h {:?}",
                x.shape(),
                h_prev.shape()
            )));
        }
        let mut ax = Tensor::zeros(&[b, 3 * h]);
        for i in 0..b {
            ax.row_mut(i).copy_from_slice(self.bias.value.data());
        }
        gemm_nn(x.data(), self.w_input.value.data(), ax.data_mut(), b, d, 3 * h);
        let mut ah = Tensor::zeros(&[b, 2 * h]);
        gemm_nn(h_prev.data(), self.w_gates.value.data(), ah.data_mut(), b, h, 2 * h);

        let mut z = Tensor::zeros(&[b, h]);
        let mut r = Tensor::zeros(&[b, h]);
        let mut rh = Tensor::zeros(&[b, h]);
        for i in 0..b {
            let (axr, ahr, hp) = (ax.row(i), ah.row(i), h_prev.row(i));
            for j in 0..h {
                let zj = sigmoid(axr[j] + ahr[j]);
                let rj = sigmoid(axr[h + j] + ahr[h + j]);
                z.row_mut(i)[j] = zj;
                r.row_mut(i)[j] = rj;
                rh.row_mut(i)[j] = rj * hp[j];
            }
        }
        let mut an = Tensor::zeros(&[b, h]);
        gemm_nn(rh.data(), self.w_candidate.value.data(), an.data_mut(), b, h, h);
        let mut n = Tensor::zeros(&[b, h]);
        let mut h_new = Tensor::zeros(&[b, h]);
        for i in 0..b {
            for j in 0..h {
                let nj = tanh(ax.row(i)[2 * h + j] + an.row(i)[j]);
                let zj = z.row(i)[j];
                n.row_mut(i)[j] = nj;
                h_new.row_mut(i)[j] = (1.0 - zj) * nj + zj * h_prev.row(i)[j];
            }
        }
        let cache = GruCache {
            x: x.clone(),
            h_prev: h_prev.clone(),
            z,
            r,
            n,
            rh,
        };
        Ok((h_new, cache))
    }

    /// Accumulates parameter gradients; returns `(dx, dh_prev)`.
    pub fn backward(&mut self, cache: &GruCache, dh: &Tensor) -> (Tensor, Tensor) {
        let (d, h) = (self.input_dim(), self.hidden_dim());
        let b = dh.rows();
        let mut da = Tensor::zeros(&[b, 3 * h]);
        let mut da_n = Tensor::zeros(&[b, h]);
        let mut dh_prev = Tensor::zeros(&[b, h]);
        for i in 0..b {
            for j in 0..h {
                let g = dh.row(i)[j];
                let (z, n, hp) = (cache.z.row(i)[j], cache.n.row(i)[j], cache.h_prev.row(i)[j]);
                let dn = g * (1.0 - z);
                let dz = g * (hp - n);
                dh_prev.row_mut(i)[j] = g * z;
                let dan = dn * (1.0 - n * n);
                da_n.row_mut(i)[j] = dan;
                da.row_mut(i)[2 * h + j] = dan;
                da.row_mut(i)[j] = dz * z * (1.0 - z);
            }
        }
        gemm_tn(cache.rh.data(), da_n.data(), self.w_candidate.grad.data_mut(), b, h, h);
        let mut d_rh = Tensor::zeros(&[b, h]);
        gemm_nt(da_n.data(), self.w_candidate.value.data(), d_rh.data_mut(), b, h, h);
        for i in 0..b {
            for j in 0..h {
                let drh = d_rh.row(i)[j];
                let r = cache.r.row(i)[j];
                let dr = drh * cache.h_prev.row(i)[j];
                dh_prev.row_mut(i)[j] += drh * r;
                da.row_mut(i)[h + j] = dr * r * (1.0 - r);
            }
        }
        // recurrent gate weights see only the z and r pre-activations
        let mut da_zr = Tensor::zeros(&[b, 2 * h]);
        for i in 0..b {
            da_zr.row_mut(i).copy_from_slice(&da.row(i)[..2 * h]);
        }
        gemm_tn(
            cache.h_prev.data(),
            da_zr.data(),
            self.w_gates.grad.data_mut(),
            b,
            h,
            2 * h,
        );
        gemm_nt(da_zr.data(), self.w_gates.value.data(), dh_prev.data_mut(), b, 2 * h, h);

        gemm_tn(cache.x.data(), da.data(), self.w_input.grad.data_mut(), b, d, 3 * h);
        let bg = self.bias.grad.data_mut();
        for i in 0..b {
            for (g, v) in bg.iter_mut().zip(da.row(i)) {
                *g += v;
            }
        }
        let mut dx = Tensor::zeros(&[b, d]);
        gemm_nt(da.data(), self.w_input.value.data(), dx.data_mut(), b, 3 * h, d);
        (dx, dh_prev)
    }
}

impl HasParameters for GruCell {
    fn parameters(&self) -> Vec<&Parameter> {
        vec![&self.w_input, &self.w_gates, &self.w_candidate, &self.bias]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![
            &mut self.w_input,
            &mut self.w_gates,
            &mut self.w_candidate,
            &mut self.bias,
        ]
    }
}

impl Layer for GruCell {
    fn kind(&self) -> LayerKind {
        LayerKind::GruCell
    }
}
