//! Minimal differentiable core: dense, recurrent and temporal-convolution
//! layers with hand-written backward passes, losses, optimizers and a
//! finite-difference gradient checker. Everything is `f64`.

mod activation;
mod conv1d;
mod dense;
mod gradcheck;
mod gru;
mod harness;
mod loss;
mod lstm;
mod optim;
mod param;
mod recurrent;
mod tensor;

pub use activation::{relu, relu_tensor, sigmoid, sigmoid_tensor, softmax, softmax_in_place, tanh, tanh_tensor};
pub use conv1d::Conv1d;
pub use dense::Dense;
pub use gradcheck::{gradient_check, relative_error, GradCheck, MAX_PROBES};
pub use gru::{GruCache, GruCell};
pub use harness::{check_layer, CheckTarget, FD_STEP};
pub use loss::{bce, bce_with_logits, cce, softmax_cross_entropy, PROB_EPS};
pub use lstm::{LstmCache, LstmCell};
pub use optim::{clip_grad_norm, Adam, Sgd};
pub use param::{HasParameters, Layer, LayerKind, Parameter};
pub use recurrent::{backprop_through_time, EncoderCache, HeadLoss, RecurrentEncoder, SeqBatch};
pub use tensor::Tensor;
