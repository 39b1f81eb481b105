//! Differentiable-compute substrate: dense `f64` tensors, a reverse-mode
//! gradient tape over the operator set the policy needs, initializers,
//! optimizers, gradient clipping, and checkpoint persistence. Everything
//! runs in 64-bit floats; the networks here are small enough that exact
//! gradient checking and reproducibility matter more than speed.

mod checkpoint;
mod gradcheck;
mod init;
mod lstm;
mod optim;
mod store;
mod tape;
mod tensor;

pub use checkpoint::{load_checkpoint, load_checkpoint_expecting, save_checkpoint};
pub use gradcheck::grad_check;
pub use init::xavier_init;
pub use lstm::{lstm_cell, LstmParams};
pub use optim::{clip_global_norm, Optimizer, OptimKind};
pub use store::{accumulate_grads, global_norm, GradMap, ParamStore};
pub use tape::{NodeId, Tape};
pub use tensor::{gemm, matmul, Tensor};
