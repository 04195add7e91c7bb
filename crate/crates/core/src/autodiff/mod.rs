//! Minimal dense tensor engine with reverse-mode gradients, a
//! finite-difference checker and the Adam update.

mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, GradCheckReport};
pub use params::{AdamConfig, ParamStore};
pub(crate) use params::Reader;
pub use tape::{logistic, softmax_rows, CustomOp, Tape, Var};
pub(crate) use tape::cosine_sim_matrix;
pub use tensor::Tensor;
