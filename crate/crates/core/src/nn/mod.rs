//! Dense f64 tensors, the LSTM cell with its backward pass, softmax and a
//! finite-difference gradient checker.

mod gradcheck;
mod lstm;
mod ops;
mod tensor;

use thiserror::Error;

pub use gradcheck::{grad_check, sample_coordinates};
pub use lstm::{cell_backward, cell_forward, cell_step, CellCache, LstmParams};
pub use ops::{dot, log_softmax, sigmoid, softmax};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("empty input")]
    EmptyInput,
    #[error("loss is not finite")]
    NonFiniteLoss,
}
