//! Dense-tensor arithmetic with reverse-mode gradient accumulation.
//!
//! Everything upstream (encoder, transducer, training) is built from the
//! closed op set recorded on [`Tape`]. Forward math lives in [`ops`] as pure
//! functions so that inference paths (streaming sessions, beam search) can
//! call them without recording.

mod gradcheck;
pub mod ops;
mod rng;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, max_rel_err};
pub use ops::{log_sum_exp, Mask};
pub use rng::SplitMix64;
pub use tape::{Gradients, NodeId, Tape};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("empty input to {0}")]
    EmptyInput(&'static str),
    #[error("fully masked row {row} in masked_softmax")]
    FullyMaskedRow { row: usize },
    #[error("non-finite values produced by {op}")]
    NonFinite { op: &'static str },
    #[error("backward requires a scalar loss node, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("token id {id} out of vocabulary (size {vocab})")]
    OutOfVocab { id: usize, vocab: usize },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, NumericsError>;
