//! Text classification with a bidirectional-LSTM teacher and a
//! max-over-time CNN student, trained with a blended soft/hard
//! cross-entropy objective, plus an inference-latency harness.
//!
//! Everything runs on an in-crate `f64` tensor library with tape-based
//! reverse-mode differentiation ([`tensor`]). Models are written once
//! against the [`tensor::Graph`] trait and run either on a recording
//! [`tensor::Tape`] (training) or on the allocation-light
//! [`tensor::Eval`] backend (inference).

pub mod bench;
pub mod data;
pub mod distill;
pub mod error;
pub mod nn;
pub mod par;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{Tensor, Tape, Var};
