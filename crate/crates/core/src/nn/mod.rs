//! Layers used by the teacher and student: embedding lookup, LSTM cell and
//! bidirectional encoder, full-width text convolution with max-over-time
//! pooling, affine head, inverted dropout, and the checkpoint format.

pub mod checkpoint;
mod conv;
mod dropout;
mod embedding;
mod linear;
mod lstm;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::Tensor;

pub use checkpoint::Checkpoint;
pub use conv::{conv_text, ConvFilterBank, ConvWeights};
pub use dropout::dropout;
pub use embedding::{EmbeddingTable, EMBEDDING_INIT_RANGE};
pub use linear::{linear, Linear, LinearWeights};
pub use lstm::{bilstm_encode, bilstm_encode_steps, lstm_cell, LstmParams, LstmState, LstmWeights, GATES as LSTM_GATES};

/// Forward-pass mode. Training carries the dropout RNG.
pub enum Mode<'r> {
    Eval,
    Train(&'r mut ChaCha8Rng),
}

impl Mode<'_> {
    pub fn is_training(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

/// `uniform(−1/√fan_in, 1/√fan_in)`.
pub(crate) fn fan_in_uniform<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Tensor::uniform(shape, -bound, bound, rng)
}
