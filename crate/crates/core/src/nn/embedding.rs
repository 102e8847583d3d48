use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Graph, Tensor};

/// Initialization half-width for embedding rows not supplied by a
/// pretrained file.
pub const EMBEDDING_INIT_RANGE: f64 = 0.1;

/// `vocab_size × dim` lookup table whose `pad_id` row is held at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub weights: Arc<Tensor>,
    pub pad_id: usize,
}

impl EmbeddingTable {
    pub fn new(weights: Tensor, pad_id: usize) -> Result<Self> {
        let (v, _) = weights.dims2("embedding")?;
        if pad_id >= v {
            return Err(Error::Input(format!("pad id {pad_id} outside vocabulary of {v}")));
        }
        let mut table = EmbeddingTable {
            weights: Arc::new(weights),
            pad_id,
        };
        table.zero_pad_row();
        Ok(table)
    }

    /// Rows drawn from `uniform(−0.1, 0.1)`, pad row zero.
    pub fn random<R: Rng + ?Sized>(vocab_size: usize, dim: usize, pad_id: usize, rng: &mut R) -> Result<Self> {
        let w = Tensor::uniform(&[vocab_size, dim], -EMBEDDING_INIT_RANGE, EMBEDDING_INIT_RANGE, rng);
        Self::new(w, pad_id)
    }

    pub fn vocab_size(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn zero_pad_row(&mut self) {
        let d = self.dim();
        let p = self.pad_id;
        Arc::make_mut(&mut self.weights).data_mut()[p * d..(p + 1) * d].fill(0.0);
    }

    /// Zeroes the pad row of a gradient for this table.
    pub fn mask_grad(&self, grad: &mut Tensor) {
        let d = self.dim();
        grad.data_mut()[self.pad_id * d..(self.pad_id + 1) * d].fill(0.0);
    }

    /// `[ids.len() × dim]` rows for the given token ids.
    pub fn lookup<G: Graph>(&self, g: &mut G, ids: &[usize]) -> Result<G::Value> {
        let table = g.param(&self.weights);
        g.gather_rows(&table, ids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::tensor::Eval;

    #[test]
    fn pad_row_is_zero_and_rest_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = EmbeddingTable::random(10, 4, 0, &mut rng).unwrap();
        assert!(t.weights.row(0).iter().all(|&v| v == 0.0));
        assert!(t.weights.data()[4..].iter().all(|v| v.abs() < 0.1));
    }

    #[test]
    fn lookup_rejects_out_of_vocab() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = EmbeddingTable::random(10, 4, 0, &mut rng).unwrap();
        assert!(matches!(t.lookup(&mut Eval, &[10]), Err(Error::Input(_))));
    }
}
