use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{EmbeddingTable, EMBEDDING_INIT_RANGE};
use crate::tensor::Tensor;

use super::{Vocabulary, PAD_ID};

/// How much of the vocabulary a pretrained file covered (reserved ids
/// excluded).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage {
    pub found: usize,
    pub total: usize,
}

impl Coverage {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.found as f64 / self.total as f64
        }
    }
}

/// Loads GloVe-style text vectors (`token v1 … vd` per line) for the
/// tokens in `vocab`. Missing tokens keep a `uniform(−0.1, 0.1)` row and
/// the pad row is zero. `dim`, when given, must match the file.
pub fn load_embeddings<R: Rng + ?Sized>(
    path: &Path,
    vocab: &Vocabulary,
    dim: Option<usize>,
    rng: &mut R,
) -> Result<(EmbeddingTable, Coverage)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; vocab.len()];
    let mut file_dim = dim;
    for (i, line) in reader.lines().enumerate() {
        let ln = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut parts = line.split_ascii_whitespace();
        let Some(token) = parts.next() else { continue };
        let values: Vec<f64> = parts
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::format(path, ln, format!("bad number: {e}")))?;
        match file_dim {
            None => file_dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::format(
                    path,
                    ln,
                    format!("expected {d} values, found {}", values.len()),
                ))
            }
            _ => {}
        }
        if vocab.contains(token) {
            let id = vocab.id(token);
            if id != PAD_ID && id > 1 && rows[id].is_none() {
                rows[id] = Some(values);
            }
        }
    }
    let d = file_dim.filter(|&d| d > 0).ok_or_else(|| Error::format(path, 1, "no vectors in file"))?;
    let mut table = Tensor::uniform(&[vocab.len(), d], -EMBEDDING_INIT_RANGE, EMBEDDING_INIT_RANGE, rng);
    let mut found = 0;
    for (id, row) in rows.into_iter().enumerate() {
        if let Some(v) = row {
            table.data_mut()[id * d..(id + 1) * d].copy_from_slice(&v);
            found += 1;
        }
    }
    let cov = Coverage {
        found,
        total: vocab.len().saturating_sub(2),
    };
    Ok((EmbeddingTable::new(table, PAD_ID)?, cov))
}
