use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{Example, PAD_ID};

/// Padded `[size × max_len]` token-id matrix with true lengths and labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    /// Row-major; positions at or past `lengths[i]` hold [`PAD_ID`].
    pub ids: Vec<usize>,
    pub max_len: usize,
    pub lengths: Vec<usize>,
    pub labels: Vec<usize>,
    pub example_ids: Vec<String>,
}

impl Batch {
    /// Pads rows to `max(longest row, min_len)`.
    pub fn from_rows(rows: &[Vec<usize>], labels: &[usize], min_len: usize) -> Self {
        let max_len = rows.iter().map(Vec::len).max().unwrap_or(0).max(min_len).max(1);
        let mut ids = vec![PAD_ID; rows.len() * max_len];
        for (r, row) in rows.iter().enumerate() {
            ids[r * max_len..r * max_len + row.len()].copy_from_slice(row);
        }
        Batch {
            ids,
            max_len,
            lengths: rows.iter().map(Vec::len).collect(),
            labels: labels.to_vec(),
            example_ids: (0..rows.len()).map(|i| i.to_string()).collect(),
        }
    }

    pub fn from_examples(examples: &[&Example], min_len: usize) -> Self {
        let rows: Vec<Vec<usize>> = examples.iter().map(|e| e.ids.clone()).collect();
        let labels: Vec<usize> = examples.iter().map(|e| e.label).collect();
        let mut b = Self::from_rows(&rows, &labels, min_len);
        b.example_ids = examples.iter().map(|e| e.id.clone()).collect();
        b
    }

    pub fn size(&self) -> usize {
        self.lengths.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.ids[i * self.max_len..(i + 1) * self.max_len]
    }

    /// Token ids at time step `t` for every row.
    pub fn column(&self, t: usize) -> Vec<usize> {
        (0..self.size()).map(|i| self.ids[i * self.max_len + t]).collect()
    }

    /// The same batch padded out to `max_len` additional columns.
    pub fn padded_to(&self, max_len: usize) -> Self {
        let rows: Vec<Vec<usize>> = (0..self.size())
            .map(|i| self.row(i)[..self.lengths[i]].to_vec())
            .collect();
        let mut b = Self::from_rows(&rows, &self.labels, max_len.max(self.max_len));
        b.example_ids = self.example_ids.clone();
        b
    }
}

/// Splits `examples` into batches of `batch_size` (last one may be short),
/// optionally shuffled with a seeded ChaCha8 generator.
pub fn make_batches(
    examples: &[Example],
    batch_size: usize,
    shuffle_seed: Option<u64>,
    min_len: usize,
) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    if let Some(seed) = shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    Ok(order
        .chunks(batch_size)
        .map(|idx| {
            let refs: Vec<&Example> = idx.iter().map(|&i| &examples[i]).collect();
            Batch::from_examples(&refs, min_len)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(n: usize, len: usize) -> Example {
        Example {
            id: format!("t:{n}"),
            ids: vec![2 + n; len],
            label: n % 2,
            text: String::new(),
        }
    }

    #[test]
    fn sizes_and_last_partial() {
        let exs: Vec<Example> = (0..5).map(|i| ex(i, 3)).collect();
        let b = make_batches(&exs, 2, None, 5).unwrap();
        assert_eq!(b.iter().map(Batch::size).collect::<Vec<_>>(), vec![2, 2, 1]);
    }

    #[test]
    fn padding_width_rules() {
        let b = Batch::from_examples(&[&ex(0, 3), &ex(1, 7)], 5);
        assert_eq!(b.max_len, 7);
        assert_eq!(&b.row(0)[3..], &[PAD_ID; 4]);
        let b = Batch::from_examples(&[&ex(0, 3), &ex(1, 2)], 5);
        assert_eq!(b.max_len, 5);
        assert_eq!(b.lengths, vec![3, 2]);
    }

    #[test]
    fn same_seed_same_composition() {
        let exs: Vec<Example> = (0..20).map(|i| ex(i, 1 + i % 4)).collect();
        let a = make_batches(&exs, 3, Some(9), 5).unwrap();
        let b = make_batches(&exs, 3, Some(9), 5).unwrap();
        let c = make_batches(&exs, 3, Some(10), 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_batch_size_rejected() {
        assert!(make_batches(&[], 0, None, 5).is_err());
    }
}
