use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{LabelMap, Record};

/// Two-class synthetic corpus, split 80/20.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub train: Vec<Record>,
    pub test: Vec<Record>,
    /// `"0" → 0`, `"1" → 1`.
    pub labels: LabelMap,
}

const MIN_LEN: usize = 3;
const MAX_LEN: usize = 16;

/// `n` sequences over `vocab_size` content tokens. A tenth of them (at
/// least one) are markers `m*`; the rest are noise `w*`. Label 1 exactly
/// when a sequence contains at least one marker, so the Bayes error is 0.
pub fn synth_dataset(n: usize, vocab_size: usize, seed: u64) -> Result<SynthData> {
    if n < 2 {
        return Err(Error::Config("synthetic dataset needs n >= 2".into()));
    }
    if vocab_size < 2 {
        return Err(Error::Config("synthetic vocabulary needs at least 2 tokens".into()));
    }
    let markers = (vocab_size / 10).max(1);
    let noise = vocab_size - markers;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_train = (n * 4).div_ceil(5).min(n - 1);

    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(n - n_train);
    for i in 0..n {
        let len = rng.gen_range(MIN_LEN..=MAX_LEN);
        let mut toks: Vec<String> = (0..len).map(|_| format!("w{}", rng.gen_range(0..noise))).collect();
        let label = usize::from(rng.gen_bool(0.5));
        if label == 1 {
            let k = rng.gen_range(1..=2.min(len));
            for _ in 0..k {
                let pos = rng.gen_range(0..len);
                toks[pos] = format!("m{}", rng.gen_range(0..markers));
            }
        }
        let (split, row, out) = if i < n_train {
            ("train", i, &mut train)
        } else {
            ("test", i - n_train, &mut test)
        };
        out.push(Record {
            id: format!("{split}:{row}"),
            text: toks.join(" "),
            tokens: toks,
            label,
        });
    }
    Ok(SynthData {
        train,
        test,
        labels: LabelMap::from_names(["0", "1"]),
    })
}

/// Writes records as `label,text` CSV rows (no header).
pub fn write_csv(path: &Path, records: &[Record], labels: &LabelMap) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    for r in records {
        let name = labels
            .names()
            .get(r.label)
            .ok_or_else(|| Error::Internal(format!("label {} not in map", r.label)))?;
        w.write_record([name.as_str(), r.text.as_str()])
            .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
