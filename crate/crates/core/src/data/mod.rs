//! Text ingestion: tokenizer, vocabulary, label maps, CSV reader,
//! GloVe-style embedding loader, padded batching and a synthetic
//! separable corpus for desk-scale runs.

mod batch;
mod dataset;
mod embeddings;
mod labels;
mod synth;
mod tokenize;
mod vocab;

pub use batch::{make_batches, Batch};
pub use dataset::{encode_records, read_labeled_csv, Column, CsvSchema, Example, Record};
pub use embeddings::{load_embeddings, Coverage};
pub use labels::LabelMap;
pub use synth::{synth_dataset, write_csv, SynthData};
pub use tokenize::{detokenize, tokenize, tokenize_checked};
pub use vocab::{Vocabulary, PAD_ID, PAD_TOKEN, UNK_ID, UNK_TOKEN};
