use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{tokenize_checked, LabelMap, Vocabulary};

/// A column addressed by zero-based position or, with headers, by name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Column {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvSchema {
    pub label_column: Column,
    /// Joined with a single space when more than one.
    pub text_columns: Vec<Column>,
    pub has_headers: bool,
    pub delimiter: char,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            label_column: Column::Index(0),
            text_columns: vec![Column::Index(1)],
            has_headers: false,
            delimiter: ',',
        }
    }
}

/// One tokenized row, before vocabulary lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    /// Stable id: `<split>:<zero-based data row>`.
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub label: usize,
}

/// A vocabulary-encoded record.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub ids: Vec<usize>,
    pub label: usize,
    pub text: String,
}

fn resolve(col: &Column, headers: Option<&csv::StringRecord>, path: &Path) -> Result<usize> {
    match (col, headers) {
        (Column::Index(i), _) => Ok(*i),
        (Column::Name(n), Some(h)) => h
            .iter()
            .position(|x| x == n)
            .ok_or_else(|| Error::format(path, 1, format!("no column named `{n}`"))),
        (Column::Name(n), None) => Err(Error::Config(format!(
            "column `{n}` referenced by name but schema has no header row"
        ))),
    }
}

/// Reads `label,text…` rows. New label strings get the next class id
/// when `allow_new_labels`; otherwise an unknown label is an input error.
pub fn read_labeled_csv(
    path: &Path,
    schema: &CsvSchema,
    split: &str,
    labels: &mut LabelMap,
    allow_new_labels: bool,
) -> Result<Vec<Record>> {
    if !schema.delimiter.is_ascii() {
        return Err(Error::Config("CSV delimiter must be ASCII".into()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(schema.has_headers)
        .delimiter(schema.delimiter as u8)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let headers = if schema.has_headers {
        Some(
            rdr.headers()
                .map_err(|e| Error::format(path, 1, e.to_string()))?
                .clone(),
        )
    } else {
        None
    };
    let label_col = resolve(&schema.label_column, headers.as_ref(), path)?;
    let text_cols: Vec<usize> = schema
        .text_columns
        .iter()
        .map(|c| resolve(c, headers.as_ref(), path))
        .collect::<Result<_>>()?;
    if text_cols.is_empty() {
        return Err(Error::Config("schema needs at least one text column".into()));
    }

    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let line_of = |r: &csv::StringRecord| r.position().map_or(row + 1, |p| p.line() as usize);
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(row + 1, |p| p.line() as usize);
            Error::format(path, line, format!("row {row}: {e}"))
        })?;
        let field = |i: usize| {
            rec.get(i).ok_or_else(|| {
                Error::format(path, line_of(&rec), format!("row {row}: missing column {i}"))
            })
        };
        let label_str = field(label_col)?.trim();
        let label = match labels.get(label_str) {
            Some(id) => id,
            None if allow_new_labels => labels.get_or_insert(label_str),
            None => {
                return Err(Error::Input(format!(
                    "{}: row {row}: label `{label_str}` not in label map",
                    path.display()
                )))
            }
        };
        let text = text_cols
            .iter()
            .map(|&i| field(i))
            .collect::<Result<Vec<_>>>()?
            .join(" ");
        let tokens = tokenize_checked(&text)
            .map_err(|e| Error::format(path, line_of(&rec), format!("row {row}: {e}")))?;
        out.push(Record {
            id: format!("{split}:{row}"),
            text,
            tokens,
            label,
        });
    }
    Ok(out)
}

/// Vocabulary lookup with truncation to `max_len` tokens.
pub fn encode_records(records: &[Record], vocab: &Vocabulary, max_len: usize) -> Vec<Example> {
    records
        .iter()
        .map(|r| {
            let n = r.tokens.len().min(max_len.max(1));
            Example {
                id: r.id.clone(),
                ids: vocab.encode(&r.tokens[..n]),
                label: r.label,
                text: r.text.clone(),
            }
        })
        .collect()
}
