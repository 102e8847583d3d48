//! Line-delimited JSON reports.
//!
//! `metrics.jsonl` holds one `"epoch"` record per epoch and a closing
//! `"summary"` record. Everything in it is a function of config and seed
//! only. Wall-clock numbers go to a sibling `timings.jsonl` so the metrics
//! file stays byte-reproducible.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_accuracy: f64,
    pub teacher_agreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub model: String,
    pub mode: String,
    pub param_count: usize,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_test_accuracy: f64,
    pub final_test_accuracy: f64,
    pub final_teacher_agreement: Option<f64>,
    /// `"completed"`, `"early_stop"` or `"diverged"`.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub epoch: usize,
    pub train_seconds: f64,
    pub eval_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub epochs: Vec<EpochRecord>,
    pub summary: Option<Summary>,
    pub timings: Vec<Timing>,
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum Line<'a> {
    Epoch(&'a EpochRecord),
    Summary(&'a Summary),
}

impl MetricsReport {
    pub fn push(&mut self, rec: EpochRecord) -> Result<()> {
        if let Some(last) = self.epochs.last() {
            if rec.epoch <= last.epoch {
                return Err(Error::Internal(format!("epoch {} after epoch {}", rec.epoch, last.epoch)));
            }
        }
        if !(0.0..=1.0).contains(&rec.test_accuracy) {
            return Err(Error::Internal(format!("accuracy {} outside [0, 1]", rec.test_accuracy)));
        }
        self.epochs.push(rec);
        Ok(())
    }

    pub fn render_metrics(&self) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&json_line(&Line::Epoch(e)));
        }
        if let Some(s) = &self.summary {
            out.push_str(&json_line(&Line::Summary(s)));
        }
        out
    }

    pub fn render_timings(&self) -> String {
        self.timings.iter().map(json_line).collect()
    }

    /// Writes `<stem>.metrics.jsonl` and `<stem>.timings.jsonl` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        write_file(&dir.join(format!("{stem}.metrics.jsonl")), &self.render_metrics())?;
        write_file(&dir.join(format!("{stem}.timings.jsonl")), &self.render_timings())
    }
}

pub(crate) fn json_line<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string(v).expect("report records serialize");
    s.push('\n');
    s
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Accuracy and confusion counts for one model on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub examples: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub labels: Vec<String>,
    /// `confusion[gold][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub teacher_agreement: Option<f64>,
}

impl EvalReport {
    pub fn from_predictions(model: &str, labels: &[String], gold: &[usize], predicted: &[usize]) -> Result<Self> {
        let k = labels.len();
        if gold.len() != predicted.len() {
            return Err(Error::Internal("prediction count differs from gold count".into()));
        }
        let mut confusion = vec![vec![0usize; k]; k];
        for (&g, &p) in gold.iter().zip(predicted) {
            if g >= k || p >= k {
                return Err(Error::Config(format!("class id {} outside label map of {k}", g.max(p))));
            }
            confusion[g][p] += 1;
        }
        let correct = (0..k).map(|c| confusion[c][c]).sum();
        let n = gold.len();
        Ok(EvalReport {
            model: model.to_string(),
            examples: n,
            correct,
            accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
            labels: labels.to_vec(),
            confusion,
            teacher_agreement: None,
        })
    }

    pub fn to_json_line(&self) -> String {
        json_line(self)
    }
}
