use std::path::PathBuf;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Batch, PAD_ID, UNK_ID};
use crate::distill::{ensemble, Classifier, StudentModel, TeacherModel};
use crate::error::{Error, Result};
use crate::par;
use crate::train::rng_for;

pub const MIN_ITERATIONS: usize = 30;
pub const MIN_WARMUP: usize = 5;
/// An iteration shorter than this many timer ticks is not measurable.
pub const MIN_TICKS_PER_ITERATION: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Defaults to `<out_dir>/teacher.ckpt`.
    pub teacher: Option<PathBuf>,
    /// Defaults to `<out_dir>/student-blended.ckpt`.
    pub student: Option<PathBuf>,
    pub seq_lens: Vec<usize>,
    pub batch_size: usize,
    pub warmup: usize,
    pub iterations: usize,
    pub repetitions: usize,
    /// Also time both models together plus the posterior mix.
    pub ensemble_row: bool,
    /// Add a separately labeled multi-worker student row.
    pub parallel_row: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            teacher: None,
            student: None,
            seq_lens: vec![100, 200, 400],
            batch_size: 64,
            warmup: MIN_WARMUP,
            iterations: MIN_ITERATIONS,
            repetitions: 3,
            ensemble_row: true,
            parallel_row: false,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < MIN_ITERATIONS {
            return Err(Error::Config(format!(
                "bench.iterations = {} (minimum {MIN_ITERATIONS})",
                self.iterations
            )));
        }
        if self.warmup < MIN_WARMUP {
            return Err(Error::Config(format!("bench.warmup = {} (minimum {MIN_WARMUP})", self.warmup)));
        }
        if self.repetitions == 0 || self.batch_size == 0 {
            return Err(Error::Config("bench.repetitions and bench.batch_size must be at least 1".into()));
        }
        if self.seq_lens.is_empty() || self.seq_lens.contains(&0) {
            return Err(Error::Config("bench.seq_lens must be a non-empty list of positive lengths".into()));
        }
        Ok(())
    }
}

/// Per-(model, length) timing in nanoseconds per batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub family: String,
    pub variant: String,
    /// `"single"` or `"multi"`.
    pub threads: String,
    pub seq_len: usize,
    pub median_ns: f64,
    pub q1_ns: f64,
    pub q3_ns: f64,
    pub iqr_ns: f64,
    /// `median / student median` at the same length.
    pub ratio: f64,
    #[serde(skip)]
    pub samples_ns: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchContext {
    pub batch_size: usize,
    pub warmup: usize,
    pub iterations: usize,
    pub repetitions: usize,
    pub timer_tick_ns: f64,
    pub teacher_params: usize,
    pub student_params: usize,
    pub logical_cpus: usize,
    pub parallel_feature: bool,
    pub arch: String,
    pub os: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub context: BenchContext,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, family: &str, threads: &str, seq_len: usize) -> Option<&BenchRow> {
        self.rows
            .iter()
            .find(|r| r.family == family && r.threads == threads && r.seq_len == seq_len)
    }

    /// `teacher / student` median ratio at each length, in `seq_lens` order.
    pub fn teacher_ratios(&self) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter(|r| r.family == FAMILY_LSTM && r.threads == "single")
            .map(|r| (r.seq_len, r.ratio))
            .collect()
    }

    /// One JSON object per row.
    pub fn render_jsonl(&self) -> String {
        let mut s = crate::train::json_line(&serde_json::json!({ "record": "context", "context": self.context }));
        for r in &self.rows {
            s.push_str(&crate::train::json_line(&serde_json::json!({ "record": "row", "row": r })));
        }
        s
    }

    /// Every raw per-iteration sample, one line per (row, repetition).
    pub fn render_samples(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            for (rep, samples) in r.samples_ns.iter().enumerate() {
                s.push_str(&crate::train::json_line(&serde_json::json!({
                    "family": r.family,
                    "variant": r.variant,
                    "threads": r.threads,
                    "seq_len": r.seq_len,
                    "repetition": rep,
                    "samples_ns": samples,
                })));
            }
        }
        s
    }
}

pub const FAMILY_CNN: &str = "cnn";
pub const FAMILY_LSTM: &str = "bilstm";
pub const FAMILY_ENSEMBLE: &str = "ensemble";

/// Smallest observable difference between two clock reads, in ns.
pub fn timer_tick_ns() -> f64 {
    let mut best = u128::MAX;
    for _ in 0..1000 {
        let a = Instant::now();
        let mut b = Instant::now();
        while b == a {
            b = Instant::now();
        }
        best = best.min((b - a).as_nanos());
    }
    best.max(1) as f64
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn sorted(xs: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = xs.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Random full-length batch; every row is exactly `len` real tokens.
pub fn synthetic_batch<R: Rng + ?Sized>(vocab: usize, batch: usize, len: usize, rng: &mut R) -> Batch {
    let first = UNK_ID.max(PAD_ID) + 1;
    let rows: Vec<Vec<usize>> = (0..batch)
        .map(|_| (0..len).map(|_| rng.gen_range(first.min(vocab - 1)..vocab)).collect())
        .collect();
    Batch::from_rows(&rows, &vec![0; batch], 1)
}

struct Timed {
    medians: Vec<f64>,
    samples: Vec<Vec<u64>>,
}

type Runner<'a> = dyn FnMut() -> Result<()> + Send + 'a;

fn measure(f: &mut Runner<'_>, single: bool) -> Result<u64> {
    let mut once = || {
        let t = Instant::now();
        f()?;
        Ok(t.elapsed().as_nanos() as u64)
    };
    if single {
        par::single_threaded(once)
    } else {
        once()
    }
}

/// Interleaves the runners iteration by iteration, rotating their order, so
/// drift in machine load lands on every row alike.
fn time_all(cfg: &BenchConfig, runners: &mut [(&mut Runner<'_>, bool)]) -> Result<Vec<Timed>> {
    let n = runners.len();
    let mut out: Vec<Timed> = (0..n)
        .map(|_| Timed {
            medians: Vec::with_capacity(cfg.repetitions),
            samples: Vec::with_capacity(cfg.repetitions),
        })
        .collect();
    for _ in 0..cfg.repetitions {
        for (f, single) in runners.iter_mut() {
            for _ in 0..cfg.warmup {
                measure(*f, *single)?;
            }
        }
        let mut reps = vec![Vec::with_capacity(cfg.iterations); n];
        for i in 0..cfg.iterations {
            for k in 0..n {
                let j = (i + k) % n;
                let (f, single) = &mut runners[j];
                reps[j].push(measure(*f, *single)?);
            }
        }
        for (t, rep) in out.iter_mut().zip(reps) {
            t.medians.push(quantile(&sorted(rep.iter().map(|&x| x as f64)), 0.5));
            t.samples.push(rep);
        }
    }
    Ok(out)
}

fn summarize(family: &str, variant: &str, threads: &str, seq_len: usize, t: Timed) -> BenchRow {
    let pooled = sorted(t.samples.iter().flatten().map(|&x| x as f64));
    let (q1, q3) = (quantile(&pooled, 0.25), quantile(&pooled, 0.75));
    BenchRow {
        family: family.into(),
        variant: variant.into(),
        threads: threads.into(),
        seq_len,
        median_ns: quantile(&sorted(t.medians), 0.5),
        q1_ns: q1,
        q3_ns: q3,
        iqr_ns: q3 - q1,
        ratio: f64::NAN,
        samples_ns: t.samples,
    }
}

/// Times eval-mode forward passes of both models over random batches.
/// Every row except the labeled multi-worker one runs on one thread.
pub fn run_latency_bench(teacher: &TeacherModel, student: &StudentModel, cfg: &BenchConfig, seed: u64) -> Result<BenchReport> {
    cfg.validate()?;
    let vocab = teacher.embedding().vocab_size().min(student.embedding().vocab_size());
    if vocab < 3 {
        return Err(Error::Config("benchmark models need a vocabulary of at least 3 tokens".into()));
    }
    let tick = timer_tick_ns();
    let mut rng = rng_for(seed, 0);
    let mut rows = Vec::new();
    for &len in &cfg.seq_lens {
        let batch = synthetic_batch(vocab, cfg.batch_size, len, &mut rng).padded_to(student.min_len());
        let mut student_run = || student.predict(&batch).map(drop);
        let mut teacher_run = || teacher.predict(&batch).map(drop);
        let mut ensemble_run = || {
            let t = teacher.predict(&batch)?;
            let s = student.predict(&batch)?;
            for (t, s) in t.iter().zip(&s) {
                ensemble(t, s, 0.5)?;
            }
            Ok(())
        };
        let mut parallel_run = || student.predict(&batch).map(drop);

        let mut labels = vec![(FAMILY_CNN, "student", "single"), (FAMILY_LSTM, "teacher", "single")];
        let mut runners: Vec<(&mut Runner<'_>, bool)> = vec![(&mut student_run, true), (&mut teacher_run, true)];
        if cfg.ensemble_row {
            labels.push((FAMILY_ENSEMBLE, "teacher+student", "single"));
            runners.push((&mut ensemble_run, true));
        }
        if cfg.parallel_row {
            labels.push((FAMILY_CNN, "student", "multi"));
            runners.push((&mut parallel_run, false));
        }
        let timed = time_all(cfg, &mut runners)?;
        let mut at_len: Vec<BenchRow> = labels
            .into_iter()
            .zip(timed)
            .map(|((family, variant, threads), t)| summarize(family, variant, threads, len, t))
            .collect();

        let base = at_len[0].median_ns;
        if base < MIN_TICKS_PER_ITERATION * tick {
            return Err(Error::Numeric(format!(
                "student batch at length {len} takes {base:.0} ns, under {MIN_TICKS_PER_ITERATION} timer ticks of \
                 {tick:.0} ns; increase bench.batch_size"
            )));
        }
        for (i, r) in at_len.iter_mut().enumerate() {
            r.ratio = if i == 0 { 1.0 } else { r.median_ns / base };
        }
        rows.extend(at_len);
    }
    Ok(BenchReport {
        context: BenchContext {
            batch_size: cfg.batch_size,
            warmup: cfg.warmup,
            iterations: cfg.iterations,
            repetitions: cfg.repetitions,
            timer_tick_ns: tick,
            teacher_params: teacher.param_count(),
            student_params: student.param_count(),
            logical_cpus: par::worker_count(),
            parallel_feature: par::parallel_enabled(),
            arch: std::env::consts::ARCH.into(),
            os: std::env::consts::OS.into(),
        },
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.25), 2.0);
        assert_eq!(quantile(&[1.0, 2.0], 0.5), 1.5);
    }

    #[test]
    fn config_minimums() {
        assert!(BenchConfig::default().validate().is_ok());
        assert!(BenchConfig { iterations: 29, ..Default::default() }.validate().is_err());
        assert!(BenchConfig { warmup: 4, ..Default::default() }.validate().is_err());
        assert!(BenchConfig { seq_lens: vec![], ..Default::default() }.validate().is_err());
    }

    #[test]
    fn synthetic_batch_has_no_pads() {
        let mut rng = rng_for(1, 0);
        let b = synthetic_batch(10, 4, 7, &mut rng);
        assert_eq!(b.lengths, vec![7; 4]);
        assert!(b.ids.iter().all(|&i| (2..10).contains(&i)));
    }

    #[test]
    fn tick_is_positive() {
        assert!(timer_tick_ns() > 0.0);
    }
}
