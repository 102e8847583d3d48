//! File-level steps behind each CLI command. Every artifact lands in
//! `out_dir` under a fixed name; see [`Layout`].

use std::path::{Path, PathBuf};

use crate::bench::{emit_report_table, latency_entries, run_latency_bench, BenchReport};
use crate::data::{
    encode_records, load_embeddings, read_labeled_csv, synth_dataset, write_csv, Coverage, LabelMap, Record, SynthData, Vocabulary,
    PAD_ID,
};
use crate::distill::{Classifier, StudentModel, TeacherModel};
use crate::error::{Error, Result};
use crate::nn::{checkpoint::file_fingerprint, Checkpoint, EmbeddingTable};
use crate::par::Exec;

use super::cache::{cache_teacher_predictions, TeacherCache};
use super::config::{require_path, RunConfig};
use super::metrics::{write_file, EvalReport, MetricsReport};
use super::recipes::{evaluate, evaluate_ensemble, rng_for, streams, train_student, train_teacher, Splits, StudentMode};

/// Artifact names inside the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn vocab(&self) -> PathBuf {
        self.root.join("vocab.txt")
    }

    pub fn labels(&self) -> PathBuf {
        self.root.join("labels.tsv")
    }

    pub fn teacher(&self) -> PathBuf {
        self.root.join("teacher.ckpt")
    }

    pub fn cache(&self) -> PathBuf {
        self.root.join("teacher_cache.txt")
    }

    pub fn student(&self, mode: StudentMode) -> PathBuf {
        self.root.join(format!("student-{}.ckpt", mode.as_str()))
    }

    pub fn ensure(&self) -> Result<()> {
        std::fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))
    }
}

pub fn layout(cfg: &RunConfig) -> Layout {
    Layout::new(&cfg.out_dir)
}

/// Builds the vocabulary from the training split and the label map from
/// train then test (first appearance order), and writes both.
pub fn build_vocab(cfg: &RunConfig) -> Result<(Vocabulary, LabelMap)> {
    let out = layout(cfg);
    out.ensure()?;
    let mut labels = LabelMap::new();
    let train = read_labeled_csv(cfg.train_path()?, &cfg.data.schema, "train", &mut labels, true)?;
    if let Some(test) = &cfg.data.test {
        read_labeled_csv(test, &cfg.data.schema, "test", &mut labels, true)?;
    }
    let vocab = Vocabulary::build(train.iter().map(|r| r.tokens.as_slice()), cfg.data.min_freq);
    vocab.save(&out.vocab())?;
    labels.save(&out.labels())?;
    Ok((vocab, labels))
}

/// Loads the saved vocabulary and label map, building them first if
/// `out_dir` has none, then reads and encodes both splits.
pub fn load_splits(cfg: &RunConfig) -> Result<(Vocabulary, Splits)> {
    let out = layout(cfg);
    let (vocab, mut labels) = if out.vocab().exists() && out.labels().exists() {
        (Vocabulary::load(&out.vocab())?, LabelMap::load(&out.labels())?)
    } else {
        build_vocab(cfg)?
    };
    let train = read_labeled_csv(cfg.train_path()?, &cfg.data.schema, "train", &mut labels, false)?;
    let test = read_labeled_csv(cfg.test_path()?, &cfg.data.schema, "test", &mut labels, false)?;
    let splits = encode_splits(&train, &test, &labels, &vocab, cfg.data.max_len);
    Ok((vocab, splits))
}

pub fn encode_splits(train: &[Record], test: &[Record], labels: &LabelMap, vocab: &Vocabulary, max_len: usize) -> Splits {
    Splits {
        train: encode_records(train, vocab, max_len),
        test: encode_records(test, vocab, max_len),
        labels: labels.names().to_vec(),
    }
}

/// In-memory splits for a synthetic corpus, vocabulary from its train half.
pub fn synth_splits(d: &SynthData) -> (Vocabulary, Splits) {
    let vocab = Vocabulary::build(d.train.iter().map(|r| r.tokens.as_slice()), 1);
    let splits = encode_splits(&d.train, &d.test, &d.labels, &vocab, usize::MAX);
    (vocab, splits)
}

/// Pretrained vectors if configured, otherwise a seeded random table.
pub fn init_embedding(cfg: &RunConfig, vocab: &Vocabulary, dim: usize) -> Result<(EmbeddingTable, Option<Coverage>)> {
    let mut rng = rng_for(cfg.seed, streams::EMBEDDINGS);
    match &cfg.data.embeddings {
        Some(path) => {
            let (t, cov) = load_embeddings(path, vocab, Some(dim), &mut rng)?;
            Ok((t, Some(cov)))
        }
        None => Ok((EmbeddingTable::random(vocab.len(), dim, PAD_ID, &mut rng)?, None)),
    }
}

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub checkpoint: PathBuf,
    pub fingerprint: String,
    pub report: MetricsReport,
    pub coverage: Option<Coverage>,
}

fn finish<M: Classifier>(
    out: &Layout,
    path: PathBuf,
    stem: &str,
    best: &M,
    report: MetricsReport,
    diverged: Option<String>,
    coverage: Option<Coverage>,
) -> Result<TrainRun> {
    let fingerprint = best.to_checkpoint().write(&path)?;
    report.write(&out.root, stem)?;
    if let Some(msg) = diverged {
        return Err(Error::Numeric(format!(
            "training diverged ({msg}); last good checkpoint kept at {}",
            path.display()
        )));
    }
    Ok(TrainRun {
        checkpoint: path,
        fingerprint,
        report,
        coverage,
    })
}

pub fn run_train_teacher(cfg: &RunConfig) -> Result<TrainRun> {
    let out = layout(cfg);
    out.ensure()?;
    let (vocab, splits) = load_splits(cfg)?;
    let (emb, coverage) = init_embedding(cfg, &vocab, cfg.teacher.embedding_dim)?;
    let mut rng = rng_for(cfg.seed, streams::TEACHER_INIT);
    let model = TeacherModel::new(&cfg.teacher, emb, splits.labels.len(), &mut rng)?;
    let o = train_teacher(model, &splits, &cfg.train, cfg.seed)?;
    finish(&out, out.teacher(), "teacher", &o.best, o.report, o.diverged, coverage)
}

fn teacher_path(cfg: &RunConfig, explicit: Option<&Path>) -> PathBuf {
    explicit.map_or_else(|| layout(cfg).teacher(), Path::to_path_buf)
}

/// Writes teacher posteriors for every train and test example.
pub fn run_cache_teacher(cfg: &RunConfig, teacher: Option<&Path>) -> Result<(PathBuf, TeacherCache)> {
    let out = layout(cfg);
    out.ensure()?;
    let tpath = teacher_path(cfg, teacher);
    require_path(&tpath)?;
    let model = TeacherModel::from_checkpoint(Checkpoint::read(&tpath)?)?;
    let fp = file_fingerprint(&tpath)?;
    let (_, splits) = load_splits(cfg)?;
    let all: Vec<_> = splits.train.iter().chain(&splits.test).cloned().collect();
    let cache = cache_teacher_predictions(&model, &fp, &all, cfg.train.eval_batch_size, Exec::Parallel)?;
    let path = out.cache();
    cache.write(&path)?;
    Ok((path, cache))
}

/// `cache` is required in blended mode. When given, it must have been
/// built from the teacher checkpoint at `teacher` (default location if
/// `None`).
pub fn run_train_student(
    cfg: &RunConfig,
    mode: StudentMode,
    cache: Option<&Path>,
    teacher: Option<&Path>,
) -> Result<TrainRun> {
    let out = layout(cfg);
    out.ensure()?;
    if mode == StudentMode::Blended && cache.is_none() {
        return Err(Error::Config("train-student --mode blended needs --cache <teacher cache file>".into()));
    }
    let cache = match cache {
        Some(p) => {
            require_path(p)?;
            let c = TeacherCache::read(p)?;
            let tpath = teacher_path(cfg, teacher);
            require_path(&tpath)?;
            c.verify(&file_fingerprint(&tpath)?)?;
            Some(c)
        }
        None => None,
    };
    let (vocab, splits) = load_splits(cfg)?;
    if let Some(c) = &cache {
        if c.classes != splits.labels.len() {
            return Err(Error::Config(format!(
                "teacher cache has {} classes, label map has {}",
                c.classes,
                splits.labels.len()
            )));
        }
    }
    let (emb, coverage) = init_embedding(cfg, &vocab, cfg.student.embedding_dim)?;
    let mut rng = rng_for(cfg.seed, streams::STUDENT_INIT);
    let model = StudentModel::new(&cfg.student, emb, splits.labels.len(), &mut rng)?;
    let o = train_student(model, &splits, &cfg.train, &cfg.blend, mode, cache.as_ref(), cfg.seed)?;
    let stem = format!("student-{}", mode.as_str());
    finish(&out, out.student(mode), &stem, &o.best, o.report, o.diverged, coverage)
}

#[derive(Debug, Clone)]
pub enum AnyModel {
    Teacher(TeacherModel),
    Student(StudentModel),
}

pub fn load_model(path: &Path) -> Result<AnyModel> {
    require_path(path)?;
    let c = Checkpoint::read(path)?;
    match c.kind.as_str() {
        k if k == TeacherModel::KIND => Ok(AnyModel::Teacher(TeacherModel::from_checkpoint(c)?)),
        k if k == StudentModel::KIND => Ok(AnyModel::Student(StudentModel::from_checkpoint(c)?)),
        k => Err(Error::Input(format!("{}: unknown checkpoint kind `{k}`", path.display()))),
    }
}

fn write_eval(out: &Layout, name: &str, report: &EvalReport) -> Result<()> {
    out.ensure()?;
    write_file(&out.root.join(format!("eval-{name}.json")), &report.to_json_line())
}

/// Test-split accuracy of any checkpoint.
pub fn run_evaluate(cfg: &RunConfig, ckpt: &Path) -> Result<EvalReport> {
    let model = load_model(ckpt)?;
    let (_, splits) = load_splits(cfg)?;
    let bs = cfg.train.eval_batch_size;
    let report = match &model {
        AnyModel::Teacher(m) => evaluate(m, &splits.test, &splits.labels, bs, Exec::Parallel)?,
        AnyModel::Student(m) => evaluate(m, &splits.test, &splits.labels, bs, Exec::Parallel)?,
    };
    let stem = ckpt.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    write_eval(&layout(cfg), stem, &report)?;
    Ok(report)
}

pub fn run_evaluate_ensemble(cfg: &RunConfig, teacher: &Path, student: &Path, gamma: f64) -> Result<EvalReport> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Config(format!("gamma = {gamma} outside [0, 1]")));
    }
    let AnyModel::Teacher(t) = load_model(teacher)? else {
        return Err(Error::Input(format!("{} is not a teacher checkpoint", teacher.display())));
    };
    let AnyModel::Student(s) = load_model(student)? else {
        return Err(Error::Input(format!("{} is not a student checkpoint", student.display())));
    };
    let (_, splits) = load_splits(cfg)?;
    let report = evaluate_ensemble(&t, &s, &splits.test, &splits.labels, gamma, cfg.train.eval_batch_size, Exec::Parallel)?;
    write_eval(&layout(cfg), "ensemble", &report)?;
    Ok(report)
}

/// Paths of the two benchmarked checkpoints after applying defaults.
pub fn bench_paths(cfg: &RunConfig) -> (PathBuf, PathBuf) {
    let out = layout(cfg);
    (
        cfg.bench.teacher.clone().unwrap_or_else(|| out.teacher()),
        cfg.bench.student.clone().unwrap_or_else(|| out.student(StudentMode::Blended)),
    )
}

/// Times both checkpoints and writes `bench.jsonl`, `bench_samples.jsonl`
/// and the aligned `bench.txt` table.
pub fn run_bench(cfg: &RunConfig) -> Result<BenchReport> {
    cfg.bench.validate()?;
    let (tp, sp) = bench_paths(cfg);
    require_path(&tp)?;
    require_path(&sp)?;
    let AnyModel::Teacher(t) = load_model(&tp)? else {
        return Err(Error::Config(format!("{} is not a teacher checkpoint", tp.display())));
    };
    let AnyModel::Student(s) = load_model(&sp)? else {
        return Err(Error::Config(format!("{} is not a student checkpoint", sp.display())));
    };
    let report = run_latency_bench(&t, &s, &cfg.bench, cfg.seed)?;
    let out = layout(cfg);
    out.ensure()?;
    write_file(&out.root.join("bench.jsonl"), &report.render_jsonl())?;
    write_file(&out.root.join("bench_samples.jsonl"), &report.render_samples())?;
    let table = emit_report_table(&latency_entries(&report));
    write_file(&out.root.join("bench.txt"), &table.text)?;
    write_file(&out.root.join("bench_table.jsonl"), &table.json)?;
    Ok(report)
}

/// Writes `train.csv` and `test.csv` of the synthetic corpus into `dir`.
pub fn run_synth_data(dir: &Path, n: usize, vocab_size: usize, seed: u64) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let d = synth_dataset(n, vocab_size, seed)?;
    let (tr, te) = (dir.join("train.csv"), dir.join("test.csv"));
    write_csv(&tr, &d.train, &d.labels)?;
    write_csv(&te, &d.test, &d.labels)?;
    Ok((tr, te))
}
