use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{make_batches, Batch, Example};
use crate::distill::{blended_loss, ensemble, BlendConfig, ClassDistribution, Classifier, StudentModel, TeacherModel};
use crate::error::{Error, Result};
use crate::nn::Mode;
use crate::par::Exec;
use crate::tensor::{Tape, Tensor};

use super::adam::{clip_global_norm, AdamConfig, AdamState};
use super::cache::TeacherCache;
use super::metrics::{EpochRecord, EvalReport, MetricsReport, Summary, Timing};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Stop after this many epochs without a test-accuracy gain. 0 = never.
    pub patience: usize,
    /// Global gradient-norm bound for the teacher. 0 = no clipping.
    pub teacher_clip_norm: f64,
    pub eval_batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            epochs: 10,
            batch_size: 64,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            patience: 0,
            teacher_clip_norm: 5.0,
            eval_batch_size: 256,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.adam().validate()?;
        if self.epochs == 0 || self.batch_size == 0 || self.eval_batch_size == 0 {
            return Err(Error::Config("epochs and batch sizes must be at least 1".into()));
        }
        if !(self.teacher_clip_norm >= 0.0) {
            return Err(Error::Config("teacher_clip_norm must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudentMode {
    /// Hard labels only.
    Baseline,
    /// Soft teacher targets blended with hard labels.
    Blended,
}

impl StudentMode {
    pub fn as_str(self) -> &'static str {
        match self {
            StudentMode::Baseline => "baseline",
            StudentMode::Blended => "blended",
        }
    }
}

impl std::str::FromStr for StudentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(StudentMode::Baseline),
            "blended" => Ok(StudentMode::Blended),
            _ => Err(Error::Usage(format!("unknown student mode `{s}` (baseline|blended)"))),
        }
    }
}

/// Labeled train/test examples plus class names.
#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Vec<Example>,
    pub test: Vec<Example>,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    /// Highest test accuracy seen; the initial model if training diverged
    /// during the first epoch.
    pub best: M,
    pub report: MetricsReport,
    /// Set when a non-finite loss or gradient stopped training.
    pub diverged: Option<String>,
}

/// Purpose-separated generator streams derived from one run seed.
pub mod streams {
    pub const TEACHER_INIT: u64 = 0;
    pub const STUDENT_INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const DROPOUT: u64 = 3;
    pub const EMBEDDINGS: u64 = 4;
}

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

struct Fit<'a> {
    model_name: &'static str,
    mode: &'static str,
    data: &'a Splits,
    cfg: &'a TrainConfig,
    blend: BlendConfig,
    soft: Option<&'a TeacherCache>,
    reference: Option<&'a TeacherCache>,
    clip: f64,
    seed: u64,
}

/// Hard-label teacher training with gradient clipping.
pub fn train_teacher(model: TeacherModel, data: &Splits, cfg: &TrainConfig, seed: u64) -> Result<TrainOutcome<TeacherModel>> {
    fit(
        model,
        Fit {
            model_name: TeacherModel::KIND,
            mode: "hard",
            data,
            cfg,
            blend: BlendConfig {
                lambda: 0.0,
                ..Default::default()
            },
            soft: None,
            reference: None,
            clip: cfg.teacher_clip_norm,
            seed,
        },
    )
}

/// Student training. `cache` supplies soft targets in blended mode and, in
/// either mode, the teacher predictions that agreement is measured against.
pub fn train_student(
    model: StudentModel,
    data: &Splits,
    cfg: &TrainConfig,
    blend: &BlendConfig,
    mode: StudentMode,
    cache: Option<&TeacherCache>,
    seed: u64,
) -> Result<TrainOutcome<StudentModel>> {
    blend.validate()?;
    let blend = match mode {
        StudentMode::Baseline => BlendConfig { lambda: 0.0, ..*blend },
        StudentMode::Blended => {
            if cache.is_none() {
                return Err(Error::Config("blended student training needs a teacher cache".into()));
            }
            *blend
        }
    };
    fit(
        model,
        Fit {
            model_name: StudentModel::KIND,
            mode: mode.as_str(),
            data,
            cfg,
            blend,
            soft: if blend.lambda > 0.0 { cache } else { None },
            reference: cache,
            clip: 0.0,
            seed,
        },
    )
}

fn fit<M: Classifier>(mut model: M, f: Fit<'_>) -> Result<TrainOutcome<M>> {
    f.cfg.validate()?;
    if model.classes() != f.data.labels.len() {
        return Err(Error::Config(format!(
            "model has {} classes, label map has {}",
            model.classes(),
            f.data.labels.len()
        )));
    }
    let emb_slot = model
        .params()
        .iter()
        .position(|(n, _)| n == "embedding.weight")
        .ok_or_else(|| Error::Internal("model has no embedding parameter".into()))?;
    let mut adam = AdamState::new(f.cfg.adam(), model.params().into_iter().map(|(_, p)| p));
    let mut shuffle = rng_for(f.seed, streams::SHUFFLE);
    let mut drop_rng = rng_for(f.seed, streams::DROPOUT);

    let mut report = MetricsReport::default();
    let mut best = model.clone();
    let mut best_acc = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut status = "completed";
    let mut diverged = None;

    'epochs: for epoch in 1..=f.cfg.epochs {
        let t0 = Instant::now();
        let batches = make_batches(&f.data.train, f.cfg.batch_size, Some(shuffle.next_u64()), model.min_len())?;
        let (mut loss_sum, mut seen) = (0.0, 0usize);
        for batch in &batches {
            match train_step(&mut model, &mut adam, batch, &f, &mut drop_rng, emb_slot) {
                Ok(lv) => {
                    loss_sum += lv * batch.size() as f64;
                    seen += batch.size();
                }
                Err(Error::Numeric(msg)) => {
                    diverged = Some(format!("epoch {epoch}: {msg}"));
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }
        let train_seconds = t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let preds = match predict_labels(&model, &f.data.test, f.cfg.eval_batch_size, Exec::Sequential) {
            Ok(p) => p,
            Err(Error::Numeric(msg)) => {
                diverged = Some(format!("epoch {epoch} evaluation: {msg}"));
                break;
            }
            Err(e) => return Err(e),
        };
        let eval = EvalReport::from_predictions(
            f.model_name,
            &f.data.labels,
            &f.data.test.iter().map(|e| e.label).collect::<Vec<_>>(),
            &preds,
        )?;
        let agreement = f.reference.map(|c| agreement(&preds, &f.data.test, c)).transpose()?;
        report.push(EpochRecord {
            epoch,
            train_loss: loss_sum / seen.max(1) as f64,
            test_accuracy: eval.accuracy,
            teacher_agreement: agreement,
        })?;
        report.timings.push(Timing {
            epoch,
            train_seconds,
            eval_seconds: t1.elapsed().as_secs_f64(),
        });

        if eval.accuracy > best_acc {
            best_acc = eval.accuracy;
            best_epoch = epoch;
            best = model.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if f.cfg.patience > 0 && since_best >= f.cfg.patience {
                status = "early_stop";
                break;
            }
        }
    }
    if diverged.is_some() {
        status = "diverged";
    }
    let last = report.epochs.last();
    report.summary = Some(Summary {
        model: f.model_name.to_string(),
        mode: f.mode.to_string(),
        param_count: model.param_count(),
        epochs_run: report.epochs.len(),
        best_epoch,
        best_test_accuracy: best_acc.max(0.0),
        final_test_accuracy: last.map_or(0.0, |e| e.test_accuracy),
        final_teacher_agreement: last.and_then(|e| e.teacher_agreement),
        status: status.to_string(),
    });
    Ok(TrainOutcome { best, report, diverged })
}

/// One optimizer step on `batch`; returns the batch loss. Numeric errors
/// mean the run has diverged.
fn train_step<M: Classifier>(
    model: &mut M,
    adam: &mut AdamState,
    batch: &Batch,
    f: &Fit<'_>,
    drop_rng: &mut ChaCha8Rng,
    emb_slot: usize,
) -> Result<f64> {
    let targets = f.soft.map(|c| c.targets(batch)).transpose()?;
    let mut tape = Tape::new();
    let mut mode = Mode::Train(drop_rng);
    let logits = model.logits(&mut tape, batch, &mut mode)?;
    let loss = blended_loss(&mut tape, &f.blend, &logits, targets.as_ref(), &batch.labels)?;
    let lv = tape.value(loss).item()?;
    if !lv.is_finite() {
        return Err(Error::Numeric(format!("non-finite training loss ({lv})")));
    }
    tape.backward(loss)?;
    let mut grads: Vec<Option<Tensor>> = model.params().iter().map(|(_, p)| tape.param_grad(p).cloned()).collect();
    drop(tape);
    if let Some(g) = grads[emb_slot].as_mut() {
        model.embedding().mask_grad(g);
    }
    if f.clip > 0.0 {
        clip_global_norm(&mut grads, f.clip);
    }
    adam.step(model.params_mut(), &grads)?;
    Ok(lv)
}

/// Eval-mode posteriors in `examples` order.
pub fn predict_all<M: Classifier>(
    model: &M,
    examples: &[Example],
    batch_size: usize,
    min_len: usize,
    exec: Exec,
) -> Result<Vec<ClassDistribution>> {
    let batches = make_batches(examples, batch_size, None, min_len.max(model.min_len()))?;
    let per_batch = exec.map(&batches, |b| model.predict(b));
    let mut out = Vec::with_capacity(examples.len());
    for p in per_batch {
        out.extend(p?);
    }
    Ok(out)
}

fn predict_labels<M: Classifier>(model: &M, examples: &[Example], batch_size: usize, exec: Exec) -> Result<Vec<usize>> {
    Ok(predict_all(model, examples, batch_size, 1, exec)?
        .iter()
        .map(ClassDistribution::argmax)
        .collect())
}

/// Fraction of `examples` whose predicted class equals the cached teacher's
/// argmax.
pub fn agreement(predicted: &[usize], examples: &[Example], reference: &TeacherCache) -> Result<f64> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let mut same = 0usize;
    for (p, e) in predicted.iter().zip(examples) {
        let t = reference
            .get(&e.id)
            .ok_or_else(|| Error::Config(format!("teacher cache has no entry for example `{}`", e.id)))?;
        same += usize::from(t.argmax() == *p);
    }
    Ok(same as f64 / examples.len() as f64)
}

fn check_classes(name: &str, classes: usize, labels: &[String]) -> Result<()> {
    if classes != labels.len() {
        return Err(Error::Config(format!(
            "{name} checkpoint has {classes} classes, label map has {}",
            labels.len()
        )));
    }
    Ok(())
}

/// Accuracy (argmax, lowest index on ties) and confusion matrix.
pub fn evaluate<M: Classifier>(
    model: &M,
    examples: &[Example],
    labels: &[String],
    batch_size: usize,
    exec: Exec,
) -> Result<EvalReport> {
    check_classes(M::KIND, model.classes(), labels)?;
    let preds = predict_labels(model, examples, batch_size, exec)?;
    let gold: Vec<usize> = examples.iter().map(|e| e.label).collect();
    EvalReport::from_predictions(M::KIND, labels, &gold, &preds)
}

/// Accuracy of `argmax(γ·p_teacher + (1−γ)·p_student)`.
pub fn evaluate_ensemble(
    teacher: &TeacherModel,
    student: &StudentModel,
    examples: &[Example],
    labels: &[String],
    gamma: f64,
    batch_size: usize,
    exec: Exec,
) -> Result<EvalReport> {
    check_classes("teacher", teacher.classes(), labels)?;
    check_classes("student", student.classes(), labels)?;
    let t = predict_all(teacher, examples, batch_size, 1, exec)?;
    let s = predict_all(student, examples, batch_size, 1, exec)?;
    let preds = t
        .iter()
        .zip(&s)
        .map(|(t, s)| ensemble(t, s, gamma).map(|d| d.argmax()))
        .collect::<Result<Vec<_>>>()?;
    let gold: Vec<usize> = examples.iter().map(|e| e.label).collect();
    EvalReport::from_predictions("ensemble", labels, &gold, &preds)
}
