//! Training, caching and evaluation invariants on small synthetic runs.

mod common;

use std::path::Path;
use std::sync::Arc;

use common::*;
use distill_core::distill::{BlendConfig, Classifier};
use distill_core::nn::checkpoint::file_fingerprint;
use distill_core::par::Exec;
use distill_core::tensor::Tensor;
use distill_core::train::workflow::{self, layout};
use distill_core::train::{
    cache_teacher_predictions, evaluate, evaluate_ensemble, train_student, train_teacher, RunConfig, StudentMode,
    TeacherCache, TrainConfig,
};
use distill_core::Error;

fn examples(s: &SynthSetup) -> Vec<distill_core::data::Example> {
    s.splits.train.iter().chain(&s.splits.test).cloned().collect()
}

fn small(epochs: usize) -> SynthSetup {
    let mut s = synth_setup(400, 2);
    s.train.epochs = epochs;
    s
}

#[test]
fn cache_is_identical_across_reruns_and_schedules() {
    let s = small(1);
    let t = train_teacher(s.teacher(3), &s.splits, &s.train, 3).unwrap().best;
    let all = examples(&s);
    let a = cache_teacher_predictions(&t, "fp", &all, 64, Exec::Parallel).unwrap().render();
    let b = cache_teacher_predictions(&t, "fp", &all, 64, Exec::Parallel).unwrap().render();
    let c = cache_teacher_predictions(&t, "fp", &all, 17, Exec::Sequential).unwrap().render();
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn zero_head_teacher_caches_uniform_posteriors() {
    let s = small(1);
    let mut t = s.teacher(4);
    for (name, p) in t.params_mut() {
        if name.starts_with("head.") {
            *p = Arc::new(Tensor::zeros(p.shape()));
        }
    }
    let cache = cache_teacher_predictions(&t, "fp", &examples(&s), 64, Exec::Sequential).unwrap();
    assert_eq!(cache.len(), 400);
    for (_, d) in cache.rows() {
        assert!(d.probs().iter().all(|&p| p == 0.5), "{:?}", d.probs());
    }
}

#[test]
fn pure_soft_loss_on_uniform_teacher_approaches_ln_k() {
    let s = small(4);
    let mut t = s.teacher(4);
    for (name, p) in t.params_mut() {
        if name.starts_with("head.") {
            *p = Arc::new(Tensor::zeros(p.shape()));
        }
    }
    let cache = cache_teacher_predictions(&t, "fp", &examples(&s), 64, Exec::Sequential).unwrap();
    let blend = BlendConfig {
        lambda: 1.0,
        ..Default::default()
    };
    let o = train_student(s.student(5), &s.splits, &s.train, &blend, StudentMode::Blended, Some(&cache), 5).unwrap();
    let ln2 = 2f64.ln();
    let losses: Vec<f64> = o.report.epochs.iter().map(|e| e.train_loss).collect();
    let last = *losses.last().unwrap();
    assert!(last >= ln2 - 1e-12, "{losses:?}");
    assert!(last - ln2 < 1e-3, "{losses:?}");
    assert!(losses[0] >= last, "{losses:?}");
}

#[test]
fn zero_learning_rate_leaves_the_model_untouched() {
    let mut s = small(2);
    s.train.learning_rate = 0.0;
    let start = s.student(6);
    let before = evaluate(&start, &s.splits.test, &s.splits.labels, 64, Exec::Sequential).unwrap();
    let o = train_student(start.clone(), &s.splits, &s.train, &BlendConfig::default(), StudentMode::Baseline, None, 6)
        .unwrap();
    assert_eq!(o.best.to_checkpoint().render(), start.to_checkpoint().render());
    for e in &o.report.epochs {
        assert_eq!(e.test_accuracy, before.accuracy);
    }
}

#[test]
fn ensemble_endpoints_reproduce_single_model_reports() {
    let s = small(1);
    let t = train_teacher(s.teacher(7), &s.splits, &s.train, 7).unwrap().best;
    let st = train_student(s.student(7), &s.splits, &s.train, &BlendConfig::default(), StudentMode::Baseline, None, 7)
        .unwrap()
        .best;
    let (test, labels) = (&s.splits.test, &s.splits.labels);
    let tr = evaluate(&t, test, labels, 64, Exec::Sequential).unwrap();
    let sr = evaluate(&st, test, labels, 64, Exec::Sequential).unwrap();
    let e1 = evaluate_ensemble(&t, &st, test, labels, 1.0, 64, Exec::Sequential).unwrap();
    let e0 = evaluate_ensemble(&t, &st, test, labels, 0.0, 64, Exec::Sequential).unwrap();
    assert_eq!((e1.correct, &e1.confusion), (tr.correct, &tr.confusion));
    assert_eq!((e0.correct, &e0.confusion), (sr.correct, &sr.confusion));
    assert!(evaluate_ensemble(&t, &st, test, labels, 1.5, 64, Exec::Sequential).is_err());
}

#[test]
fn teacher_training_is_reproducible_in_memory() {
    let s = small(2);
    let a = train_teacher(s.teacher(8), &s.splits, &s.train, 8).unwrap();
    let b = train_teacher(s.teacher(8), &s.splits, &s.train, 8).unwrap();
    assert_eq!(a.best.to_checkpoint().render(), b.best.to_checkpoint().render());
    assert_eq!(a.report.render_metrics(), b.report.render_metrics());
    let c = train_teacher(s.teacher(9), &s.splits, &s.train, 9).unwrap();
    assert_ne!(a.best.to_checkpoint().render(), c.best.to_checkpoint().render());
}

#[test]
fn huge_learning_rate_is_reported_as_divergence() {
    let mut s = small(3);
    s.train.learning_rate = 1e300;
    s.train.teacher_clip_norm = 0.0;
    let o = train_teacher(s.teacher(1), &s.splits, &s.train, 1).unwrap();
    assert!(o.diverged.is_some());
    assert_eq!(o.report.summary.unwrap().status, "diverged");
    assert!(o.best.params().iter().all(|(_, p)| p.all_finite()));
}

#[test]
fn patience_stops_once_accuracy_plateaus() {
    let mut s = synth_setup(SYNTH_N, 7);
    s.train = TrainConfig {
        epochs: 20,
        patience: 1,
        ..s.train
    };
    let o = train_student(s.student(7), &s.splits, &s.train, &BlendConfig::default(), StudentMode::Baseline, None, 7)
        .unwrap();
    let summary = o.report.summary.unwrap();
    assert_eq!(summary.status, "early_stop");
    assert!(summary.epochs_run < 20);
    assert_eq!(summary.epochs_run, summary.best_epoch + 1);
}

fn synth_config(root: &Path) -> RunConfig {
    let (train, test) = workflow::run_synth_data(&root.join("data"), 400, SYNTH_VOCAB, 2).unwrap();
    let mut cfg = RunConfig {
        seed: 3,
        out_dir: root.join("out"),
        ..Default::default()
    };
    cfg.data.train = Some(train);
    cfg.data.test = Some(test);
    cfg.teacher.embedding_dim = 16;
    cfg.teacher.hidden = 16;
    cfg.student.embedding_dim = 16;
    cfg.student.filter_count = 8;
    cfg.train.epochs = 1;
    cfg
}

#[test]
fn student_training_never_touches_teacher_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth_config(dir.path());
    let out = layout(&cfg);
    workflow::run_train_teacher(&cfg).unwrap();
    let (cache, _) = workflow::run_cache_teacher(&cfg, None).unwrap();
    let (t0, c0) = (file_fingerprint(&out.teacher()).unwrap(), file_fingerprint(&cache).unwrap());
    workflow::run_train_student(&cfg, StudentMode::Blended, Some(&cache), None).unwrap();
    workflow::run_train_student(&cfg, StudentMode::Baseline, None, None).unwrap();
    assert_eq!(file_fingerprint(&out.teacher()).unwrap(), t0);
    assert_eq!(file_fingerprint(&cache).unwrap(), c0);
}

#[test]
fn evaluate_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth_config(dir.path());
    let run = workflow::run_train_teacher(&cfg).unwrap();
    let a = workflow::run_evaluate(&cfg, &run.checkpoint).unwrap();
    let file = std::fs::read(layout(&cfg).root.join("eval-teacher.json")).unwrap();
    let b = workflow::run_evaluate(&cfg, &run.checkpoint).unwrap();
    assert_eq!(a, b);
    assert_eq!(std::fs::read(layout(&cfg).root.join("eval-teacher.json")).unwrap(), file);
    assert_eq!(a.examples, 80);
}

#[test]
fn stale_or_missing_cache_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth_config(dir.path());
    workflow::run_train_teacher(&cfg).unwrap();
    let (cache, _) = workflow::run_cache_teacher(&cfg, None).unwrap();

    let err = workflow::run_train_student(&cfg, StudentMode::Blended, None, None).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");

    // Retraining the teacher with another seed invalidates the cache.
    let mut other = cfg.clone();
    other.seed = 99;
    workflow::run_train_teacher(&other).unwrap();
    let err = workflow::run_train_student(&cfg, StudentMode::Blended, Some(&cache), None).unwrap_err();
    assert!(matches!(err, Error::Config(_)) && err.to_string().contains("stale"), "{err}");

    let mut c = TeacherCache::read(&cache).unwrap();
    c.fingerprint = "0".repeat(64);
    let err = c.verify(&file_fingerprint(&layout(&cfg).teacher()).unwrap()).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}
