//! Optimizer, training recipes, teacher-posterior cache, metrics and the
//! file-level workflow behind the CLI.

mod adam;
mod cache;
mod config;
mod metrics;
mod recipes;
pub mod workflow;

pub use adam::{clip_global_norm, AdamConfig, AdamState};
pub use cache::{cache_teacher_predictions, TeacherCache};
pub use config::{require_path, DataConfig, RunConfig};
pub(crate) use metrics::json_line;
pub use metrics::{EpochRecord, EvalReport, MetricsReport, Summary, Timing};
pub use recipes::{
    agreement, evaluate, evaluate_ensemble, predict_all, rng_for, streams, train_student, train_teacher, Splits,
    StudentMode, TrainConfig, TrainOutcome,
};
