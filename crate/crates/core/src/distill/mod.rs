//! Teacher (BiLSTM) and student (max-over-time CNN) classifiers, the
//! posterior ensemble and the blended soft/hard distillation loss.

mod dist;
mod ensemble;
mod loss;
mod models;

pub use dist::{argmax, ClassDistribution, Provenance};
pub use ensemble::ensemble;
pub use loss::{
    blended_loss, blended_loss_value, cross_entropy_hard, cross_entropy_soft, hard_loss, one_hot, soft_loss,
    BlendConfig,
};
pub use models::{Classifier, StudentConfig, StudentModel, TeacherConfig, TeacherModel};
