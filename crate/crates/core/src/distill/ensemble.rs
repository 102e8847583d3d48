use crate::error::{Error, Result};

use super::{ClassDistribution, Provenance};

/// `γ·p_teacher + (1−γ)·p_student`.
///
/// Evaluated as `p_s + γ(p_t − p_s)` so that agreeing inputs come back
/// unchanged; the endpoints `γ ∈ {0, 1}` return the operands exactly.
pub fn ensemble(teacher: &ClassDistribution, student: &ClassDistribution, gamma: f64) -> Result<ClassDistribution> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Config(format!("gamma {gamma} outside [0, 1]")));
    }
    if teacher.classes() != student.classes() {
        return Err(Error::dim("ensemble", &[teacher.classes()], &[student.classes()]));
    }
    let probs: Vec<f64> = if gamma == 1.0 {
        teacher.probs().to_vec()
    } else if gamma == 0.0 {
        student.probs().to_vec()
    } else {
        teacher
            .probs()
            .iter()
            .zip(student.probs())
            .map(|(&t, &s)| s + gamma * (t - s))
            .collect()
    };
    ClassDistribution::new(probs, Provenance::Ensemble)
}
