use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ probs = 1`.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Teacher,
    Student,
    Ensemble,
}

/// A normalized posterior over `K` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution {
    probs: Vec<f64>,
    pub provenance: Provenance,
}

impl ClassDistribution {
    pub fn new(probs: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Input("distribution over zero classes".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Input(format!("distribution has negative or non-finite entries: {probs:?}")));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Input(format!("distribution sums to {s}, not 1")));
        }
        Ok(ClassDistribution { probs, provenance })
    }

    pub fn uniform(k: usize, provenance: Provenance) -> Self {
        ClassDistribution {
            probs: vec![1.0 / k as f64; k],
            provenance,
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn classes(&self) -> usize {
        self.probs.len()
    }

    /// Most probable class; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }

    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|p| p * p.ln())
            .sum::<f64>()
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v > xs[best] {
            best = i;
        }
    }
    best
}
