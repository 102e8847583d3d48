use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Eval, Graph, Tensor};

use super::ClassDistribution;

/// Weights of the blended objective and the test-time ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlendConfig {
    /// Weight of the soft (teacher) term; `1 − lambda` weights the hard term.
    pub lambda: f64,
    /// Teacher weight in the posterior ensemble.
    pub gamma: f64,
    /// Softening temperature for the soft term. 1.0 uses raw posteriors.
    pub temperature: f64,
}

impl Default for BlendConfig {
    fn default() -> Self {
        BlendConfig {
            lambda: 0.5,
            gamma: 0.4,
            temperature: 1.0,
        }
    }
}

impl BlendConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("gamma", self.gamma)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::Config(format!("temperature {} must be positive", self.temperature)));
        }
        Ok(())
    }
}

/// `[n×k]` one-hot rows for integer labels.
pub fn one_hot(labels: &[usize], k: usize) -> Result<Tensor> {
    let mut t = Tensor::zeros(&[labels.len(), k]);
    for (i, &y) in labels.iter().enumerate() {
        if y >= k {
            return Err(Error::Input(format!("label {y} out of range for {k} classes")));
        }
        t.data_mut()[i * k + y] = 1.0;
    }
    Ok(t)
}

fn classes<G: Graph>(g: &G, logits: &G::Value) -> Result<usize> {
    let t = g.tensor(logits);
    let (_, k) = t.dims2("loss")?;
    Ok(k)
}

/// Mean `−log softmax(logits)[label]` over the batch.
pub fn hard_loss<G: Graph>(g: &mut G, logits: &G::Value, labels: &[usize]) -> Result<G::Value> {
    let k = classes(g, logits)?;
    let targets = one_hot(labels, k)?;
    g.soft_cross_entropy(logits, &targets)
}

/// Mean `−Σ_c p_teacher[c]·log softmax(logits/T)[c]`. `teacher` rows are
/// constants: nothing flows back into them.
pub fn soft_loss<G: Graph>(g: &mut G, logits: &G::Value, teacher: &Tensor, temperature: f64) -> Result<G::Value> {
    if temperature == 1.0 {
        return g.soft_cross_entropy(logits, teacher);
    }
    let k = classes(g, logits)?;
    let inv = 1.0 / temperature;
    let mut soft = teacher.clone();
    for row in soft.data_mut().chunks_mut(k) {
        let mut s = 0.0;
        for p in row.iter_mut() {
            *p = p.powf(inv);
            s += *p;
        }
        for p in row.iter_mut() {
            *p /= s;
        }
    }
    let scaled = g.scale(logits, inv);
    g.soft_cross_entropy(&scaled, &soft)
}

/// `λ·L_soft + (1−λ)·L_hard`. At `λ = 0` only the hard term is built (and
/// `teacher` may be `None`); at `λ = 1` only the soft term.
pub fn blended_loss<G: Graph>(
    g: &mut G,
    cfg: &BlendConfig,
    logits: &G::Value,
    teacher: Option<&Tensor>,
    labels: &[usize],
) -> Result<G::Value> {
    cfg.validate()?;
    let lambda = cfg.lambda;
    if lambda == 0.0 {
        return hard_loss(g, logits, labels);
    }
    let teacher = teacher.ok_or_else(|| Error::Config("soft loss weight > 0 but no teacher targets".into()))?;
    let soft = soft_loss(g, logits, teacher, cfg.temperature)?;
    if lambda == 1.0 {
        return Ok(soft);
    }
    let hard = hard_loss(g, logits, labels)?;
    let a = g.scale(&soft, lambda);
    let b = g.scale(&hard, 1.0 - lambda);
    g.add(&a, &b)
}

fn logit_row(logits: &[f64]) -> Result<Tensor> {
    Tensor::new(vec![1, logits.len()], logits.to_vec())
}

/// `−ln q[label]`.
pub fn cross_entropy_hard(q: &ClassDistribution, label: usize) -> Result<f64> {
    let p = q
        .probs()
        .get(label)
        .ok_or_else(|| Error::Input(format!("label {label} out of range for {} classes", q.classes())))?;
    Ok(-p.ln())
}

/// `H(p_teacher, softmax(logits))`, through the same kernel as training.
pub fn cross_entropy_soft(teacher: &ClassDistribution, logits: &[f64]) -> Result<f64> {
    if teacher.classes() != logits.len() {
        return Err(Error::dim("cross_entropy_soft", &[teacher.classes()], &[logits.len()]));
    }
    let mut g = Eval;
    let l = g.constant(logit_row(logits)?);
    let t = Tensor::new(vec![1, logits.len()], teacher.probs().to_vec())?;
    g.soft_cross_entropy(&l, &t)?.item()
}

/// Single-example [`blended_loss`].
pub fn blended_loss_value(cfg: &BlendConfig, teacher: &ClassDistribution, logits: &[f64], label: usize) -> Result<f64> {
    if teacher.classes() != logits.len() {
        return Err(Error::dim("blended_loss", &[teacher.classes()], &[logits.len()]));
    }
    let mut g = Eval;
    let l = g.constant(logit_row(logits)?);
    let t = Tensor::new(vec![1, logits.len()], teacher.probs().to_vec())?;
    blended_loss(&mut g, cfg, &l, Some(&t), &[label])?.item()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distill::Provenance;

    fn d(p: &[f64]) -> ClassDistribution {
        ClassDistribution::new(p.to_vec(), Provenance::Teacher).unwrap()
    }

    #[test]
    fn hard_reference_values() {
        assert!((cross_entropy_hard(&d(&[0.25; 4]), 2).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert_eq!(cross_entropy_hard(&d(&[0.0, 1.0]), 1).unwrap(), 0.0);
        // −ln 0.75 to 40 digits: 0.28768207245178092743921900599382743150…
        let v = cross_entropy_hard(&d(&[0.25, 0.75]), 1).unwrap();
        assert!((v - 0.287_682_072_451_780_927_44).abs() < 1e-15);
        assert!(matches!(cross_entropy_hard(&d(&[0.5, 0.5]), 2), Err(Error::Input(_))));
    }

    #[test]
    fn soft_reference_values() {
        // −(0.7 + 0.3)·ln 0.5
        let v = cross_entropy_soft(&d(&[0.7, 0.3]), &[0.0, 0.0]).unwrap();
        assert!((v - 0.693_147_180_559_945_309_42).abs() < 1e-15);
    }

    #[test]
    fn soft_equals_entropy_at_matching_logits() {
        let p = d(&[0.2, 0.5, 0.3]);
        let logits: Vec<f64> = p.probs().iter().map(|v| v.ln() + 3.0).collect();
        let v = cross_entropy_soft(&p, &logits).unwrap();
        assert!((v - p.entropy()).abs() < 1e-12);
    }

    #[test]
    fn blend_endpoints_and_interior() {
        let p = d(&[0.6, 0.4]);
        let logits = [0.3, -1.2];
        let soft = cross_entropy_soft(&p, &logits).unwrap();
        let q = crate::tensor::kernels::softmax(&Tensor::vector(logits.to_vec())).unwrap();
        let hard = cross_entropy_hard(&ClassDistribution::new(q.into_data(), Provenance::Student).unwrap(), 1).unwrap();
        let at = |lambda| blended_loss_value(&BlendConfig { lambda, ..Default::default() }, &p, &logits, 1).unwrap();
        assert_eq!(at(1.0), soft);
        assert!((at(0.0) - hard).abs() < 1e-14);
        assert!((at(0.5) - 0.5 * (soft + at(0.0))).abs() < 1e-15);
    }

    #[test]
    fn validate_ranges() {
        assert!(BlendConfig { lambda: 1.5, ..Default::default() }.validate().is_err());
        assert!(BlendConfig { gamma: -0.1, ..Default::default() }.validate().is_err());
        assert!(BlendConfig { temperature: 0.0, ..Default::default() }.validate().is_err());
        assert!(BlendConfig::default().validate().is_ok());
    }

    #[test]
    fn soft_weight_without_teacher_is_config_error() {
        let mut g = Eval;
        let l = g.constant(Tensor::zeros(&[1, 2]));
        let err = blended_loss(&mut g, &BlendConfig::default(), &l, None, &[0]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
