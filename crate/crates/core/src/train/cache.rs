//! Persisted teacher posteriors.
//!
//! ```text
//! distill-teacher-cache 1
//! fingerprint <hex sha-256 of the teacher checkpoint file>
//! classes <K>
//! examples <N>
//! <example id> <p_1> … <p_K>      (N lines, ids in the order cached)
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::data::{Batch, Example};
use crate::distill::{Classifier, ClassDistribution, Provenance, TeacherModel};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::tensor::Tensor;

pub const MAGIC: &str = "distill-teacher-cache";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TeacherCache {
    pub fingerprint: String,
    pub classes: usize,
    rows: Vec<(String, ClassDistribution)>,
    index: HashMap<String, usize>,
}

impl TeacherCache {
    pub fn new(fingerprint: impl Into<String>, classes: usize) -> Self {
        TeacherCache {
            fingerprint: fingerprint.into(),
            classes,
            rows: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, id: impl Into<String>, dist: ClassDistribution) -> Result<()> {
        let id = id.into();
        if dist.classes() != self.classes {
            return Err(Error::dim("teacher_cache", &[self.classes], &[dist.classes()]));
        }
        if id.is_empty() || id.contains(char::is_whitespace) {
            return Err(Error::Input(format!("cache id {id:?} must be non-empty without whitespace")));
        }
        if self.index.contains_key(&id) {
            return Err(Error::Input(format!("duplicate cache id `{id}`")));
        }
        self.index.insert(id.clone(), self.rows.len());
        self.rows.push((id, dist));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ClassDistribution> {
        self.index.get(id).map(|&i| &self.rows[i].1)
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &ClassDistribution)> {
        self.rows.iter().map(|(id, d)| (id.as_str(), d))
    }

    /// Refuses a cache produced by a different teacher checkpoint.
    pub fn verify(&self, fingerprint: &str) -> Result<()> {
        if self.fingerprint != fingerprint {
            return Err(Error::Config(format!(
                "stale teacher cache: built from checkpoint {}, current teacher is {}",
                short(&self.fingerprint),
                short(fingerprint)
            )));
        }
        Ok(())
    }

    /// `[batch × K]` soft targets in batch row order.
    pub fn targets(&self, batch: &Batch) -> Result<Tensor> {
        let mut data = Vec::with_capacity(batch.size() * self.classes);
        for id in &batch.example_ids {
            let d = self
                .get(id)
                .ok_or_else(|| Error::Config(format!("teacher cache has no entry for example `{id}`")))?;
            data.extend_from_slice(d.probs());
        }
        Tensor::new(vec![batch.size(), self.classes], data)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC} {VERSION}");
        let _ = writeln!(s, "fingerprint {}", self.fingerprint);
        let _ = writeln!(s, "classes {}", self.classes);
        let _ = writeln!(s, "examples {}", self.rows.len());
        for (id, d) in &self.rows {
            s.push_str(id);
            for p in d.probs() {
                let _ = write!(s, " {p:e}");
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let bad = |line: usize, msg: String| Error::format(path, line, msg);
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut header = |key: &str| -> Result<(usize, String)> {
            let (ln, l) = lines.next().ok_or_else(|| bad(0, format!("missing `{key}` header")))?;
            let v = l
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| bad(ln, format!("expected `{key} …`")))?;
            Ok((ln, v.trim().to_string()))
        };
        let (ln, version) = header(MAGIC)?;
        if version != VERSION.to_string() {
            return Err(bad(ln, format!("unsupported cache version `{version}`")));
        }
        let (_, fp) = header("fingerprint")?;
        let (ln, k) = header("classes")?;
        let classes: usize = k.parse().map_err(|_| bad(ln, format!("bad class count `{k}`")))?;
        let (ln, n) = header("examples")?;
        let expected: usize = n.parse().map_err(|_| bad(ln, format!("bad example count `{n}`")))?;

        let mut cache = TeacherCache::new(fp, classes);
        for (ln, line) in lines {
            let mut parts = line.split_ascii_whitespace();
            let Some(id) = parts.next() else {
                return Err(bad(ln, "blank line".into()));
            };
            let probs: Vec<f64> = parts
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(ln, format!("bad probability: {e}")))?;
            if probs.len() != classes {
                return Err(bad(ln, format!("expected {classes} probabilities, found {}", probs.len())));
            }
            let d = ClassDistribution::new(probs, Provenance::Teacher).map_err(|e| bad(ln, e.to_string()))?;
            cache.insert(id, d).map_err(|e| bad(ln, e.to_string()))?;
        }
        if cache.len() != expected {
            return Err(bad(
                text.lines().count(),
                format!("header promises {expected} examples, found {}", cache.len()),
            ));
        }
        Ok(cache)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

fn short(fp: &str) -> &str {
    &fp[..fp.len().min(12)]
}

/// Eval-mode teacher posteriors for every example, batches sharded per
/// `exec`. Rows come out in `examples` order regardless of scheduling.
pub fn cache_teacher_predictions(
    teacher: &TeacherModel,
    fingerprint: &str,
    examples: &[Example],
    batch_size: usize,
    exec: Exec,
) -> Result<TeacherCache> {
    let batches = crate::data::make_batches(examples, batch_size, None, teacher.min_len())?;
    let preds = exec.map(&batches, |b| teacher.predict(b));
    let mut cache = TeacherCache::new(fingerprint, teacher.classes());
    for (b, p) in batches.iter().zip(preds) {
        for (id, d) in b.example_ids.iter().zip(p?) {
            cache.insert(id.clone(), d)?;
        }
    }
    Ok(cache)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TeacherCache {
        let mut c = TeacherCache::new("ab12", 3);
        c.insert("train:0", ClassDistribution::new(vec![0.2, 0.3, 0.5], Provenance::Teacher).unwrap())
            .unwrap();
        c.insert("test:0", ClassDistribution::uniform(3, Provenance::Teacher)).unwrap();
        c
    }

    #[test]
    fn roundtrip_is_exact() {
        let c = sample();
        let back = TeacherCache::parse(&c.render(), Path::new("mem")).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.render(), c.render());
    }

    #[test]
    fn stale_fingerprint_is_config_error() {
        assert!(matches!(sample().verify("ffff"), Err(Error::Config(_))));
        assert!(sample().verify("ab12").is_ok());
    }

    #[test]
    fn missing_id_is_config_error() {
        let mut b = Batch::from_rows(&[vec![2]], &[0], 1);
        b.example_ids = vec!["train:9".into()];
        assert!(matches!(sample().targets(&b), Err(Error::Config(_))));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = sample().render().replace("5e-1", "9e-1");
        assert!(matches!(TeacherCache::parse(&text, Path::new("m")), Err(Error::Format { line: 5, .. })));
        let short = sample().render().replace("examples 2", "examples 3");
        assert!(TeacherCache::parse(&short, Path::new("m")).is_err());
    }
}
