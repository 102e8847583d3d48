use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Batch;
use crate::error::{Error, Result};
use crate::nn::{
    bilstm_encode_steps, conv_text, dropout, Checkpoint, ConvFilterBank, EmbeddingTable, Linear, LstmParams, Mode,
};
use crate::tensor::{kernels, Eval, Graph, Tensor};

use super::{ClassDistribution, Provenance};

/// Interface the training engine needs from either model.
pub trait Classifier: Clone + Send + Sync {
    const KIND: &'static str;
    const PROVENANCE: Provenance;

    /// `[batch × classes]` unnormalized scores.
    fn logits<G: Graph>(&self, g: &mut G, batch: &Batch, mode: &mut Mode<'_>) -> Result<G::Value>;
    fn classes(&self) -> usize;
    /// Shortest padded width a batch must have.
    fn min_len(&self) -> usize;
    fn embedding(&self) -> &EmbeddingTable;
    fn params(&self) -> Vec<(String, &Arc<Tensor>)>;
    fn params_mut(&mut self) -> Vec<(String, &mut Arc<Tensor>)>;
    fn to_checkpoint(&self) -> Checkpoint;
    fn from_checkpoint(ckpt: Checkpoint) -> Result<Self>;

    fn param_count(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }

    /// Eval-mode posteriors, one per example.
    fn predict(&self, batch: &Batch) -> Result<Vec<ClassDistribution>> {
        let mut g = Eval;
        let logits = self.logits(&mut g, batch, &mut Mode::Eval)?;
        let probs = kernels::softmax(&logits)?;
        (0..probs.rows())
            .map(|i| ClassDistribution::new(probs.row(i).to_vec(), Self::PROVENANCE))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TeacherConfig {
    pub embedding_dim: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub forget_bias: f64,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        TeacherConfig {
            embedding_dim: 300,
            hidden: 256,
            dropout: 0.5,
            forget_bias: 1.0,
        }
    }
}

/// Embedding → BiLSTM → `[h_fwd ; h_bwd]` → dropout → linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherModel {
    pub embedding: EmbeddingTable,
    pub fwd: LstmParams,
    pub bwd: LstmParams,
    pub head: Linear,
    pub dropout: f64,
    pub forget_bias: f64,
}

impl TeacherModel {
    pub fn new<R: Rng + ?Sized>(cfg: &TeacherConfig, embedding: EmbeddingTable, classes: usize, rng: &mut R) -> Result<Self> {
        if embedding.dim() != cfg.embedding_dim {
            return Err(Error::Config(format!(
                "embedding table has dim {}, teacher configured for {}",
                embedding.dim(),
                cfg.embedding_dim
            )));
        }
        if cfg.hidden == 0 || classes == 0 {
            return Err(Error::Config("teacher hidden size and class count must be positive".into()));
        }
        let fwd = LstmParams::new(cfg.embedding_dim, cfg.hidden, cfg.forget_bias, rng);
        let bwd = LstmParams::new(cfg.embedding_dim, cfg.hidden, cfg.forget_bias, rng);
        let head = Linear::new(2 * cfg.hidden, classes, rng);
        Ok(TeacherModel {
            embedding,
            fwd,
            bwd,
            head,
            dropout: cfg.dropout,
            forget_bias: cfg.forget_bias,
        })
    }

    pub fn hidden(&self) -> usize {
        self.fwd.hidden()
    }
}

impl Classifier for TeacherModel {
    const KIND: &'static str = "teacher";
    const PROVENANCE: Provenance = Provenance::Teacher;

    fn logits<G: Graph>(&self, g: &mut G, batch: &Batch, mode: &mut Mode<'_>) -> Result<G::Value> {
        let mut steps = Vec::with_capacity(batch.max_len);
        for t in 0..batch.max_len {
            let x = self.embedding.lookup(g, &batch.column(t))?;
            steps.push(dropout(g, &x, self.dropout, mode)?);
        }
        let enc = bilstm_encode_steps(g, &self.fwd, &self.bwd, &steps, &batch.lengths)?;
        let enc = dropout(g, &enc, self.dropout, mode)?;
        self.head.forward(g, &enc)
    }

    fn classes(&self) -> usize {
        self.head.output_dim()
    }

    fn min_len(&self) -> usize {
        1
    }

    fn embedding(&self) -> &EmbeddingTable {
        &self.embedding
    }

    fn params(&self) -> Vec<(String, &Arc<Tensor>)> {
        let mut out = vec![("embedding.weight".to_string(), &self.embedding.weights)];
        for (prefix, p) in [("fwd", &self.fwd), ("bwd", &self.bwd)] {
            out.extend(p.named().into_iter().map(|(n, t)| (format!("{prefix}.{n}"), t)));
        }
        out.push(("head.weight".into(), &self.head.weight));
        out.push(("head.bias".into(), &self.head.bias));
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Arc<Tensor>)> {
        let mut out = vec![("embedding.weight".to_string(), &mut self.embedding.weights)];
        for (prefix, p) in [("fwd", &mut self.fwd), ("bwd", &mut self.bwd)] {
            out.extend(p.named_mut().into_iter().map(|(n, t)| (format!("{prefix}.{n}"), t)));
        }
        out.push(("head.weight".into(), &mut self.head.weight));
        out.push(("head.bias".into(), &mut self.head.bias));
        out
    }

    fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new(Self::KIND);
        c.set_meta("vocab_size", self.embedding.vocab_size());
        c.set_meta("embedding_dim", self.embedding.dim());
        c.set_meta("pad_id", self.embedding.pad_id);
        c.set_meta("hidden", self.hidden());
        c.set_meta("classes", self.classes());
        c.set_meta("dropout", self.dropout);
        c.set_meta("forget_bias", self.forget_bias);
        for (name, t) in self.params() {
            c.push(name, t);
        }
        c
    }

    fn from_checkpoint(mut c: Checkpoint) -> Result<Self> {
        check_kind(&c, Self::KIND)?;
        let v: usize = c.meta_parse("vocab_size")?;
        let d: usize = c.meta_parse("embedding_dim")?;
        let h: usize = c.meta_parse("hidden")?;
        let k: usize = c.meta_parse("classes")?;
        let embedding = EmbeddingTable::new(c.take("embedding.weight", &[v, d])?, c.meta_parse("pad_id")?)?;
        let mut dirs = Vec::with_capacity(2);
        for prefix in ["fwd", "bwd"] {
            let mut take = |kind: &str, gate: &str, shape: &[usize]| c.take(&format!("{prefix}.{kind}_{gate}"), shape);
            let gates = crate::nn::LSTM_GATES;
            let w = try_array(|i| take("w", gates[i], &[h, d]))?;
            let u = try_array(|i| take("u", gates[i], &[h, h]))?;
            let b = try_array(|i| take("b", gates[i], &[h]))?;
            dirs.push(LstmParams::from_parts(w, u, b)?);
        }
        let bwd = dirs.pop().expect("two directions");
        let fwd = dirs.pop().expect("two directions");
        let head = Linear::from_parts(c.take("head.weight", &[k, 2 * h])?, c.take("head.bias", &[k])?);
        Ok(TeacherModel {
            embedding,
            fwd,
            bwd,
            head,
            dropout: c.meta_parse("dropout")?,
            forget_bias: c.meta_parse("forget_bias")?,
        })
    }
}

fn try_array<T, const N: usize>(mut f: impl FnMut(usize) -> Result<T>) -> Result<[T; N]> {
    let v: Vec<T> = (0..N).map(&mut f).collect::<Result<_>>()?;
    v.try_into().map_err(|_| Error::Internal("array length".into()))
}

fn check_kind(c: &Checkpoint, kind: &str) -> Result<()> {
    if c.kind != kind {
        return Err(Error::Input(format!("expected a {kind} checkpoint, found `{}`", c.kind)));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudentConfig {
    pub embedding_dim: usize,
    pub filter_widths: Vec<usize>,
    pub filter_count: usize,
    pub dropout: f64,
}

impl Default for StudentConfig {
    fn default() -> Self {
        StudentConfig {
            embedding_dim: 300,
            filter_widths: vec![3, 4, 5],
            filter_count: 100,
            dropout: 0.5,
        }
    }
}

/// Embedding → per-width conv + ReLU + max-over-time → concat → dropout →
/// linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentModel {
    pub embedding: EmbeddingTable,
    pub banks: Vec<ConvFilterBank>,
    pub head: Linear,
    pub dropout: f64,
}

impl StudentModel {
    pub fn new<R: Rng + ?Sized>(cfg: &StudentConfig, embedding: EmbeddingTable, classes: usize, rng: &mut R) -> Result<Self> {
        if embedding.dim() != cfg.embedding_dim {
            return Err(Error::Config(format!(
                "embedding table has dim {}, student configured for {}",
                embedding.dim(),
                cfg.embedding_dim
            )));
        }
        if cfg.filter_widths.is_empty() || classes == 0 {
            return Err(Error::Config("student needs at least one filter width and one class".into()));
        }
        let banks = cfg
            .filter_widths
            .iter()
            .map(|&w| ConvFilterBank::new(w, cfg.filter_count, cfg.embedding_dim, rng))
            .collect::<Result<Vec<_>>>()?;
        let head = Linear::new(cfg.filter_widths.len() * cfg.filter_count, classes, rng);
        Ok(StudentModel {
            embedding,
            banks,
            head,
            dropout: cfg.dropout,
        })
    }

    pub fn widths(&self) -> Vec<usize> {
        self.banks.iter().map(ConvFilterBank::width).collect()
    }

    pub fn max_width(&self) -> usize {
        self.widths().into_iter().max().unwrap_or(1)
    }
}

impl Classifier for StudentModel {
    const KIND: &'static str = "student";
    const PROVENANCE: Provenance = Provenance::Student;

    fn logits<G: Graph>(&self, g: &mut G, batch: &Batch, mode: &mut Mode<'_>) -> Result<G::Value> {
        let (b, l, d) = (batch.size(), batch.max_len, self.embedding.dim());
        let min = self.max_width();
        if l < min {
            return Err(Error::Internal(format!("batch padded to {l}, student needs at least {min}")));
        }
        // Sentences shorter than the widest filter are treated as padded out
        // to that width.
        let lengths: Vec<usize> = batch.lengths.iter().map(|&n| n.max(min)).collect();
        let flat = self.embedding.lookup(g, &batch.ids)?;
        let embedded = g.reshape(&flat, &[b, l, d])?;
        let mut pooled = Vec::with_capacity(self.banks.len());
        for bank in &self.banks {
            let w = bank.bind(g);
            pooled.push(conv_text(g, &w, &embedded, &lengths)?);
        }
        let cat = g.concat(&pooled, 1)?;
        let cat = dropout(g, &cat, self.dropout, mode)?;
        self.head.forward(g, &cat)
    }

    fn classes(&self) -> usize {
        self.head.output_dim()
    }

    fn min_len(&self) -> usize {
        self.max_width()
    }

    fn embedding(&self) -> &EmbeddingTable {
        &self.embedding
    }

    fn params(&self) -> Vec<(String, &Arc<Tensor>)> {
        let mut out = vec![("embedding.weight".to_string(), &self.embedding.weights)];
        for bank in &self.banks {
            let w = bank.width();
            out.push((format!("conv{w}.kernels"), &bank.kernels));
            out.push((format!("conv{w}.bias"), &bank.bias));
        }
        out.push(("head.weight".into(), &self.head.weight));
        out.push(("head.bias".into(), &self.head.bias));
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Arc<Tensor>)> {
        let mut out = vec![("embedding.weight".to_string(), &mut self.embedding.weights)];
        for bank in &mut self.banks {
            let w = bank.width();
            out.push((format!("conv{w}.kernels"), &mut bank.kernels));
            out.push((format!("conv{w}.bias"), &mut bank.bias));
        }
        out.push(("head.weight".into(), &mut self.head.weight));
        out.push(("head.bias".into(), &mut self.head.bias));
        out
    }

    fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new(Self::KIND);
        c.set_meta("vocab_size", self.embedding.vocab_size());
        c.set_meta("embedding_dim", self.embedding.dim());
        c.set_meta("pad_id", self.embedding.pad_id);
        let widths: Vec<String> = self.widths().iter().map(|w| w.to_string()).collect();
        c.set_meta("filter_widths", widths.join(","));
        c.set_meta("filter_count", self.banks.first().map_or(0, ConvFilterBank::count));
        c.set_meta("classes", self.classes());
        c.set_meta("dropout", self.dropout);
        for (name, t) in self.params() {
            c.push(name, t);
        }
        c
    }

    fn from_checkpoint(mut c: Checkpoint) -> Result<Self> {
        check_kind(&c, Self::KIND)?;
        let v: usize = c.meta_parse("vocab_size")?;
        let d: usize = c.meta_parse("embedding_dim")?;
        let n: usize = c.meta_parse("filter_count")?;
        let k: usize = c.meta_parse("classes")?;
        let widths: Vec<usize> = c
            .meta_str("filter_widths")?
            .split(',')
            .map(|w| w.parse().map_err(|_| Error::Input(format!("bad filter width `{w}`"))))
            .collect::<Result<_>>()?;
        let embedding = EmbeddingTable::new(c.take("embedding.weight", &[v, d])?, c.meta_parse("pad_id")?)?;
        let banks = widths
            .iter()
            .map(|&w| {
                ConvFilterBank::from_parts(
                    c.take(&format!("conv{w}.kernels"), &[n, w, d])?,
                    c.take(&format!("conv{w}.bias"), &[n])?,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let head = Linear::from_parts(c.take("head.weight", &[k, widths.len() * n])?, c.take("head.bias", &[k])?);
        Ok(StudentModel {
            embedding,
            banks,
            head,
            dropout: c.meta_parse("dropout")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_teacher(seed: u64) -> TeacherModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = TeacherConfig {
            embedding_dim: 4,
            hidden: 3,
            dropout: 0.0,
            forget_bias: 1.0,
        };
        let emb = EmbeddingTable::random(12, 4, 0, &mut rng).unwrap();
        TeacherModel::new(&cfg, emb, 3, &mut rng).unwrap()
    }

    fn small_student(seed: u64) -> StudentModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = StudentConfig {
            embedding_dim: 4,
            filter_widths: vec![3, 4, 5],
            filter_count: 2,
            dropout: 0.0,
        };
        let emb = EmbeddingTable::random(12, 4, 0, &mut rng).unwrap();
        StudentModel::new(&cfg, emb, 3, &mut rng).unwrap()
    }

    fn batch(min_len: usize) -> Batch {
        Batch::from_rows(&[vec![2, 3, 4], vec![5, 6, 7, 8, 9, 10, 11]], &[0, 2], min_len)
    }

    #[test]
    fn zero_head_gives_uniform_posteriors() {
        let mut t = small_teacher(1);
        t.head = Linear::from_parts(Tensor::zeros(&[3, 6]), Tensor::zeros(&[3]));
        for d in t.predict(&batch(1)).unwrap() {
            assert!(d.probs().iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
        }
        let mut s = small_student(1);
        s.head = Linear::from_parts(Tensor::zeros(&[3, 6]), Tensor::zeros(&[3]));
        for d in s.predict(&batch(5)).unwrap() {
            assert!(d.probs().iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
        }
    }

    #[test]
    fn head_widths_match_features() {
        let t = small_teacher(2);
        assert_eq!(t.head.input_dim(), 2 * t.hidden());
        let s = small_student(2);
        assert_eq!(s.head.input_dim(), 6);
    }

    #[test]
    fn checkpoint_roundtrip_restores_models() {
        let t = small_teacher(3);
        let p = std::path::Path::new("mem");
        let back = TeacherModel::from_checkpoint(Checkpoint::parse(&t.to_checkpoint().render(), p).unwrap()).unwrap();
        assert_eq!(back, t);
        let s = small_student(3);
        let back = StudentModel::from_checkpoint(Checkpoint::parse(&s.to_checkpoint().render(), p).unwrap()).unwrap();
        assert_eq!(back, s);
        assert!(StudentModel::from_checkpoint(t.to_checkpoint()).is_err());
    }

    #[test]
    fn student_rejects_underpadded_batch() {
        let s = small_student(4);
        let b = Batch::from_rows(&[vec![2, 3]], &[0], 1);
        assert!(matches!(s.predict(&b), Err(Error::Internal(_))));
    }

    #[test]
    fn out_of_vocab_is_input_error() {
        let t = small_teacher(5);
        let b = Batch::from_rows(&[vec![2, 30]], &[0], 1);
        assert!(matches!(t.predict(&b), Err(Error::Input(_))));
    }
}
