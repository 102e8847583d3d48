//! Helpers shared by the integration test targets: finite-difference
//! gradient checks, straight-line reference implementations and small
//! model / corpus builders.
#![allow(dead_code)]

use std::sync::Arc;

use distill_core::data::synth_dataset;
use distill_core::nn::{EmbeddingTable, LstmParams};
use distill_core::tensor::{Eval, Graph, Tape, Tensor};
use distill_core::train::workflow::synth_splits;
use distill_core::train::{rng_for, Splits, TrainConfig};
use distill_core::distill::{StudentConfig, StudentModel, TeacherConfig, TeacherModel};
use distill_core::Result;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A scalar function of parameter tensors, runnable on either backend.
pub trait Objective {
    fn eval<G: Graph>(&self, g: &mut G, params: &[Arc<Tensor>]) -> Result<G::Value>;
}

pub const FD_EPS: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;

/// `‖analytic − numeric‖₂ / max(‖analytic‖₂, ‖numeric‖₂)` over every
/// parameter element, with central differences of step `eps`.
pub fn grad_rel_error<O: Objective>(f: &O, params: &[Tensor], eps: f64) -> f64 {
    let arcs: Vec<Arc<Tensor>> = params.iter().cloned().map(Arc::new).collect();
    let mut tape = Tape::new();
    let out = f.eval(&mut tape, &arcs).expect("objective runs on tape");
    tape.backward(out).expect("scalar objective");
    let analytic: Vec<f64> = arcs
        .iter()
        .flat_map(|p| match tape.param_grad(p) {
            Some(g) => g.data().to_vec(),
            None => vec![0.0; p.len()],
        })
        .collect();

    let value = |ps: &[Arc<Tensor>]| -> f64 {
        let mut g = Eval;
        f.eval(&mut g, ps).expect("objective runs on eval").item().expect("scalar")
    };
    let mut numeric = Vec::with_capacity(analytic.len());
    for i in 0..params.len() {
        for j in 0..params[i].len() {
            let at = |delta: f64| {
                let mut ps = arcs.clone();
                let mut t = params[i].clone();
                t.data_mut()[j] += delta;
                ps[i] = Arc::new(t);
                value(&ps)
            };
            numeric.push((at(eps) - at(-eps)) / (2.0 * eps));
        }
    }
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    let scale = na.max(nn);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

pub fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    Tensor::uniform(shape, -scale, scale, rng)
}

/// Fixed random weighting so a tensor output becomes a scalar that
/// depends on every element.
pub fn project<G: Graph>(g: &mut G, out: &G::Value, weights: &Tensor) -> Result<G::Value> {
    let w = g.constant(weights.clone());
    let m = g.mul(out, &w)?;
    Ok(g.sum(&m))
}

pub fn random_distribution(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0f64).powi(3)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

pub fn lstm_from(params: &[Arc<Tensor>]) -> LstmParams {
    LstmParams {
        w: std::array::from_fn(|i| Arc::clone(&params[i])),
        u: std::array::from_fn(|i| Arc::clone(&params[4 + i])),
        b: std::array::from_fn(|i| Arc::clone(&params[8 + i])),
    }
}

pub fn lstm_tensors(rng: &mut ChaCha8Rng, input: usize, hidden: usize) -> Vec<Tensor> {
    let mut v = Vec::new();
    for _ in 0..4 {
        v.push(rand_tensor(rng, &[hidden, input], 0.8));
    }
    for _ in 0..4 {
        v.push(rand_tensor(rng, &[hidden, hidden], 0.8));
    }
    for _ in 0..4 {
        v.push(rand_tensor(rng, &[hidden], 0.5));
    }
    v
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Straight-line LSTM step, one row at a time.
pub fn lstm_reference(p: &[Tensor], x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hidden = h.len();
    let input = x.len();
    let pre = |g: usize, j: usize| {
        let mut z = p[8 + g].data()[j];
        for k in 0..input {
            z += p[g].data()[j * input + k] * x[k];
        }
        for k in 0..hidden {
            z += p[4 + g].data()[j * hidden + k] * h[k];
        }
        z
    };
    let mut hn = vec![0.0; hidden];
    let mut cn = vec![0.0; hidden];
    for j in 0..hidden {
        let f = sigmoid(pre(0, j));
        let i = sigmoid(pre(1, j));
        let o = sigmoid(pre(2, j));
        let cand = pre(3, j).tanh();
        cn[j] = f * c[j] + i * cand;
        hn[j] = o * cn[j].tanh();
    }
    (hn, cn)
}

/// Nested-loop correlation + bias + ReLU + max over the first `valid`
/// positions of each example.
pub fn conv_reference(x: &Tensor, k: &Tensor, bias: &Tensor, valid: &[usize]) -> Vec<f64> {
    let (b, l, d) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (c, w) = (k.shape()[0], k.shape()[1]);
    let mut out = vec![0.0; b * c];
    for bi in 0..b {
        for ci in 0..c {
            let mut best = f64::NEG_INFINITY;
            for t in 0..valid[bi] {
                let mut s = bias.data()[ci];
                for o in 0..w {
                    for di in 0..d {
                        s += x.data()[(bi * l + t + o) * d + di] * k.data()[(ci * w + o) * d + di];
                    }
                }
                best = best.max(s.max(0.0));
            }
            out[bi * c + ci] = best;
        }
    }
    out
}

/// `−Σ p_c log softmax(z)_c`, computed directly.
pub fn soft_ce_reference(p: &[f64], z: &[f64]) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    -p.iter().zip(z).map(|(p, z)| if *p == 0.0 { 0.0 } else { p * (z - lse) }).sum::<f64>()
}

/// Synthetic splits plus matched small model configs for desk-scale runs.
pub struct SynthSetup {
    pub vocab_len: usize,
    pub splits: Splits,
    pub teacher: TeacherConfig,
    pub student: StudentConfig,
    pub train: TrainConfig,
}

pub const SYNTH_N: usize = 2000;
pub const SYNTH_VOCAB: usize = 200;

pub fn synth_setup(n: usize, data_seed: u64) -> SynthSetup {
    let d = synth_dataset(n, SYNTH_VOCAB, data_seed).expect("synthetic corpus");
    let (vocab, splits) = synth_splits(&d);
    SynthSetup {
        vocab_len: vocab.len(),
        splits,
        teacher: TeacherConfig {
            embedding_dim: 32,
            hidden: 32,
            dropout: 0.5,
            forget_bias: 1.0,
        },
        student: StudentConfig {
            embedding_dim: 32,
            filter_widths: vec![3, 4, 5],
            filter_count: 32,
            dropout: 0.5,
        },
        train: TrainConfig {
            epochs: 5,
            learning_rate: 1e-2,
            ..TrainConfig::default()
        },
    }
}

impl SynthSetup {
    pub fn teacher(&self, seed: u64) -> TeacherModel {
        let emb = EmbeddingTable::random(self.vocab_len, self.teacher.embedding_dim, 0, &mut rng_for(seed, 4)).unwrap();
        TeacherModel::new(&self.teacher, emb, self.splits.labels.len(), &mut rng_for(seed, 0)).unwrap()
    }

    pub fn student(&self, seed: u64) -> StudentModel {
        let emb = EmbeddingTable::random(self.vocab_len, self.student.embedding_dim, 0, &mut rng_for(seed, 4)).unwrap();
        StudentModel::new(&self.student, emb, self.splits.labels.len(), &mut rng_for(seed, 1)).unwrap()
    }
}

pub const TREC_CLASSES: [&str; 6] = ["ABBR", "DESC", "ENTY", "HUM", "LOC", "NUM"];

/// Six-class question corpus with the real split sizes, for exercising the
/// ingestion and training path when the real files are absent. Each class
/// has its own question openers; the rest of every question is shared noise.
pub fn trec_shaped_fixture(dir: &std::path::Path, seed: u64) -> (std::path::PathBuf, std::path::PathBuf) {
    let openers: [&[&str]; 6] = [
        &["what does", "what is the abbreviation for", "what do the letters"],
        &["how did", "why do", "what is the definition of"],
        &["what kind of", "which animal", "what color is"],
        &["who was", "who invented", "what person"],
        &["where is", "what country", "which city"],
        &["how many", "when did", "how much"],
    ];
    let mut rng = rng_for(seed, 9);
    let mut write = |name: &str, n: usize| {
        let path = dir.join(name);
        let mut w = csv::Writer::from_path(&path).unwrap();
        for _ in 0..n {
            let c = rng.gen_range(0..6);
            let opener = openers[c][rng.gen_range(0..openers[c].len())];
            let len = rng.gen_range(2..10);
            let noise: Vec<String> = (0..len).map(|_| format!("n{}", rng.gen_range(0..400))).collect();
            let text = format!("{opener} {} ?", noise.join(" "));
            w.write_record([TREC_CLASSES[c], text.as_str()]).unwrap();
        }
        w.flush().unwrap();
        path
    };
    let train = write("train.csv", 5452);
    let test = write("test.csv", 500);
    (train, test)
}
