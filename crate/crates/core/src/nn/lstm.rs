use std::sync::Arc;

use rand::Rng;

use crate::data::Batch;
use crate::error::{Error, Result};
use crate::tensor::{Graph, Tensor};

use super::{fan_in_uniform, EmbeddingTable};

/// Gate order used for every per-gate array below.
pub const GATES: [&str; 4] = ["f", "i", "o", "c"];

/// One LSTM direction: input weights `W[hidden×input]`, recurrent weights
/// `U[hidden×hidden]` and biases `b[hidden]` for the forget, input, output
/// and cell-candidate gates, in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w: [Arc<Tensor>; 4],
    pub u: [Arc<Tensor>; 4],
    pub b: [Arc<Tensor>; 4],
}

/// Parameters bound to a particular graph.
pub struct LstmWeights<V> {
    pub w: [V; 4],
    pub u: [V; 4],
    pub b: [V; 4],
}

#[derive(Debug, Clone)]
pub struct LstmState<V> {
    pub h: V,
    pub c: V,
}

impl LstmParams {
    /// `W` and `U` from `uniform(±1/√fan_in)`, biases zero except the forget
    /// gate, which starts at `forget_bias`.
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, forget_bias: f64, rng: &mut R) -> Self {
        let w = std::array::from_fn(|_| Arc::new(fan_in_uniform(&[hidden, input], input, rng)));
        let u = std::array::from_fn(|_| Arc::new(fan_in_uniform(&[hidden, hidden], hidden, rng)));
        let b = std::array::from_fn(|i| {
            let v = if i == 0 { forget_bias } else { 0.0 };
            Arc::new(Tensor::full(&[hidden], v))
        });
        LstmParams { w, u, b }
    }

    pub fn from_parts(w: [Tensor; 4], u: [Tensor; 4], b: [Tensor; 4]) -> Result<Self> {
        let hidden = b[0].len();
        let input = w[0].shape().get(1).copied().unwrap_or(0);
        for g in 0..4 {
            if w[g].shape() != [hidden, input] || u[g].shape() != [hidden, hidden] || b[g].shape() != [hidden] {
                return Err(Error::dim("lstm_params", w[g].shape(), u[g].shape()));
            }
        }
        Ok(LstmParams {
            w: w.map(Arc::new),
            u: u.map(Arc::new),
            b: b.map(Arc::new),
        })
    }

    pub fn hidden(&self) -> usize {
        self.b[0].len()
    }

    pub fn input(&self) -> usize {
        self.w[0].shape()[1]
    }

    pub fn bind<G: Graph>(&self, g: &mut G) -> LstmWeights<G::Value> {
        LstmWeights {
            w: std::array::from_fn(|i| g.param(&self.w[i])),
            u: std::array::from_fn(|i| g.param(&self.u[i])),
            b: std::array::from_fn(|i| g.param(&self.b[i])),
        }
    }

    /// `(name suffix, tensor)` pairs in a fixed order.
    pub fn named(&self) -> Vec<(String, &Arc<Tensor>)> {
        let mut out = Vec::with_capacity(12);
        for (kind, arr) in [("w", &self.w), ("u", &self.u), ("b", &self.b)] {
            for (gate, t) in GATES.iter().zip(arr.iter()) {
                out.push((format!("{kind}_{gate}"), t));
            }
        }
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Arc<Tensor>)> {
        let mut out = Vec::with_capacity(12);
        for (kind, arr) in [("w", &mut self.w), ("u", &mut self.u), ("b", &mut self.b)] {
            for (gate, t) in GATES.iter().zip(arr.iter_mut()) {
                out.push((format!("{kind}_{gate}"), t));
            }
        }
        out
    }
}

impl<V: Clone> LstmState<V> {
    pub fn zeros<G: Graph<Value = V>>(g: &mut G, batch: usize, hidden: usize) -> Self {
        LstmState {
            h: g.constant(Tensor::zeros(&[batch, hidden])),
            c: g.constant(Tensor::zeros(&[batch, hidden])),
        }
    }
}

fn gate<G: Graph>(g: &mut G, p: &LstmWeights<G::Value>, k: usize, x: &G::Value, h: &G::Value) -> Result<G::Value> {
    let wx = g.matmul_nt(x, &p.w[k])?;
    let uh = g.matmul_nt(h, &p.u[k])?;
    let s = g.add(&wx, &uh)?;
    g.add_bias(&s, &p.b[k])
}

/// One step:
/// `f = σ(W_f x + U_f h + b_f)`, `i = σ(…)`, `o = σ(…)`,
/// `c' = f∘c + i∘tanh(W_c x + U_c h + b_c)`, `h' = o∘tanh(c')`.
pub fn lstm_cell<G: Graph>(
    g: &mut G,
    p: &LstmWeights<G::Value>,
    x: &G::Value,
    state: &LstmState<G::Value>,
) -> Result<LstmState<G::Value>> {
    let f_pre = gate(g, p, 0, x, &state.h)?;
    let i_pre = gate(g, p, 1, x, &state.h)?;
    let o_pre = gate(g, p, 2, x, &state.h)?;
    let c_pre = gate(g, p, 3, x, &state.h)?;
    let f = g.sigmoid(&f_pre);
    let i = g.sigmoid(&i_pre);
    let o = g.sigmoid(&o_pre);
    let cand = g.tanh(&c_pre);
    let keep = g.mul(&f, &state.c)?;
    let write = g.mul(&i, &cand)?;
    let c = g.add(&keep, &write)?;
    let tc = g.tanh(&c);
    let h = g.mul(&o, &tc)?;
    Ok(LstmState { h, c })
}

fn check_lengths(lengths: &[usize], steps: usize) -> Result<()> {
    if let Some(i) = lengths.iter().position(|&l| l == 0) {
        return Err(Error::Input(format!("example {i} in batch has zero length")));
    }
    if let Some(&l) = lengths.iter().find(|&&l| l > steps) {
        return Err(Error::Input(format!("length {l} exceeds padded width {steps}")));
    }
    Ok(())
}

fn run_direction<G: Graph>(
    g: &mut G,
    p: &LstmWeights<G::Value>,
    hidden: usize,
    steps: &[G::Value],
    lengths: &[usize],
    order: impl Iterator<Item = usize>,
) -> Result<G::Value> {
    let mut state = LstmState::zeros(g, lengths.len(), hidden);
    for t in order {
        let next = lstm_cell(g, p, &steps[t], &state)?;
        let mask: Vec<bool> = lengths.iter().map(|&l| t < l).collect();
        state = if mask.iter().all(|&m| m) {
            next
        } else {
            LstmState {
                h: g.select_rows(&mask, &next.h, &state.h)?,
                c: g.select_rows(&mask, &next.c, &state.c)?,
            }
        };
    }
    Ok(state.h)
}

/// Bidirectional encoding of pre-embedded time steps (`steps[t]` is
/// `[batch×input]`). Returns `[h_fwd(last true token) ; h_bwd(token 0)]`.
///
/// Steps at or beyond an example's length carry its state through
/// unchanged, so padding never reaches the output.
pub fn bilstm_encode_steps<G: Graph>(
    g: &mut G,
    fwd: &LstmParams,
    bwd: &LstmParams,
    steps: &[G::Value],
    lengths: &[usize],
) -> Result<G::Value> {
    check_lengths(lengths, steps.len())?;
    let fw = fwd.bind(g);
    let bw = bwd.bind(g);
    let hf = run_direction(g, &fw, fwd.hidden(), steps, lengths, 0..steps.len())?;
    let hb = run_direction(g, &bw, bwd.hidden(), steps, lengths, (0..steps.len()).rev())?;
    g.concat(&[hf, hb], 1)
}

/// Embeds `batch` with `table` and encodes it bidirectionally:
/// `[batch × (fwd.hidden + bwd.hidden)]`.
pub fn bilstm_encode<G: Graph>(
    g: &mut G,
    table: &EmbeddingTable,
    fwd: &LstmParams,
    bwd: &LstmParams,
    batch: &Batch,
) -> Result<G::Value> {
    check_lengths(&batch.lengths, batch.max_len)?;
    let mut steps = Vec::with_capacity(batch.max_len);
    for t in 0..batch.max_len {
        steps.push(table.lookup(g, &batch.column(t))?);
    }
    bilstm_encode_steps(g, fwd, bwd, &steps, &batch.lengths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::tensor::Eval;

    fn zero_params(input: usize, hidden: usize) -> LstmParams {
        LstmParams::from_parts(
            std::array::from_fn(|_| Tensor::zeros(&[hidden, input])),
            std::array::from_fn(|_| Tensor::zeros(&[hidden, hidden])),
            std::array::from_fn(|_| Tensor::zeros(&[hidden])),
        )
        .unwrap()
    }

    #[test]
    fn all_zero_params_give_zero_state() {
        let p = zero_params(3, 2);
        let mut g = Eval;
        let w = p.bind(&mut g);
        let x = g.constant(Tensor::from_rows(&[vec![1.0, -4.0, 2.0]]).unwrap());
        let s0 = LstmState::zeros(&mut g, 1, 2);
        let s1 = lstm_cell(&mut g, &w, &x, &s0).unwrap();
        assert!(s1.c.data().iter().all(|&v| v == 0.0));
        assert!(s1.h.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_forget_gate_keeps_cell() {
        let mut p = zero_params(2, 3);
        p.b[0] = Arc::new(Tensor::full(&[3], 20.0));
        let mut g = Eval;
        let w = p.bind(&mut g);
        let x = g.constant(Tensor::from_rows(&[vec![0.3, 0.7]]).unwrap());
        let v = Tensor::from_rows(&[vec![0.5, -1.5, 2.0]]).unwrap();
        let s0 = LstmState {
            h: g.constant(Tensor::zeros(&[1, 3])),
            c: g.constant(v.clone()),
        };
        let s1 = lstm_cell(&mut g, &w, &x, &s0).unwrap();
        assert!(s1.c.max_abs_diff(&v) < 1e-8);
    }

    #[test]
    fn zero_length_is_input_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let table = EmbeddingTable::random(8, 3, 0, &mut rng).unwrap();
        let p = LstmParams::new(3, 2, 1.0, &mut rng);
        let batch = Batch::from_rows(&[vec![]], &[0], 5);
        assert!(matches!(
            bilstm_encode(&mut Eval, &table, &p, &p, &batch),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn forget_bias_initialization() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = LstmParams::new(4, 3, 1.0, &mut rng);
        assert!(p.b[0].data().iter().all(|&v| v == 1.0));
        assert!(p.b[1..].iter().all(|b| b.data().iter().all(|&v| v == 0.0)));
        let bound = 1.0 / 2.0;
        assert!(p.w.iter().all(|w| w.data().iter().all(|v| v.abs() <= bound)));
    }
}
