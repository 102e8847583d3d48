use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::{kernels, Graph, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    AddBias(Var, Var),
    Softmax(Var),
    LogSoftmax(Var),
    Concat { parts: Vec<Var>, axis: usize },
    /// Max reduction; `arg` holds flat input indices of the winners.
    Max { input: Var, arg: Vec<usize> },
    SelectRows { mask: Vec<bool>, a: Var, b: Var },
    Gather { table: Var, ids: Vec<usize> },
    Reshape(Var),
    Conv { x: Var, kernels: Var, bias: Var },
    SoftCe { logits: Var, targets: Tensor, probs: Tensor },
    Sum(Var),
}

#[derive(Debug)]
struct Node {
    value: Arc<Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Single-threaded record of one forward computation.
///
/// Nodes are appended in execution order, which is a valid topological
/// order, so backward simply walks the list from the output down.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: HashMap<usize, Tensor>,
    /// Parameter identity (the `Arc` allocation address) to its leaf. Each
    /// keyed `Arc` is also held by its node, so addresses stay unique.
    params: HashMap<usize, Var>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input. Leaves with `requires_grad` receive gradients.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push_node(Arc::new(value), Op::Leaf, requires_grad)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(&v.0)
    }

    /// Gradient of a parameter previously registered with [`Graph::param`].
    pub fn param_grad(&self, p: &Arc<Tensor>) -> Option<&Tensor> {
        self.params.get(&(Arc::as_ptr(p) as usize)).and_then(|v| self.grad(*v))
    }

    pub fn zero_grads(&mut self) {
        self.grads.clear();
    }

    fn push_node(&mut self, value: Arc<Tensor>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let rg = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push_node(Arc::new(value), op, rg)
    }

    fn t(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Back-propagates from the scalar `out`, adding into leaf gradients.
    pub fn backward(&mut self, out: Var) -> Result<()> {
        let out_len = self.nodes[out.0].value.len();
        if out_len != 1 {
            return Err(Error::Usage(format!(
                "backward() needs a scalar output, got shape {:?}",
                self.nodes[out.0].value.shape()
            )));
        }
        let mut adj: Vec<Option<Tensor>> = Vec::new();
        adj.resize_with(out.0 + 1, || None);
        adj[out.0] = Some(Tensor::full(self.nodes[out.0].value.shape(), 1.0));

        for i in (0..=out.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let mut contribs: Vec<(Var, Tensor)> = Vec::with_capacity(3);
            let val = &node.value;
            match &node.op {
                Op::Leaf => {
                    match self.grads.get_mut(&i) {
                        Some(acc) => acc.add_assign(&g),
                        None => {
                            self.grads.insert(i, g);
                        }
                    }
                    continue;
                }
                Op::MatMul(a, b) => {
                    contribs.push((*a, kernels::matmul_nt(&g, self.t(*b))?));
                    contribs.push((*b, kernels::matmul_tn(self.t(*a), &g)?));
                }
                Op::MatMulNt(a, b) => {
                    contribs.push((*a, kernels::matmul(&g, self.t(*b))?));
                    contribs.push((*b, kernels::matmul_tn(&g, self.t(*a))?));
                }
                Op::Add(a, b) => {
                    contribs.push((*a, g.clone()));
                    contribs.push((*b, g));
                }
                Op::Sub(a, b) => {
                    contribs.push((*b, kernels::map(&g, |x| -x)));
                    contribs.push((*a, g));
                }
                Op::Mul(a, b) => {
                    contribs.push((*a, kernels::zip("mul", &g, self.t(*b), |x, y| x * y)?));
                    contribs.push((*b, kernels::zip("mul", &g, self.t(*a), |x, y| x * y)?));
                }
                Op::Scale(a, s) => {
                    let s = *s;
                    contribs.push((*a, kernels::map(&g, |x| x * s)));
                }
                Op::Sigmoid(a) => {
                    contribs.push((*a, kernels::zip("sigmoid", &g, val, |g, y| g * y * (1.0 - y))?));
                }
                Op::Tanh(a) => {
                    contribs.push((*a, kernels::zip("tanh", &g, val, |g, y| g * (1.0 - y * y))?));
                }
                Op::Relu(a) => {
                    let x = self.t(*a);
                    let d = kernels::zip("relu", &g, x, |g, x| if x > 0.0 { g } else { 0.0 })?;
                    contribs.push((*a, d));
                }
                Op::AddBias(x, b) => {
                    contribs.push((*b, kernels::sum_rows(&g)));
                    contribs.push((*x, g));
                }
                Op::Softmax(a) => {
                    let k = *val.shape().last().expect("shape");
                    let mut d = g.clone();
                    for (drow, yrow) in d.data_mut().chunks_mut(k).zip(val.data().chunks(k)) {
                        let s: f64 = drow.iter().zip(yrow).map(|(g, y)| g * y).sum();
                        for (dv, &y) in drow.iter_mut().zip(yrow) {
                            *dv = y * (*dv - s);
                        }
                    }
                    contribs.push((*a, d));
                }
                Op::LogSoftmax(a) => {
                    let k = *val.shape().last().expect("shape");
                    let mut d = g.clone();
                    for (drow, lrow) in d.data_mut().chunks_mut(k).zip(val.data().chunks(k)) {
                        let s: f64 = drow.iter().sum();
                        for (dv, &l) in drow.iter_mut().zip(lrow) {
                            *dv -= l.exp() * s;
                        }
                    }
                    contribs.push((*a, d));
                }
                Op::Concat { parts, axis } => {
                    let sizes: Vec<usize> = parts.iter().map(|p| self.t(*p).shape()[*axis]).collect();
                    for (p, piece) in parts.iter().zip(kernels::split(&g, &sizes, *axis)) {
                        contribs.push((*p, piece));
                    }
                }
                Op::Max { input, arg } => {
                    let shape = self.t(*input).shape().to_vec();
                    contribs.push((*input, kernels::scatter_argmax(&g, arg, &shape)));
                }
                Op::SelectRows { mask, a, b } => {
                    let (ga, gb) = kernels::select_rows_backward(mask, &g);
                    contribs.push((*a, ga));
                    contribs.push((*b, gb));
                }
                Op::Gather { table, ids } => {
                    let shape = self.t(*table).shape().to_vec();
                    contribs.push((*table, kernels::scatter_rows(&g, ids, &shape)));
                }
                Op::Reshape(a) => {
                    let shape = self.t(*a).shape().to_vec();
                    contribs.push((*a, g.reshape(&shape)?));
                }
                Op::Conv { x, kernels: k, bias } => {
                    let (dx, dk, db) = kernels::conv_text_backward(&g, self.t(*x), self.t(*k))?;
                    contribs.push((*x, dx));
                    contribs.push((*k, dk));
                    contribs.push((*bias, db));
                }
                Op::SoftCe { logits, targets, probs } => {
                    let gv = g.data()[0];
                    contribs.push((*logits, kernels::soft_cross_entropy_backward(gv, probs, targets)));
                }
                Op::Sum(a) => {
                    let gv = g.data()[0];
                    contribs.push((*a, Tensor::full(self.t(*a).shape(), gv)));
                }
            }
            for (v, d) in contribs {
                if !self.nodes[v.0].requires_grad {
                    continue;
                }
                match &mut adj[v.0] {
                    Some(acc) => acc.add_assign(&d),
                    slot @ None => *slot = Some(d),
                }
            }
        }
        Ok(())
    }
}

impl Graph for Tape {
    type Value = Var;

    fn param(&mut self, p: &Arc<Tensor>) -> Var {
        let key = Arc::as_ptr(p) as usize;
        if let Some(v) = self.params.get(&key) {
            return *v;
        }
        let v = self.push_node(Arc::clone(p), Op::Leaf, true);
        self.params.insert(key, v);
        v
    }

    fn constant(&mut self, t: Tensor) -> Var {
        self.leaf(t, false)
    }

    fn tensor<'a>(&'a self, v: &'a Var) -> &'a Tensor {
        self.t(*v)
    }

    fn matmul(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let r = kernels::matmul(self.t(*a), self.t(*b))?;
        Ok(self.push(r, Op::MatMul(*a, *b), &[*a, *b]))
    }

    fn matmul_nt(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let r = kernels::matmul_nt(self.t(*a), self.t(*b))?;
        Ok(self.push(r, Op::MatMulNt(*a, *b), &[*a, *b]))
    }

    fn add(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let r = kernels::zip("add", self.t(*a), self.t(*b), |x, y| x + y)?;
        Ok(self.push(r, Op::Add(*a, *b), &[*a, *b]))
    }

    fn sub(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let r = kernels::zip("sub", self.t(*a), self.t(*b), |x, y| x - y)?;
        Ok(self.push(r, Op::Sub(*a, *b), &[*a, *b]))
    }

    fn mul(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let r = kernels::zip("mul", self.t(*a), self.t(*b), |x, y| x * y)?;
        Ok(self.push(r, Op::Mul(*a, *b), &[*a, *b]))
    }

    fn scale(&mut self, a: &Var, s: f64) -> Var {
        let r = kernels::map(self.t(*a), |x| x * s);
        self.push(r, Op::Scale(*a, s), &[*a])
    }

    fn sigmoid(&mut self, a: &Var) -> Var {
        let r = kernels::map(self.t(*a), kernels::sigmoid);
        self.push(r, Op::Sigmoid(*a), &[*a])
    }

    fn tanh(&mut self, a: &Var) -> Var {
        let r = kernels::map(self.t(*a), f64::tanh);
        self.push(r, Op::Tanh(*a), &[*a])
    }

    fn relu(&mut self, a: &Var) -> Var {
        let r = kernels::map(self.t(*a), kernels::relu);
        self.push(r, Op::Relu(*a), &[*a])
    }

    fn add_bias(&mut self, x: &Var, b: &Var) -> Result<Var> {
        let r = kernels::add_bias(self.t(*x), self.t(*b))?;
        Ok(self.push(r, Op::AddBias(*x, *b), &[*x, *b]))
    }

    fn softmax(&mut self, x: &Var) -> Result<Var> {
        let r = kernels::softmax(self.t(*x))?;
        Ok(self.push(r, Op::Softmax(*x), &[*x]))
    }

    fn log_softmax(&mut self, x: &Var) -> Result<Var> {
        let r = kernels::log_softmax(self.t(*x))?;
        Ok(self.push(r, Op::LogSoftmax(*x), &[*x]))
    }

    fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let refs: Vec<&Tensor> = parts.iter().map(|p| self.t(*p)).collect();
        let r = kernels::concat(&refs, axis)?;
        Ok(self.push(
            r,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            parts,
        ))
    }

    fn max_over_axis(&mut self, x: &Var, axis: usize) -> Result<Var> {
        let (r, arg) = kernels::max_over_axis(self.t(*x), axis)?;
        Ok(self.push(r, Op::Max { input: *x, arg }, &[*x]))
    }

    fn max_over_time(&mut self, x: &Var, valid: &[usize]) -> Result<Var> {
        let (r, arg) = kernels::max_over_time(self.t(*x), valid)?;
        Ok(self.push(r, Op::Max { input: *x, arg }, &[*x]))
    }

    fn select_rows(&mut self, mask: &[bool], a: &Var, b: &Var) -> Result<Var> {
        let r = kernels::select_rows(mask, self.t(*a), self.t(*b))?;
        Ok(self.push(
            r,
            Op::SelectRows {
                mask: mask.to_vec(),
                a: *a,
                b: *b,
            },
            &[*a, *b],
        ))
    }

    fn gather_rows(&mut self, table: &Var, ids: &[usize]) -> Result<Var> {
        let r = kernels::gather_rows(self.t(*table), ids)?;
        Ok(self.push(
            r,
            Op::Gather {
                table: *table,
                ids: ids.to_vec(),
            },
            &[*table],
        ))
    }

    fn reshape(&mut self, x: &Var, shape: &[usize]) -> Result<Var> {
        let r = self.t(*x).clone().reshape(shape)?;
        Ok(self.push(r, Op::Reshape(*x), &[*x]))
    }

    fn conv_text(&mut self, x: &Var, k: &Var, b: &Var) -> Result<Var> {
        let r = kernels::conv_text(self.t(*x), self.t(*k), self.t(*b))?;
        Ok(self.push(
            r,
            Op::Conv {
                x: *x,
                kernels: *k,
                bias: *b,
            },
            &[*x, *k, *b],
        ))
    }

    fn soft_cross_entropy(&mut self, logits: &Var, targets: &Tensor) -> Result<Var> {
        let (v, probs) = kernels::soft_cross_entropy(self.t(*logits), targets)?;
        Ok(self.push(
            Tensor::scalar(v),
            Op::SoftCe {
                logits: *logits,
                targets: targets.clone(),
                probs,
            },
            &[*logits],
        ))
    }

    fn sum(&mut self, x: &Var) -> Var {
        let r = Tensor::scalar(self.t(*x).sum());
        self.push(r, Op::Sum(*x), &[*x])
    }
}
