use std::sync::Arc;

use crate::error::Result;

use super::{kernels, Tensor};

/// Operations a model forward pass may use.
///
/// Implemented by [`super::Tape`] (records for backward) and [`Eval`]
/// (computes and forgets). Both call the same kernels, so a forward pass
/// produces bit-identical values on either backend.
pub trait Graph {
    type Value: Clone;

    /// A trainable parameter. The tape tracks it by `Arc` identity.
    fn param(&mut self, p: &Arc<Tensor>) -> Self::Value;
    fn constant(&mut self, t: Tensor) -> Self::Value;
    fn tensor<'a>(&'a self, v: &'a Self::Value) -> &'a Tensor;

    fn matmul(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    /// `a · bᵀ`; the natural form for `[batch×in] · W[out×in]ᵀ`.
    fn matmul_nt(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn add(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn sub(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn mul(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn scale(&mut self, a: &Self::Value, s: f64) -> Self::Value;
    fn sigmoid(&mut self, a: &Self::Value) -> Self::Value;
    fn tanh(&mut self, a: &Self::Value) -> Self::Value;
    fn relu(&mut self, a: &Self::Value) -> Self::Value;
    fn add_bias(&mut self, x: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn softmax(&mut self, x: &Self::Value) -> Result<Self::Value>;
    fn log_softmax(&mut self, x: &Self::Value) -> Result<Self::Value>;
    fn concat(&mut self, parts: &[Self::Value], axis: usize) -> Result<Self::Value>;
    fn max_over_axis(&mut self, x: &Self::Value, axis: usize) -> Result<Self::Value>;
    fn max_over_time(&mut self, x: &Self::Value, valid: &[usize]) -> Result<Self::Value>;
    fn select_rows(&mut self, mask: &[bool], a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn gather_rows(&mut self, table: &Self::Value, ids: &[usize]) -> Result<Self::Value>;
    fn reshape(&mut self, x: &Self::Value, shape: &[usize]) -> Result<Self::Value>;
    fn conv_text(&mut self, x: &Self::Value, kernels: &Self::Value, bias: &Self::Value) -> Result<Self::Value>;
    /// Mean soft-target cross-entropy against constant `targets`.
    fn soft_cross_entropy(&mut self, logits: &Self::Value, targets: &Tensor) -> Result<Self::Value>;
    fn sum(&mut self, x: &Self::Value) -> Self::Value;
}

/// Forward-only backend; intermediate values are dropped as soon as the
/// caller lets go of them.
#[derive(Debug, Default, Clone, Copy)]
pub struct Eval;

impl Eval {
    pub fn new() -> Self {
        Eval
    }
}

impl Graph for Eval {
    type Value = Arc<Tensor>;

    fn param(&mut self, p: &Arc<Tensor>) -> Arc<Tensor> {
        Arc::clone(p)
    }

    fn constant(&mut self, t: Tensor) -> Arc<Tensor> {
        Arc::new(t)
    }

    fn tensor<'a>(&'a self, v: &'a Arc<Tensor>) -> &'a Tensor {
        v
    }

    fn matmul(&mut self, a: &Arc<Tensor>, b: &Arc<Tensor>) -> Result<Arc<Tensor>> {
        kernels::matmul(a, b).map(Arc::new)
    }

    fn matmul_nt(&mut self, a: &Arc<Tensor>, b: &Arc<Tensor>) -> Result<Arc<Tensor>> {
        kernels::matmul_nt(a, b).map(Arc::new)
    }

    fn add(&mut self, a: &Arc<Tensor>, b: &Arc<Tensor>) -> Result<Arc<Tensor>> {
        kernels::zip("add", a, b, |x, y| x + y).map(Arc::new)
    }

    fn sub(&mut self, a: &Arc<Tensor>, b: &Arc<Tensor>) -> Result<Arc<Tensor>> {
        kernels::zip("sub", a, b, |x, y| x - y).map(Arc::new)
    }

    fn mul(&mut self, a: &Arc<Tensor>, b: &Arc<Tensor>) -> Result<Arc<Tensor>> {
        kernels::zip("mul", a, b, |x, y| x * y).map(Arc::new)
    }

    fn scale(&mut self, a: &Arc<Tensor>, s: f64) -> Arc<Tensor> {
        Arc::new(kernels::map(a, |x| x * s))
    }

    fn sigmoid(&mut self, a: &Arc<Tensor>) -> Arc<Tensor> {
        Arc::new(kernels::map(a, kernels::sigmoid))
    }

    fn tanh(&mut self, a: &Arc<Tensor>) -> Arc<Tensor> {
        Arc::new(kernels::map(a, f64::tanh))
    }

    fn relu(&mut self, a: &Arc<Tensor>) -> Arc<Tensor> {
        Arc::new(kernels::map(a, kernels::relu))
    }

    fn add_bias(&mut self, x: &Arc<Tensor>, b: &Arc<Tensor>) -> Result<Arc<Tensor>> {
        kernels::add_bias(x, b).map(Arc::new)
    }

    fn softmax(&mut self, x: &Arc<Tensor>) -> Result<Arc<Tensor>> {
        kernels::softmax(x).map(Arc::new)
    }

    fn log_softmax(&mut self, x: &Arc<Tensor>) -> Result<Arc<Tensor>> {
        kernels::log_softmax(x).map(Arc::new)
    }

    fn concat(&mut self, parts: &[Arc<Tensor>], axis: usize) -> Result<Arc<Tensor>> {
        let refs: Vec<&Tensor> = parts.iter().map(|p| p.as_ref()).collect();
        kernels::concat(&refs, axis).map(Arc::new)
    }

    fn max_over_axis(&mut self, x: &Arc<Tensor>, axis: usize) -> Result<Arc<Tensor>> {
        kernels::max_over_axis(x, axis).map(|(t, _)| Arc::new(t))
    }

    fn max_over_time(&mut self, x: &Arc<Tensor>, valid: &[usize]) -> Result<Arc<Tensor>> {
        kernels::max_over_time(x, valid).map(|(t, _)| Arc::new(t))
    }

    fn select_rows(&mut self, mask: &[bool], a: &Arc<Tensor>, b: &Arc<Tensor>) -> Result<Arc<Tensor>> {
        kernels::select_rows(mask, a, b).map(Arc::new)
    }

    fn gather_rows(&mut self, table: &Arc<Tensor>, ids: &[usize]) -> Result<Arc<Tensor>> {
        kernels::gather_rows(table, ids).map(Arc::new)
    }

    fn reshape(&mut self, x: &Arc<Tensor>, shape: &[usize]) -> Result<Arc<Tensor>> {
        Tensor::clone(x).reshape(shape).map(Arc::new)
    }

    fn conv_text(&mut self, x: &Arc<Tensor>, k: &Arc<Tensor>, b: &Arc<Tensor>) -> Result<Arc<Tensor>> {
        kernels::conv_text(x, k, b).map(Arc::new)
    }

    fn soft_cross_entropy(&mut self, logits: &Arc<Tensor>, targets: &Tensor) -> Result<Arc<Tensor>> {
        kernels::soft_cross_entropy(logits, targets).map(|(v, _)| Arc::new(Tensor::scalar(v)))
    }

    fn sum(&mut self, x: &Arc<Tensor>) -> Arc<Tensor> {
        Arc::new(Tensor::scalar(x.sum()))
    }
}
