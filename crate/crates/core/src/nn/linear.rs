use std::sync::Arc;

use rand::Rng;

use crate::error::Result;
use crate::tensor::{Graph, Tensor};

use super::fan_in_uniform;

/// Affine head `y = x·Wᵀ + b` with `W[out×in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Arc<Tensor>,
    pub bias: Arc<Tensor>,
}

pub struct LinearWeights<V> {
    pub weight: V,
    pub bias: V,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        Linear {
            weight: Arc::new(fan_in_uniform(&[output, input], input, rng)),
            bias: Arc::new(fan_in_uniform(&[output], input, rng)),
        }
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Self {
        Linear {
            weight: Arc::new(weight),
            bias: Arc::new(bias),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn bind<G: Graph>(&self, g: &mut G) -> LinearWeights<G::Value> {
        LinearWeights {
            weight: g.param(&self.weight),
            bias: g.param(&self.bias),
        }
    }

    pub fn forward<G: Graph>(&self, g: &mut G, x: &G::Value) -> Result<G::Value> {
        let w = self.bind(g);
        linear(g, &w, x)
    }
}

pub fn linear<G: Graph>(g: &mut G, w: &LinearWeights<G::Value>, x: &G::Value) -> Result<G::Value> {
    let xw = g.matmul_nt(x, &w.weight)?;
    g.add_bias(&xw, &w.bias)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Eval;

    fn x() -> Tensor {
        Tensor::from_rows(&[vec![1.0, -2.0, 0.5], vec![0.0, 3.0, 4.0]]).unwrap()
    }

    #[test]
    fn identity_weight_zero_bias_is_identity() {
        let mut w = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            w.data_mut()[i * 3 + i] = 1.0;
        }
        let l = Linear::from_parts(w, Tensor::zeros(&[3]));
        let mut g = Eval;
        let xv = g.constant(x());
        assert_eq!(*l.forward(&mut g, &xv).unwrap(), x());
    }

    #[test]
    fn zero_weight_gives_bias_rows() {
        let l = Linear::from_parts(Tensor::zeros(&[2, 3]), Tensor::vector(vec![0.25, -1.0]));
        let mut g = Eval;
        let xv = g.constant(x());
        let y = l.forward(&mut g, &xv).unwrap();
        assert_eq!(y.data(), &[0.25, -1.0, 0.25, -1.0]);
    }

    #[test]
    fn shape_mismatch_is_dimension_error() {
        let l = Linear::from_parts(Tensor::zeros(&[2, 4]), Tensor::zeros(&[2]));
        let mut g = Eval;
        let xv = g.constant(x());
        assert!(matches!(l.forward(&mut g, &xv), Err(crate::Error::Dimension { .. })));
    }
}
