use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Graph, Tensor};

use super::fan_in_uniform;

/// `count` filters spanning `width` tokens and the full embedding width.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvFilterBank {
    pub kernels: Arc<Tensor>,
    pub bias: Arc<Tensor>,
}

pub struct ConvWeights<V> {
    pub kernels: V,
    pub bias: V,
    pub width: usize,
}

impl ConvFilterBank {
    pub fn new<R: Rng + ?Sized>(width: usize, count: usize, dim: usize, rng: &mut R) -> Result<Self> {
        if width == 0 || count == 0 {
            return Err(Error::Config("filter width and count must be positive".into()));
        }
        let fan_in = width * dim;
        Ok(ConvFilterBank {
            kernels: Arc::new(fan_in_uniform(&[count, width, dim], fan_in, rng)),
            bias: Arc::new(fan_in_uniform(&[count], fan_in, rng)),
        })
    }

    pub fn from_parts(kernels: Tensor, bias: Tensor) -> Result<Self> {
        let (c, _, _) = kernels.dims3("conv_bank")?;
        if bias.shape() != [c] {
            return Err(Error::dim("conv_bank", kernels.shape(), bias.shape()));
        }
        Ok(ConvFilterBank {
            kernels: Arc::new(kernels),
            bias: Arc::new(bias),
        })
    }

    pub fn width(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn count(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.kernels.shape()[2]
    }

    pub fn bind<G: Graph>(&self, g: &mut G) -> ConvWeights<G::Value> {
        ConvWeights {
            kernels: g.param(&self.kernels),
            bias: g.param(&self.bias),
            width: self.width(),
        }
    }
}

/// Correlation + bias + ReLU, then max over the time positions whose
/// window fits inside each example's length. `embedded` is
/// `[batch×len×dim]`; the result is `[batch×count]`.
pub fn conv_text<G: Graph>(
    g: &mut G,
    bank: &ConvWeights<G::Value>,
    embedded: &G::Value,
    lengths: &[usize],
) -> Result<G::Value> {
    let len = g.tensor(embedded).shape()[1];
    let mut valid = Vec::with_capacity(lengths.len());
    for &l in lengths {
        if l < bank.width || l > len {
            return Err(Error::Internal(format!(
                "conv_text: length {l} incompatible with width {} and padded length {len}",
                bank.width
            )));
        }
        valid.push(l - bank.width + 1);
    }
    let pre = g.conv_text(embedded, &bank.kernels, &bank.bias)?;
    let act = g.relu(&pre);
    g.max_over_time(&act, &valid)
}
