use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Graph, Tensor};

use super::Mode;

/// Inverted dropout: in training, zero each element with probability
/// `rate` and scale survivors by `1/(1−rate)`; in eval, identity.
pub fn dropout<G: Graph>(g: &mut G, x: &G::Value, rate: f64, mode: &mut Mode<'_>) -> Result<G::Value> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
    }
    let rng = match mode {
        Mode::Train(rng) if rate > 0.0 => rng,
        _ => return Ok(x.clone()),
    };
    let keep = 1.0 / (1.0 - rate);
    let shape = g.tensor(x).shape().to_vec();
    let n: usize = shape.iter().product();
    let mask: Vec<f64> = (0..n)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect();
    let m = g.constant(Tensor::new(shape, mask)?);
    g.mul(x, &m)
}
