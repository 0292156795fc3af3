use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Tensor;
use crate::error::{Error, Result};

/// `(fan_in, fan_out)` for a weight shape. Convolution kernels `K × C_in × C_out`
/// count the kernel width on both sides.
pub fn fans(shape: &[usize]) -> Result<(usize, usize)> {
    let (fan_in, fan_out) = match *shape {
        [n] => (n, n),
        [rows, cols] => (rows, cols),
        [k, c_in, c_out] => (k * c_in, k * c_out),
        _ => return Err(Error::config(format!("no fan rule for shape {shape:?}"))),
    };
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::config(format!("shape {shape:?} has zero fan")));
    }
    Ok((fan_in, fan_out))
}

/// Glorot/Xavier uniform initialization on `[−a, a]`, `a = sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_uniform(shape: &[usize], seed: u64) -> Result<Tensor> {
    let (fan_in, fan_out) = fans(shape)?;
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
    Tensor::new(shape.to_vec(), data)
}
