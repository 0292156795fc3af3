//! Temporal max pooling with same padding (`−∞` fill).

use super::conv::resolve;
use super::{Padding, Tensor};
use crate::error::{Error, Result};

pub fn maxpool1d(input: &Tensor, window: usize, stride: usize) -> Result<Tensor> {
    Ok(maxpool1d_with_indices(input, window, stride)?.0)
}

/// Pools and also returns, per output element, the input row that won.
/// Ties go to the earliest row.
pub fn maxpool1d_with_indices(input: &Tensor, window: usize, stride: usize) -> Result<(Tensor, Vec<usize>)> {
    let (t_in, channels) = input.expect_matrix("maxpool1d input")?;
    if window < 1 {
        return Err(Error::config("pooling window must be at least 1"));
    }
    let (t_out, pad_left) = resolve(t_in, window, stride, Padding::Same)?;
    let mut out = vec![f64::NEG_INFINITY; t_out * channels];
    let mut arg = vec![0usize; t_out * channels];
    for t in 0..t_out {
        let lo = (t * stride) as isize - pad_left as isize;
        let first = lo.max(0) as usize;
        let last = ((lo + window as isize) as usize).min(t_in);
        let dst = &mut out[t * channels..(t + 1) * channels];
        let dst_arg = &mut arg[t * channels..(t + 1) * channels];
        for src in first..last {
            for (c, v) in input.row(src).iter().enumerate() {
                if *v > dst[c] {
                    dst[c] = *v;
                    dst_arg[c] = src;
                }
            }
        }
        if first >= last {
            return Err(Error::config(format!("pooling window {t} covers only padding")));
        }
    }
    Ok((Tensor::matrix(t_out, channels, out)?, arg))
}

/// Routes each output gradient to the input row recorded in `indices`.
pub fn maxpool1d_backward(input_len: usize, grad_output: &Tensor, indices: &[usize]) -> Result<Tensor> {
    let (t_out, channels) = grad_output.expect_matrix("maxpool1d output gradient")?;
    if indices.len() != t_out * channels {
        return Err(Error::config("maxpool1d index buffer does not match output gradient"));
    }
    let mut grad = vec![0.0; input_len * channels];
    for (i, (g, &src)) in grad_output.data().iter().zip(indices).enumerate() {
        let c = i % channels;
        grad[src * channels + c] += g;
    }
    Tensor::matrix(input_len, channels, grad)
}
