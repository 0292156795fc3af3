//! Temporal (1-D) convolution as im2col followed by a matrix product.
//!
//! Cross-correlation convention: `out[t, o] = bias[o] + Σ_{j,c} kernel[j, c, o] · x[t·stride + j − pad_left, c]`.

use super::gemm::{gemm, Layout};
use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Output length `ceil(T / stride)`, zero padding split evenly with the odd
    /// element on the right.
    Same,
    /// No padding; output length `(T − K) / stride + 1`.
    Valid,
}

#[derive(Debug, Clone, Copy)]
struct ConvGeometry {
    in_len: usize,
    out_len: usize,
    pad_left: usize,
    kernel: usize,
    stride: usize,
    c_in: usize,
    c_out: usize,
}

/// Output length of a 1-D convolution or pooling window sweep.
pub fn conv1d_output_len(in_len: usize, kernel: usize, stride: usize, padding: Padding) -> Result<usize> {
    Ok(resolve(in_len, kernel, stride, padding)?.0)
}

/// Returns `(out_len, pad_left)`.
pub(super) fn resolve(in_len: usize, kernel: usize, stride: usize, padding: Padding) -> Result<(usize, usize)> {
    if stride < 1 {
        return Err(Error::config("stride must be at least 1"));
    }
    if kernel < 1 {
        return Err(Error::config("kernel size must be at least 1"));
    }
    if in_len == 0 {
        return Err(Error::config("input sequence is empty"));
    }
    match padding {
        Padding::Same => {
            let out_len = in_len.div_ceil(stride);
            let total = ((out_len - 1) * stride + kernel).saturating_sub(in_len);
            Ok((out_len, total / 2))
        }
        Padding::Valid => {
            if in_len < kernel {
                return Err(Error::config(format!(
                    "valid convolution needs at least {kernel} steps, got {in_len}"
                )));
            }
            Ok(((in_len - kernel) / stride + 1, 0))
        }
    }
}

fn geometry(input: &Tensor, kernel: &Tensor, stride: usize, padding: Padding) -> Result<ConvGeometry> {
    let (in_len, c_in) = input.expect_matrix("conv1d input")?;
    let (k, kc_in, c_out) = match kernel.shape() {
        &[k, ci, co] => (k, ci, co),
        other => return Err(Error::config(format!("conv1d kernel must be K×C_in×C_out, got {other:?}"))),
    };
    if kc_in != c_in {
        return Err(Error::config(format!(
            "conv1d kernel expects {kc_in} input channels, input has {c_in}"
        )));
    }
    let (out_len, pad_left) = resolve(in_len, k, stride, padding)?;
    Ok(ConvGeometry {
        in_len,
        out_len,
        pad_left,
        kernel: k,
        stride,
        c_in,
        c_out,
    })
}

fn im2col(input: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let width = g.kernel * g.c_in;
    let mut cols = vec![0.0; g.out_len * width];
    for t in 0..g.out_len {
        let row = &mut cols[t * width..(t + 1) * width];
        for j in 0..g.kernel {
            let src = (t * g.stride + j) as isize - g.pad_left as isize;
            if src < 0 || src as usize >= g.in_len {
                continue;
            }
            let src = src as usize;
            row[j * g.c_in..(j + 1) * g.c_in].copy_from_slice(&input[src * g.c_in..(src + 1) * g.c_in]);
        }
    }
    cols
}

fn col2im_add(dcols: &[f64], g: &ConvGeometry, dinput: &mut [f64]) {
    let width = g.kernel * g.c_in;
    for t in 0..g.out_len {
        let row = &dcols[t * width..(t + 1) * width];
        for j in 0..g.kernel {
            let dst = (t * g.stride + j) as isize - g.pad_left as isize;
            if dst < 0 || dst as usize >= g.in_len {
                continue;
            }
            let dst = dst as usize;
            let target = &mut dinput[dst * g.c_in..(dst + 1) * g.c_in];
            for (d, s) in target.iter_mut().zip(&row[j * g.c_in..(j + 1) * g.c_in]) {
                *d += s;
            }
        }
    }
}

pub fn conv1d(input: &Tensor, kernel: &Tensor, bias: &Tensor, stride: usize, padding: Padding) -> Result<Tensor> {
    let g = geometry(input, kernel, stride, padding)?;
    if bias.len() != g.c_out {
        return Err(Error::config(format!(
            "conv1d bias has {} entries, kernel has {} filters",
            bias.len(),
            g.c_out
        )));
    }
    let cols = im2col(input.data(), &g);
    let mut out = Vec::with_capacity(g.out_len * g.c_out);
    for _ in 0..g.out_len {
        out.extend_from_slice(bias.data());
    }
    gemm(
        g.out_len,
        g.kernel * g.c_in,
        g.c_out,
        &cols,
        Layout::Plain,
        kernel.data(),
        Layout::Plain,
        1.0,
        &mut out,
    );
    Tensor::matrix(g.out_len, g.c_out, out)
}

#[derive(Debug, Clone)]
pub struct Conv1dGrads {
    pub input: Tensor,
    pub kernel: Tensor,
    pub bias: Tensor,
}

/// Gradients of a convolution with respect to input, kernel and bias.
pub fn conv1d_backward(
    input: &Tensor,
    kernel: &Tensor,
    stride: usize,
    padding: Padding,
    grad_output: &Tensor,
) -> Result<Conv1dGrads> {
    let mut kernel_grad = Tensor::zeros(kernel.shape());
    let mut bias_grad = Tensor::zeros(&[kernel.shape()[2]]);
    let input_grad = conv1d_backward_accumulate(
        input,
        kernel,
        stride,
        padding,
        grad_output,
        &mut kernel_grad,
        &mut bias_grad,
        true,
    )?
    .expect("input gradient requested");
    Ok(Conv1dGrads {
        input: input_grad,
        kernel: kernel_grad,
        bias: bias_grad,
    })
}

/// Adds kernel/bias gradients into the given accumulators and optionally
/// returns the input gradient.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv1d_backward_accumulate(
    input: &Tensor,
    kernel: &Tensor,
    stride: usize,
    padding: Padding,
    grad_output: &Tensor,
    kernel_grad: &mut Tensor,
    bias_grad: &mut Tensor,
    want_input_grad: bool,
) -> Result<Option<Tensor>> {
    let g = geometry(input, kernel, stride, padding)?;
    if grad_output.shape() != [g.out_len, g.c_out] {
        return Err(Error::config(format!(
            "conv1d output gradient has shape {:?}, expected [{}, {}]",
            grad_output.shape(),
            g.out_len,
            g.c_out
        )));
    }
    let width = g.kernel * g.c_in;
    let cols = im2col(input.data(), &g);

    // dW += colsᵀ · dY
    gemm(
        width,
        g.out_len,
        g.c_out,
        &cols,
        Layout::Transposed,
        grad_output.data(),
        Layout::Plain,
        1.0,
        kernel_grad.data_mut(),
    );
    let db = bias_grad.data_mut();
    for t in 0..g.out_len {
        for (d, v) in db.iter_mut().zip(grad_output.row(t)) {
            *d += v;
        }
    }

    if !want_input_grad {
        return Ok(None);
    }
    // dcols = dY · Wᵀ
    let mut dcols = vec![0.0; g.out_len * width];
    gemm(
        g.out_len,
        g.c_out,
        width,
        grad_output.data(),
        Layout::Plain,
        kernel.data(),
        Layout::Transposed,
        0.0,
        &mut dcols,
    );
    let mut dinput = vec![0.0; g.in_len * g.c_in];
    col2im_add(&dcols, &g, &mut dinput);
    Ok(Some(Tensor::matrix(g.in_len, g.c_in, dinput)?))
}
