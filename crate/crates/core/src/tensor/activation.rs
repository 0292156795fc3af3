use super::Tensor;
use crate::error::{Error, Result};

pub fn relu(x: &Tensor) -> Result<Tensor> {
    x.ensure_finite("relu input")?;
    let mut y = x.clone();
    y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    Ok(y)
}

/// Masks `grad` by the positive entries of the relu output.
pub fn relu_backward(output: &Tensor, grad: &mut Tensor) {
    for (g, y) in grad.data_mut().iter_mut().zip(output.data()) {
        if *y <= 0.0 {
            *g = 0.0;
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::usage("softmax of an empty vector"));
    }
    if let Some(i) = logits.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("softmax logit {i} is not finite")));
    }
    Ok(softmax_unchecked(logits))
}

/// Max-shifted softmax without input validation.
pub fn softmax_unchecked(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    out
}
