use super::Tensor;

/// A named trainable tensor together with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Parameter {
    name: String,
    value: Tensor,
    grad: Tensor,
    grad_ready: bool,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self {
            name: name.into(),
            value,
            grad,
            grad_ready: false,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub fn value_mut(&mut self) -> &mut Tensor {
        &mut self.value
    }

    pub fn grad(&self) -> &Tensor {
        &self.grad
    }

    /// Mutable access to the gradient; marks it as populated.
    pub fn grad_mut(&mut self) -> &mut Tensor {
        self.grad_ready = true;
        &mut self.grad
    }

    /// Value and gradient at once; marks the gradient as populated.
    pub(crate) fn value_and_grad_mut(&mut self) -> (&Tensor, &mut Tensor) {
        self.grad_ready = true;
        (&self.value, &mut self.grad)
    }

    pub fn has_grad(&self) -> bool {
        self.grad_ready
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
        self.grad_ready = false;
    }
}
