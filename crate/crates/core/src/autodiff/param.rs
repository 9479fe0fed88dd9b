use super::Tensor2;

/// A trainable tensor with its gradient and Adam moment buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub value: Tensor2,
    pub grad: Tensor2,
    pub adam_m: Tensor2,
    pub adam_v: Tensor2,
    pub step_count: u64,
}

impl Parameter {
    pub fn new(value: Tensor2) -> Self {
        let (r, c) = value.shape();
        Self {
            value,
            grad: Tensor2::zeros(r, c),
            adam_m: Tensor2::zeros(r, c),
            adam_v: Tensor2::zeros(r, c),
            step_count: 0,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.shape()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}
