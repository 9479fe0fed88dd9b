use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ops::{softmax_rows_in_place, softmax_vjp};
use super::{Parameter, Tensor2};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
    Softmax,
}

#[derive(Debug, Clone)]
struct Cache {
    input: Tensor2,
    output: Tensor2,
}

/// Fully connected layer `activation(x·W + b)` with a cached forward pass.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub weights: Parameter,
    pub bias: Parameter,
    pub activation: Activation,
    cache: Option<Cache>,
}

impl DenseLayer {
    pub fn new(weights: Tensor2, bias: Tensor2, activation: Activation) -> Result<Self> {
        if bias.rows() != 1 || bias.cols() != weights.cols() {
            return Err(Error::dim(
                "DenseLayer::new bias",
                format!("(1, {})", weights.cols()),
                format!("{:?}", bias.shape()),
            ));
        }
        Ok(Self {
            weights: Parameter::new(weights),
            bias: Parameter::new(bias),
            activation,
            cache: None,
        })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let data = (0..inputs * outputs)
            .map(|_| rng.gen_range(-limit..limit))
            .collect();
        let weights = Tensor2::from_vec(inputs, outputs, data).expect("sized above");
        Self {
            weights: Parameter::new(weights),
            bias: Parameter::new(Tensor2::zeros(1, outputs)),
            activation,
            cache: None,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.value.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.value.cols()
    }

    fn apply(&self, input: &Tensor2) -> Result<Tensor2> {
        if input.cols() != self.inputs() {
            return Err(Error::dim("dense_forward", self.inputs(), input.cols()));
        }
        let mut z = input.matmul(&self.weights.value)?;
        z.add_row_broadcast(&self.bias.value)?;
        match self.activation {
            Activation::Relu => z.data_mut().iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Linear => {}
            Activation::Softmax => softmax_rows_in_place(&mut z),
        }
        Ok(z)
    }

    /// Forward pass without recording anything for backward.
    pub fn infer(&self, input: &Tensor2) -> Result<Tensor2> {
        self.apply(input)
    }

    /// Forward pass that records the input and output for [`Self::backward`].
    pub fn forward(&mut self, input: &Tensor2) -> Result<Tensor2> {
        let output = self.apply(input)?;
        self.cache = Some(Cache {
            input: input.clone(),
            output: output.clone(),
        });
        Ok(output)
    }

    /// Accumulates parameter gradients given `∂loss/∂output` and returns
    /// `∂loss/∂input`. Consumes the recorded forward pass.
    pub fn backward(&mut self, grad_output: &Tensor2) -> Result<Tensor2> {
        let cache = self.cache.as_ref().ok_or(Error::NoForward("DenseLayer"))?;
        if grad_output.shape() != cache.output.shape() {
            return Err(Error::dim(
                "DenseLayer::backward",
                format!("{:?}", cache.output.shape()),
                format!("{:?}", grad_output.shape()),
            ));
        }
        let grad_z = match self.activation {
            Activation::Linear => grad_output.clone(),
            Activation::Relu => {
                let mut g = grad_output.clone();
                for (gv, &y) in g.data_mut().iter_mut().zip(cache.output.data()) {
                    if y <= 0.0 {
                        *gv = 0.0;
                    }
                }
                g
            }
            Activation::Softmax => {
                let mut g = Tensor2::zeros(grad_output.rows(), grad_output.cols());
                for r in 0..g.rows() {
                    softmax_vjp(cache.output.row(r), grad_output.row(r), g.row_mut(r));
                }
                g
            }
        };
        self.backward_pre_activation(&grad_z)
    }

    /// Like [`Self::backward`] but takes `∂loss/∂z` for the pre-activation
    /// `z = x·W + b` directly. Used by fused softmax/cross-entropy.
    pub fn backward_pre_activation(&mut self, grad_z: &Tensor2) -> Result<Tensor2> {
        let cache = self.cache.take().ok_or(Error::NoForward("DenseLayer"))?;
        if grad_z.shape() != cache.output.shape() {
            return Err(Error::dim(
                "DenseLayer::backward_pre_activation",
                format!("{:?}", cache.output.shape()),
                format!("{:?}", grad_z.shape()),
            ));
        }
        cache.input.matmul_tn_acc(grad_z, &mut self.weights.grad)?;
        self.bias.grad.add_assign(&grad_z.column_sums())?;
        grad_z.matmul_nt(&self.weights.value)
    }

    pub fn zero_grad(&mut self) {
        self.weights.zero_grad();
        self.bias.zero_grad();
    }

    pub fn params_mut(&mut self) -> [&mut Parameter; 2] {
        [&mut self.weights, &mut self.bias]
    }
}

/// A stack of dense layers evaluated in order.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>) -> Self {
        Self { layers }
    }

    /// Glorot-initialized stack. `widths` lists every layer boundary,
    /// e.g. `[3, 128, 128, 16]`.
    pub fn glorot<R: Rng + ?Sized>(
        widths: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Self {
        assert_eq!(widths.len(), activations.len() + 1);
        let layers = widths
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| DenseLayer::glorot(w[0], w[1], act, rng))
            .collect();
        Self { layers }
    }

    pub fn infer(&self, input: &Tensor2) -> Result<Tensor2> {
        let mut x = input.clone();
        for layer in &self.layers {
            x = layer.infer(&x)?;
        }
        Ok(x)
    }

    pub fn forward(&mut self, input: &Tensor2) -> Result<Tensor2> {
        let mut x = input.clone();
        for layer in &mut self.layers {
            x = layer.forward(&x)?;
        }
        Ok(x)
    }

    pub fn backward(&mut self, grad_output: &Tensor2) -> Result<Tensor2> {
        let (last, rest) = self
            .layers
            .split_last_mut()
            .ok_or(Error::NoForward("Mlp"))?;
        let mut g = last.backward(grad_output)?;
        for layer in rest.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    /// Backward pass starting from the last layer's pre-activation gradient.
    pub fn backward_from_logits(&mut self, grad_logits: &Tensor2) -> Result<Tensor2> {
        let (last, rest) = self
            .layers
            .split_last_mut()
            .ok_or(Error::NoForward("Mlp"))?;
        let mut g = last.backward_pre_activation(grad_logits)?;
        for layer in rest.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    pub fn zero_grad(&mut self) {
        self.layers.iter_mut().for_each(DenseLayer::zero_grad);
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.layers.iter_mut().flat_map(|l| l.params_mut())
    }

    pub fn params(&self) -> impl Iterator<Item = &Parameter> {
        self.layers.iter().flat_map(|l| [&l.weights, &l.bias])
    }
}
