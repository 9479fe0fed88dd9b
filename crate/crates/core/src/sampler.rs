//! Trainable symbol distributions and Gumbel-Softmax sampling with
//! straight-through selection.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::ops::{argmax, log_softmax, softmax, softmax_vjp};
use crate::autodiff::{Activation, DenseLayer, Mlp, Parameter, Tensor2};
use crate::error::{Error, Result};

/// Bounds applied to the uniform draw before the double logarithm.
pub const GUMBEL_U_MIN: f64 = 1e-12;
pub const GUMBEL_U_MAX: f64 = 1.0 - 1e-12;

/// Probability vector over `N` symbols.
///
/// Entries are nonnegative and sum to one. Softmax outputs are strictly
/// positive unless an entry underflows `f64`, which happens for extreme
/// Maxwell-Boltzmann parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolDistribution {
    probs: Vec<f64>,
}

impl SymbolDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidArgument("empty distribution".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidArgument(
                "probabilities must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn from_logits(logits: &[f64]) -> Self {
        Self {
            probs: softmax(logits),
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn entropy_bits(&self) -> f64 {
        distribution_entropy(self)
    }
}

/// Softmax of logits.
pub fn logits_to_distribution(logits: &[f64]) -> SymbolDistribution {
    SymbolDistribution::from_logits(logits)
}

/// `−Σ p log2 p` with `0·log 0 = 0`.
pub fn distribution_entropy(dist: &SymbolDistribution) -> f64 {
    -dist
        .probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

/// Standard Gumbel draw `−ln(−ln u)` with `u` clamped away from 0 and 1.
pub fn standard_gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.r#gen::<f64>().clamp(GUMBEL_U_MIN, GUMBEL_U_MAX);
    -(-u.ln()).ln()
}

pub fn gumbel_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| standard_gumbel(rng)).collect()
}

/// Gumbel-Max: `argmax_i (g_i + ln p_i)`.
pub fn sample_gumbel_max<R: Rng + ?Sized>(dist: &SymbolDistribution, rng: &mut R) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, &p) in dist.probs.iter().enumerate() {
        let g = standard_gumbel(rng);
        let score = g + p.ln();
        if score > best_score {
            best = i;
            best_score = score;
        }
    }
    best
}

/// One Gumbel-Softmax draw: the exact one-hot sample and its relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct GumbelSample {
    pub hard_onehot: Vec<f64>,
    pub soft: Vec<f64>,
    pub symbol_index: usize,
}

impl GumbelSample {
    /// A sample whose relaxation equals the one-hot vector (the `τ → 0`
    /// limit); forward and backward selection coincide.
    pub fn exact(n: usize, symbol_index: usize) -> Self {
        let mut hard = vec![0.0; n];
        hard[symbol_index] = 1.0;
        Self {
            soft: hard.clone(),
            hard_onehot: hard,
            symbol_index,
        }
    }

    pub fn len(&self) -> usize {
        self.soft.len()
    }

    pub fn is_empty(&self) -> bool {
        self.soft.is_empty()
    }
}

/// Relaxed sample `softmax((g + ln p)/τ)` together with the hard Gumbel-Max
/// one-hot of the same perturbed logits.
pub fn gumbel_softmax(logits: &[f64], gumbels: &[f64], tau: f64) -> Result<GumbelSample> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    if logits.len() != gumbels.len() {
        return Err(Error::dim("gumbel_softmax", logits.len(), gumbels.len()));
    }
    let log_p = log_softmax(logits);
    let perturbed: Vec<f64> = log_p.iter().zip(gumbels).map(|(l, g)| l + g).collect();
    let symbol_index = argmax(&perturbed);
    let scaled: Vec<f64> = perturbed.iter().map(|v| v / tau).collect();
    let soft = softmax(&scaled);
    let mut hard_onehot = vec![0.0; logits.len()];
    hard_onehot[symbol_index] = 1.0;
    Ok(GumbelSample {
        hard_onehot,
        soft,
        symbol_index,
    })
}

/// Vector–Jacobian product of the relaxed sample with respect to the logits.
///
/// The log-normalizer of `ln p` cancels inside the softmax, so
/// `∂soft/∂logits = (1/τ)·J_softmax(soft)`.
pub fn gumbel_softmax_backward(sample: &GumbelSample, tau: f64, grad_soft: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; sample.soft.len()];
    softmax_vjp(&sample.soft, grad_soft, &mut out);
    out.iter_mut().for_each(|v| *v /= tau);
    out
}

fn check_selection(sample: &GumbelSample, matrix: &Tensor2) -> Result<()> {
    if matrix.cols() != 2 || matrix.rows() != sample.len() {
        return Err(Error::dim(
            "straight_through_select",
            format!("({}, 2)", sample.len()),
            format!("{:?}", matrix.shape()),
        ));
    }
    if sample.symbol_index >= matrix.rows() {
        return Err(Error::dim(
            "straight_through_select index",
            format!("< {}", matrix.rows()),
            sample.symbol_index,
        ));
    }
    Ok(())
}

/// Forward value of the straight-through selection: the exact row of the
/// matrix picked by the hard one-hot.
pub fn straight_through_select(sample: &GumbelSample, matrix: &Tensor2) -> Result<[f64; 2]> {
    check_selection(sample, matrix)?;
    let row = matrix.row(sample.symbol_index);
    Ok([row[0], row[1]])
}

/// Gradients of the straight-through selection.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionGrad {
    /// `∂/∂C`, equal to `outer(soft, upstream)`.
    pub matrix: Tensor2,
    /// `∂/∂soft`, equal to `C·upstream`.
    pub soft: Vec<f64>,
}

/// Backward pass of the straight-through selection, treating the output as
/// `soft · C`.
pub fn straight_through_backward(
    sample: &GumbelSample,
    matrix: &Tensor2,
    upstream: [f64; 2],
) -> Result<SelectionGrad> {
    check_selection(sample, matrix)?;
    let n = matrix.rows();
    let mut grad_c = Tensor2::zeros(n, 2);
    let mut grad_soft = vec![0.0; n];
    for s in 0..n {
        let w = sample.soft[s];
        grad_c.set(s, 0, w * upstream[0]);
        grad_c.set(s, 1, w * upstream[1]);
        let row = matrix.row(s);
        grad_soft[s] = row[0] * upstream[0] + row[1] * upstream[1];
    }
    Ok(SelectionGrad {
        matrix: grad_c,
        soft: grad_soft,
    })
}

/// SNR-conditioned logits generator: SNR in dB → 128 ReLU units → `N` logits.
#[derive(Debug, Clone)]
pub struct LogitsNetwork {
    pub mlp: Mlp,
}

impl LogitsNetwork {
    pub const HIDDEN: usize = 128;

    pub fn new<R: Rng + ?Sized>(order: usize, rng: &mut R) -> Self {
        Self::with_hidden(order, Self::HIDDEN, rng)
    }

    pub fn with_hidden<R: Rng + ?Sized>(order: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            mlp: Mlp::glorot(
                &[1, hidden, order],
                &[Activation::Relu, Activation::Linear],
                rng,
            ),
        }
    }

    pub fn from_layers(layer1: DenseLayer, layer2: DenseLayer) -> Self {
        Self {
            mlp: Mlp::new(vec![layer1, layer2]),
        }
    }

    pub fn order(&self) -> usize {
        self.mlp.layers[1].outputs()
    }

    fn snr_column(snr_db: &[f64]) -> Tensor2 {
        Tensor2::from_vec(snr_db.len(), 1, snr_db.to_vec()).expect("column")
    }

    /// Logits for a batch of SNRs (one row per SNR).
    pub fn logits(&self, snr_db: &[f64]) -> Result<Tensor2> {
        self.mlp.infer(&Self::snr_column(snr_db))
    }

    pub fn forward(&mut self, snr_db: &[f64]) -> Result<Tensor2> {
        self.mlp.forward(&Self::snr_column(snr_db))
    }

    pub fn backward(&mut self, grad_logits: &Tensor2) -> Result<()> {
        self.mlp.backward(grad_logits).map(|_| ())
    }

    pub fn distribution(&self, snr_db: f64) -> Result<SymbolDistribution> {
        let logits = self.logits(&[snr_db])?;
        Ok(SymbolDistribution::from_logits(logits.row(0)))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.mlp.params_mut()
    }
}
