//! SNR-conditioned posterior networks and reference posteriors.

use rand::Rng;

use crate::autodiff::{Activation, Mlp, Parameter, Tensor2, ops};
use crate::channel::{ChannelModel, SnrPoint};
use crate::error::{Error, Result};
use crate::modulator::Constellation;
use crate::sampler::SymbolDistribution;

/// Anything that maps received samples to posteriors over the `N` symbols.
pub trait Posterior {
    fn order(&self) -> usize;

    /// One posterior row per received sample, all at the same SNR.
    fn posteriors(&self, ys: &[[f64; 2]], snr: SnrPoint) -> Result<Tensor2>;
}

/// `[Re y, Im y, snr_db]` → 128 ReLU → 128 ReLU → `N` softmax.
#[derive(Debug, Clone)]
pub struct DemodNetwork {
    pub mlp: Mlp,
}

impl DemodNetwork {
    pub const HIDDEN: usize = 128;

    pub fn new<R: Rng + ?Sized>(order: usize, rng: &mut R) -> Self {
        Self::with_hidden(order, Self::HIDDEN, rng)
    }

    pub fn with_hidden<R: Rng + ?Sized>(order: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            mlp: Mlp::glorot(
                &[3, hidden, hidden, order],
                &[Activation::Relu, Activation::Relu, Activation::Softmax],
                rng,
            ),
        }
    }

    pub fn order(&self) -> usize {
        self.mlp.layers.last().map_or(0, |l| l.outputs())
    }

    /// Packs samples into network input rows.
    pub fn input_batch(ys: &[[f64; 2]], snr_db: &[f64]) -> Result<Tensor2> {
        if ys.len() != snr_db.len() {
            return Err(Error::dim(
                "DemodNetwork::input_batch",
                ys.len(),
                snr_db.len(),
            ));
        }
        let mut data = Vec::with_capacity(3 * ys.len());
        for (y, &s) in ys.iter().zip(snr_db) {
            data.extend_from_slice(&[y[0], y[1], s]);
        }
        Tensor2::from_vec(ys.len(), 3, data)
    }

    pub fn posterior(&self, y: [f64; 2], snr_db: f64) -> Result<SymbolDistribution> {
        let p = self.mlp.infer(&Self::input_batch(&[y], &[snr_db])?)?;
        SymbolDistribution::new(p.row(0).to_vec())
    }

    pub fn infer(&self, input: &Tensor2) -> Result<Tensor2> {
        self.mlp.infer(input)
    }

    /// Recorded forward pass; returns posterior rows.
    pub fn forward(&mut self, input: &Tensor2) -> Result<Tensor2> {
        self.mlp.forward(input)
    }

    /// Backward from `∂loss/∂logits`; returns `∂loss/∂input` (`B×3`).
    pub fn backward_from_logits(&mut self, grad_logits: &Tensor2) -> Result<Tensor2> {
        self.mlp.backward_from_logits(grad_logits)
    }

    pub fn zero_grad(&mut self) {
        self.mlp.zero_grad();
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.mlp.params_mut()
    }
}

impl Posterior for DemodNetwork {
    fn order(&self) -> usize {
        DemodNetwork::order(self)
    }

    fn posteriors(&self, ys: &[[f64; 2]], snr: SnrPoint) -> Result<Tensor2> {
        let snrs = vec![snr.snr_db; ys.len()];
        self.mlp.infer(&Self::input_batch(ys, &snrs)?)
    }
}

/// The true posterior `p(s|y) ∝ p(s)·p(y|x_s)` of a channel.
#[derive(Debug, Clone)]
pub struct ExactPosterior {
    pub constellation: Constellation,
    pub dist: SymbolDistribution,
    pub channel: ChannelModel,
}

impl ExactPosterior {
    pub fn awgn(constellation: Constellation, dist: SymbolDistribution) -> Result<Self> {
        Self::new(constellation, dist, ChannelModel::Awgn)
    }

    pub fn new(
        constellation: Constellation,
        dist: SymbolDistribution,
        channel: ChannelModel,
    ) -> Result<Self> {
        if constellation.order() != dist.len() {
            return Err(Error::dim(
                "ExactPosterior",
                constellation.order(),
                dist.len(),
            ));
        }
        Ok(Self {
            constellation,
            dist,
            channel,
        })
    }

    /// Natural-log joint scores `log p(s) + log p(y|x_s)` written into `out`.
    pub fn log_joint_into(&self, y: [f64; 2], snr: SnrPoint, out: &mut [f64]) {
        let pts = &self.constellation.points;
        for (s, o) in out.iter_mut().enumerate() {
            let p = self.dist.probs()[s];
            *o = if p > 0.0 {
                let r = pts.row(s);
                p.ln() + self.channel.log_density(y, [r[0], r[1]], snr)
            } else {
                f64::NEG_INFINITY
            };
        }
    }

    fn posterior_into(&self, y: [f64; 2], snr: SnrPoint, out: &mut [f64]) {
        if snr.is_noiseless() {
            let pts = &self.constellation.points;
            let d2 = |s: usize| {
                let r = pts.row(s);
                (y[0] - r[0]).powi(2) + (y[1] - r[1]).powi(2)
            };
            let probs = self.dist.probs();
            let best = (0..out.len())
                .filter(|&s| probs[s] > 0.0)
                .map(d2)
                .fold(f64::INFINITY, f64::min);
            let mut z = 0.0;
            for (s, o) in out.iter_mut().enumerate() {
                *o = if probs[s] > 0.0 && d2(s) == best {
                    probs[s]
                } else {
                    0.0
                };
                z += *o;
            }
            out.iter_mut().for_each(|o| *o /= z);
            return;
        }
        let mut scores = vec![0.0; out.len()];
        self.log_joint_into(y, snr, &mut scores);
        ops::softmax_into(&scores, out);
    }

    pub fn posterior(&self, y: [f64; 2], snr: SnrPoint) -> SymbolDistribution {
        let mut out = vec![0.0; self.dist.len()];
        self.posterior_into(y, snr, &mut out);
        SymbolDistribution::new(out).expect("softmax output is a distribution")
    }
}

impl Posterior for ExactPosterior {
    fn order(&self) -> usize {
        self.dist.len()
    }

    fn posteriors(&self, ys: &[[f64; 2]], snr: SnrPoint) -> Result<Tensor2> {
        let n = self.dist.len();
        let mut out = Tensor2::zeros(ys.len(), n);
        for (i, &y) in ys.iter().enumerate() {
            self.posterior_into(y, snr, out.row_mut(i));
        }
        Ok(out)
    }
}

/// Exact AWGN posterior at a single received sample.
pub fn exact_posterior_oracle(
    c: &Constellation,
    dist: &SymbolDistribution,
    y: [f64; 2],
    snr: SnrPoint,
) -> Result<SymbolDistribution> {
    Ok(ExactPosterior::awgn(c.clone(), dist.clone())?.posterior(y, snr))
}

/// Ignores its input and always answers uniform.
#[derive(Debug, Clone, Copy)]
pub struct UniformPosterior {
    pub order: usize,
}

impl Posterior for UniformPosterior {
    fn order(&self) -> usize {
        self.order
    }

    fn posteriors(&self, ys: &[[f64; 2]], _snr: SnrPoint) -> Result<Tensor2> {
        Ok(Tensor2::filled(
            ys.len(),
            self.order,
            1.0 / self.order as f64,
        ))
    }
}
