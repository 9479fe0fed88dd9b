//! End-to-end training: distribution network → Gumbel-Softmax → normalized
//! constellation → channel → demodulator → entropy-corrected cross-entropy.

mod config;
mod evaluate;
mod system;

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::ops::{log_softmax, softmax_vjp};
use crate::autodiff::{Checkpoint, Tensor2, adam_step};
use crate::channel::{SnrPoint, Transmission};
use crate::demodulator::DemodNetwork;
use crate::error::{Error, Result};
use crate::objectives::{
    LossBreakdown, POSTERIOR_FLOOR, clamp_posterior, cross_entropy_grad_logits, nats_to_bits,
};
use crate::sampler::{GumbelSample, gumbel_softmax, gumbel_vector};

pub use config::{
    Mode, Schedule, SelectionGradient, TrainConfig, default_batch_schedule, default_lr_schedule,
    schedule_value,
};
pub use evaluate::{EvalPoint, EvalSettings, Evaluation, evaluate};
pub use system::ShapingSystem;

/// Which loss the optimizer minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// `L̂ = L − H(S)`.
    Corrected,
    /// Plain cross-entropy `L`; a negative control, not for production use.
    Uncorrected,
}

/// Summary of the SNRs drawn for one batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrStats {
    pub mean_db: f64,
    pub min_db: f64,
    pub max_db: f64,
}

/// Loss and bookkeeping from one forward/backward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub loss: LossBreakdown,
    pub snr: SnrStats,
    pub batch_size: usize,
    pub clamped: usize,
}

/// One row of the per-step loss curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossCurveRow {
    pub step: usize,
    pub loss_bits: f64,
    pub entropy_bits: f64,
    pub mi_bound_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub step: usize,
    pub snr: SnrStats,
    pub loss: LossBreakdown,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub objective: Objective,
    /// False for negative-control runs.
    pub production: bool,
    pub checkpoints: Vec<CheckpointRecord>,
    pub loss_curve: Vec<LossCurveRow>,
    pub clamped_posteriors: usize,
    pub final_parameters: Checkpoint,
    pub wall_time_s: f64,
}

impl TrainReport {
    /// Equality ignoring wall-clock fields.
    pub fn same_outcome(&self, other: &TrainReport) -> bool {
        let strip = |r: &TrainReport| {
            let mut r = r.clone();
            r.wall_time_s = 0.0;
            r.checkpoints.iter_mut().for_each(|c| c.wall_time_s = 0.0);
            r
        };
        strip(self) == strip(other)
    }

    pub fn system(&self) -> Result<ShapingSystem> {
        ShapingSystem::from_checkpoint(&self.final_parameters, self.config.mode)
    }

    pub fn write_loss_curve(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for row in &self.loss_curve {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Everything drawn for one sample of a batch.
struct SampleState {
    probs: Vec<f64>,
    entropy_nats: f64,
    sample: GumbelSample,
    energy: f64,
    scale: f64,
    x: [f64; 2],
    tx: Transmission,
}

/// Draws one batch, runs it forward, and accumulates gradients of the
/// objective into `system` (grads are not zeroed here).
pub fn forward_backward<R: Rng + ?Sized>(
    system: &mut ShapingSystem,
    cfg: &TrainConfig,
    batch_size: usize,
    objective: Objective,
    step: usize,
    rng: &mut R,
) -> Result<StepOutcome> {
    let n = system.order();
    let [lo, hi] = cfg.snr_range_db;
    let snrs: Vec<f64> = (0..batch_size).map(|_| rng.gen_range(lo..=hi)).collect();
    let shaping = system.mode.trains_distribution();
    let logits = if shaping {
        Some(system.logits.forward(&snrs)?)
    } else {
        None
    };
    let uniform = vec![1.0 / n as f64; n];

    let mut states = Vec::with_capacity(batch_size);
    for (b, &snr_db) in snrs.iter().enumerate() {
        let (probs, entropy_nats, sample) = match &logits {
            Some(l) => {
                let row = l.row(b);
                let logp = log_softmax(row);
                let probs: Vec<f64> = logp.iter().map(|v| v.exp()).collect();
                let h = -probs
                    .iter()
                    .zip(&logp)
                    .map(|(p, lp)| if *p > 0.0 { p * lp } else { 0.0 })
                    .sum::<f64>();
                let g = gumbel_vector(n, rng);
                (probs, h, gumbel_softmax(row, &g, cfg.tau)?)
            }
            None => {
                let s = rng.gen_range(0..n);
                (uniform.clone(), (n as f64).ln(), GumbelSample::exact(n, s))
            }
        };
        let c = &system.points.value;
        let energy: f64 = (0..n)
            .map(|s| {
                let r = c.row(s);
                probs[s] * (r[0] * r[0] + r[1] * r[1])
            })
            .sum();
        if !(energy > 0.0) {
            return Err(Error::DegenerateInput(format!(
                "zero expected energy at step {step}"
            )));
        }
        let scale = energy.sqrt().recip();
        let row = c.row(sample.symbol_index);
        let x = [scale * row[0], scale * row[1]];
        let tx = cfg.channel.transmit(x, SnrPoint::from_db(snr_db), rng)?;
        states.push(SampleState {
            probs,
            entropy_nats,
            sample,
            energy,
            scale,
            x,
            tx,
        });
    }

    let ys: Vec<[f64; 2]> = states.iter().map(|s| s.tx.y).collect();
    let input = DemodNetwork::input_batch(&ys, &snrs)?;
    let posteriors = system.demod.forward(&input)?;
    let targets: Vec<usize> = states.iter().map(|s| s.sample.symbol_index).collect();

    let mut ce = 0.0;
    let mut clamped = 0;
    for (b, &s) in targets.iter().enumerate() {
        let q = posteriors.get(b, s);
        if q < POSTERIOR_FLOOR {
            clamped += 1;
        }
        ce -= clamp_posterior(q).ln();
    }
    let inv_b = 1.0 / batch_size as f64;
    ce *= inv_b;
    let entropy = states.iter().map(|s| s.entropy_nats).sum::<f64>() * inv_b;
    let loss = LossBreakdown::new(nats_to_bits(ce), nats_to_bits(entropy));
    let optimized = match objective {
        Objective::Corrected => loss.corrected_loss_bits,
        Objective::Uncorrected => loss.cross_entropy_bits,
    };
    if !optimized.is_finite() {
        return Err(Error::NonFiniteLoss {
            step,
            dump: dump_batch(&snrs, &states, &posteriors),
        });
    }

    let grad_z = cross_entropy_grad_logits(&targets, &posteriors)?;
    let grad_in = system.demod.backward_from_logits(&grad_z)?;

    let trains_geometry = system.mode.trains_geometry();
    let c = system.points.value.clone();
    let mut grad_c = Tensor2::zeros(n, 2);
    let mut grad_logits = Tensor2::zeros(batch_size, n);
    let mut grad_soft = vec![0.0; n];
    let mut grad_p = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    for (b, st) in states.iter().enumerate() {
        let gx = st.tx.backward([grad_in.get(b, 0), grad_in.get(b, 1)]);
        // x = scale · u with u the selected row
        let du = [st.scale * gx[0], st.scale * gx[1]];
        let u = [st.x[0] / st.scale, st.x[1] / st.scale];
        let d_scale = gx[0] * u[0] + gx[1] * u[1];
        let d_energy = d_scale * (-0.5 * st.scale / st.energy);
        if trains_geometry {
            let weights = match cfg.selection_gradient {
                SelectionGradient::Soft => &st.sample.soft,
                SelectionGradient::Hard => &st.sample.hard_onehot,
            };
            for s in 0..n {
                let r = c.row(s);
                let g = grad_c.row_mut(s);
                let w = weights[s];
                let e = d_energy * 2.0 * st.probs[s];
                g[0] += w * du[0] + e * r[0];
                g[1] += w * du[1] + e * r[1];
            }
        }
        if shaping {
            for s in 0..n {
                let r = c.row(s);
                grad_soft[s] = r[0] * du[0] + r[1] * du[1];
                grad_p[s] = d_energy * (r[0] * r[0] + r[1] * r[1]);
            }
            let gl = crate::sampler::gumbel_softmax_backward(&st.sample, cfg.tau, &grad_soft);
            softmax_vjp(&st.probs, &grad_p, &mut tmp);
            let out = grad_logits.row_mut(b);
            for j in 0..n {
                out[j] = gl[j] + tmp[j];
                if objective == Objective::Corrected && st.probs[j] > 0.0 {
                    out[j] += inv_b * st.probs[j] * (st.probs[j].ln() + st.entropy_nats);
                }
            }
        }
    }
    if shaping {
        system.logits.backward(&grad_logits)?;
    }
    if trains_geometry {
        system.points.grad.add_assign(&grad_c)?;
    }

    let (min_db, max_db) = snrs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| {
            (a.min(s), b.max(s))
        });
    Ok(StepOutcome {
        loss,
        snr: SnrStats {
            mean_db: snrs.iter().sum::<f64>() * inv_b,
            min_db,
            max_db,
        },
        batch_size,
        clamped,
    })
}

fn dump_batch(snrs: &[f64], states: &[SampleState], posteriors: &Tensor2) -> String {
    let mut out = String::new();
    for (b, st) in states.iter().enumerate().take(16) {
        let _ = write!(
            out,
            "[snr={:.3} s={} x=({:.4},{:.4}) y=({:.4},{:.4}) q={:.3e}] ",
            snrs[b],
            st.sample.symbol_index,
            st.x[0],
            st.x[1],
            st.tx.y[0],
            st.tx.y[1],
            posteriors.get(b, st.sample.symbol_index)
        );
    }
    out
}

/// Stateful training loop.
pub struct Trainer {
    pub cfg: TrainConfig,
    pub system: ShapingSystem,
    pub objective: Objective,
    pub step: usize,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(cfg: TrainConfig, objective: Objective) -> Result<Self> {
        let mut cfg = cfg;
        cfg.fill_defaults();
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let system = ShapingSystem::new(&cfg, &mut rng)?;
        Ok(Self {
            cfg,
            system,
            objective,
            step: 0,
            rng,
        })
    }

    /// One optimizer step with the scheduled batch size and learning rate.
    pub fn step(&mut self) -> Result<StepOutcome> {
        let batch = self.cfg.batch_size(self.step);
        let adam = self.cfg.adam_config(self.cfg.learning_rate(self.step));
        self.system.zero_grad();
        let outcome = forward_backward(
            &mut self.system,
            &self.cfg,
            batch,
            self.objective,
            self.step,
            &mut self.rng,
        )?;
        adam_step(self.system.trainable_params(), &adam);
        self.step += 1;
        Ok(outcome)
    }

    pub fn run(mut self) -> Result<TrainReport> {
        let start = Instant::now();
        let total = self.cfg.steps_total;
        let every = self.cfg.checkpoint_every;
        let mut loss_curve = Vec::with_capacity(total);
        let mut checkpoints = Vec::new();
        let mut clamped = 0;
        while self.step < total {
            let step = self.step;
            let out = self.step()?;
            clamped += out.clamped;
            loss_curve.push(LossCurveRow {
                step,
                loss_bits: out.loss.cross_entropy_bits,
                entropy_bits: out.loss.source_entropy_bits,
                mi_bound_bits: out.loss.mi_lower_bound_bits,
            });
            let last = step + 1 == total;
            if last || (every > 0 && (step + 1).is_multiple_of(every)) {
                log::info!(
                    "step {}/{}: L = {:.4} bits, H = {:.4} bits, -L^ = {:.4} bits",
                    step + 1,
                    total,
                    out.loss.cross_entropy_bits,
                    out.loss.source_entropy_bits,
                    out.loss.mi_lower_bound_bits
                );
                checkpoints.push(CheckpointRecord {
                    step: step + 1,
                    snr: out.snr,
                    loss: out.loss,
                    wall_time_s: start.elapsed().as_secs_f64(),
                });
            }
        }
        Ok(TrainReport {
            objective: self.objective,
            production: self.objective == Objective::Corrected,
            checkpoints,
            loss_curve,
            clamped_posteriors: clamped,
            final_parameters: self.system.to_checkpoint(),
            wall_time_s: start.elapsed().as_secs_f64(),
            config: self.cfg,
        })
    }
}

/// Trains by minimizing the entropy-corrected loss `L̂`.
pub fn train(cfg: &TrainConfig) -> Result<TrainReport> {
    Trainer::new(cfg.clone(), Objective::Corrected)?.run()
}

/// Negative control: the same loop minimizing the plain cross-entropy `L`.
pub fn train_with_uncorrected_loss(cfg: &TrainConfig) -> Result<TrainReport> {
    Trainer::new(cfg.clone(), Objective::Uncorrected)?.run()
}
