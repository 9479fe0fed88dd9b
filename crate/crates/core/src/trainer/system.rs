use rand::Rng;
use rand_distr::StandardNormal;

use super::config::{Mode, TrainConfig};
use crate::autodiff::{Activation, Checkpoint, DenseLayer, Mlp, Parameter, Tensor2};
use crate::demodulator::DemodNetwork;
use crate::error::{Error, Result};
use crate::modulator::{Constellation, normalize, qam_grid};
use crate::sampler::{LogitsNetwork, SymbolDistribution};

/// The trainable transmitter–receiver pair.
#[derive(Debug, Clone)]
pub struct ShapingSystem {
    pub mode: Mode,
    pub logits: LogitsNetwork,
    /// Unnormalized constellation matrix `C` (`N×2`).
    pub points: Parameter,
    pub demod: DemodNetwork,
}

/// Initial geometry: the uniform-normalized QAM grid of the same order (or
/// points on a circle when `N` is not a QAM order) plus Gaussian jitter.
fn initial_points<R: Rng + ?Sized>(order: usize, jitter: f64, rng: &mut R) -> Result<Tensor2> {
    let base = match qam_grid(order) {
        Ok(grid) => grid,
        Err(_) => {
            let rows: Vec<[f64; 2]> = (0..order)
                .map(|k| {
                    let a = 2.0 * std::f64::consts::PI * k as f64 / order as f64;
                    [a.cos(), a.sin()]
                })
                .collect();
            Tensor2::from_rows(&rows)?
        }
    };
    let mut pts = normalize(&base, &SymbolDistribution::uniform(order))?.points;
    if jitter > 0.0 {
        for v in pts.data_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += jitter * z;
        }
    }
    Ok(pts)
}

impl ShapingSystem {
    pub fn new<R: Rng + ?Sized>(cfg: &TrainConfig, rng: &mut R) -> Result<Self> {
        let logits = LogitsNetwork::with_hidden(cfg.order, cfg.hidden_units, rng);
        let jitter = if cfg.mode.trains_geometry() {
            cfg.init_jitter
        } else {
            0.0
        };
        let points = Parameter::new(initial_points(cfg.order, jitter, rng)?);
        let demod = DemodNetwork::with_hidden(cfg.order, cfg.hidden_units, rng);
        Ok(Self {
            mode: cfg.mode,
            logits,
            points,
            demod,
        })
    }

    pub fn order(&self) -> usize {
        self.points.value.rows()
    }

    /// The transmit distribution at `snr_db` (uniform in geometric-only mode).
    pub fn distribution(&self, snr_db: f64) -> Result<SymbolDistribution> {
        if self.mode.trains_distribution() {
            self.logits.distribution(snr_db)
        } else {
            Ok(SymbolDistribution::uniform(self.order()))
        }
    }

    /// The constellation normalized under the distribution at `snr_db`.
    pub fn constellation(&self, snr_db: f64) -> Result<Constellation> {
        let mut c = normalize(&self.points.value, &self.distribution(snr_db)?)?;
        c.trainable = self.mode.trains_geometry();
        Ok(c)
    }

    pub fn zero_grad(&mut self) {
        self.logits.mlp.zero_grad();
        self.points.zero_grad();
        self.demod.zero_grad();
    }

    /// Parameters updated in this system's mode.
    pub fn trainable_params(&mut self) -> Vec<&mut Parameter> {
        let mut params: Vec<&mut Parameter> = self.demod.params_mut().collect();
        if self.mode.trains_geometry() {
            params.push(&mut self.points);
        }
        if self.mode.trains_distribution() {
            params.extend(self.logits.params_mut());
        }
        params
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::default();
        store_mlp(&mut ck, "sampler", &self.logits.mlp);
        ck.insert("modulator.points", &self.points.value);
        store_mlp(&mut ck, "demodulator", &self.demod.mlp);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint, mode: Mode) -> Result<Self> {
        let logits = load_mlp(ck, "sampler", &[Activation::Relu, Activation::Linear])?;
        let points = ck.get("modulator.points")?;
        let demod = load_mlp(
            ck,
            "demodulator",
            &[Activation::Relu, Activation::Relu, Activation::Softmax],
        )?;
        let order = points.rows();
        let out = |m: &Mlp| m.layers.last().map_or(0, |l| l.outputs());
        if points.cols() != 2 || out(&logits) != order || out(&demod) != order {
            return Err(Error::dim(
                "checkpoint",
                format!("consistent order {order}"),
                format!("sampler {} / demodulator {}", out(&logits), out(&demod)),
            ));
        }
        Ok(Self {
            mode,
            logits: LogitsNetwork { mlp: logits },
            points: Parameter::new(points),
            demod: DemodNetwork { mlp: demod },
        })
    }
}

fn store_mlp(ck: &mut Checkpoint, prefix: &str, mlp: &Mlp) {
    for (k, layer) in mlp.layers.iter().enumerate() {
        ck.insert(format!("{prefix}.dense{k}.weights"), &layer.weights.value);
        ck.insert(format!("{prefix}.dense{k}.bias"), &layer.bias.value);
    }
}

fn load_mlp(ck: &Checkpoint, prefix: &str, activations: &[Activation]) -> Result<Mlp> {
    let layers = activations
        .iter()
        .enumerate()
        .map(|(k, &act)| {
            DenseLayer::new(
                ck.get(&format!("{prefix}.dense{k}.weights"))?,
                ck.get(&format!("{prefix}.dense{k}.bias"))?,
                act,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Mlp::new(layers))
}
