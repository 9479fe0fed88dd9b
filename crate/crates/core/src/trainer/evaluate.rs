use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::system::ShapingSystem;
use crate::channel::{ChannelModel, SnrPoint};
use crate::error::Result;
use crate::objectives::{
    McEstimate, MiCurve, mi_lower_bound_monte_carlo, mi_oracle_monte_carlo, mi_oracle_quadrature,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub channel: ChannelModel,
    /// Samples for Monte Carlo MI on channels without a quadrature oracle.
    pub mc_samples: usize,
    /// Samples for the demodulator bound `−L̂`; `None` skips it.
    pub bound_samples: Option<usize>,
    /// SNR range the model was trained on, for extrapolation flags.
    pub trained_range_db: Option<[f64; 2]>,
    pub seed: u64,
}

impl EvalSettings {
    pub fn awgn(seed: u64) -> Self {
        Self {
            channel: ChannelModel::Awgn,
            mc_samples: 1_000_000,
            bound_samples: None,
            trained_range_db: None,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub snr_db: f64,
    pub mi_bits: f64,
    /// Zero for quadrature results.
    pub mi_std_error: f64,
    pub entropy_bits: f64,
    pub mi_bound: Option<McEstimate>,
    pub extrapolated: bool,
    pub probs: Vec<f64>,
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub scheme: String,
    pub points: Vec<EvalPoint>,
}

impl Evaluation {
    pub fn curve(&self) -> Result<MiCurve> {
        MiCurve::new(
            self.scheme.clone(),
            self.points.iter().map(|p| (p.snr_db, p.mi_bits)).collect(),
        )
    }

    pub fn at(&self, snr_db: f64) -> Option<&EvalPoint> {
        self.points
            .iter()
            .find(|p| (p.snr_db - snr_db).abs() < 1e-9)
    }
}

/// Oracle MI of the learned (geometry, distribution) pair at every grid
/// point, with the demodulator's bound alongside. Each point draws from its
/// own random stream.
pub fn evaluate(
    system: &ShapingSystem,
    scheme: &str,
    snr_grid_db: &[f64],
    settings: &EvalSettings,
) -> Result<Evaluation> {
    let mut points = Vec::with_capacity(snr_grid_db.len());
    for (k, &snr_db) in snr_grid_db.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
        rng.set_stream(k as u64);
        let snr = SnrPoint::from_db(snr_db);
        let dist = system.distribution(snr_db)?;
        let c = system.constellation(snr_db)?;
        let (mi_bits, mi_std_error) = match settings.channel {
            ChannelModel::Awgn => (mi_oracle_quadrature(&c, &dist, snr)?, 0.0),
            ch => {
                let e = mi_oracle_monte_carlo(&c, &dist, ch, snr, settings.mc_samples, &mut rng)?;
                (e.bits, e.std_error)
            }
        };
        let mi_bound = settings
            .bound_samples
            .map(|n| {
                mi_lower_bound_monte_carlo(
                    &c,
                    &dist,
                    &system.demod,
                    settings.channel,
                    snr,
                    n,
                    &mut rng,
                )
            })
            .transpose()?;
        let extrapolated = settings
            .trained_range_db
            .is_some_and(|[lo, hi]| snr_db < lo || snr_db > hi);
        if extrapolated {
            log::warn!("{snr_db} dB lies outside the trained SNR range");
        }
        points.push(EvalPoint {
            snr_db,
            mi_bits,
            mi_std_error,
            entropy_bits: dist.entropy_bits(),
            mi_bound,
            extrapolated,
            probs: dist.probs().to_vec(),
            points: (0..c.order())
                .map(|s| [c.points.get(s, 0), c.points.get(s, 1)])
                .collect(),
        });
    }
    Ok(Evaluation {
        scheme: scheme.to_string(),
        points,
    })
}
