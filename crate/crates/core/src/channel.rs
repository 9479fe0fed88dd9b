//! Stochastic channel models: AWGN and Rayleigh block fading with pilot-based
//! LMMSE estimation and zero-forcing equalization.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Signal-to-noise ratio for unit signal energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrPoint {
    pub snr_db: f64,
    pub snr_linear: f64,
}

impl SnrPoint {
    pub fn from_db(snr_db: f64) -> Self {
        Self {
            snr_db,
            snr_linear: 10f64.powf(snr_db / 10.0),
        }
    }

    /// `+∞ dB`: noise switched off.
    pub fn noiseless() -> Self {
        Self {
            snr_db: f64::INFINITY,
            snr_linear: f64::INFINITY,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.snr_linear.is_infinite()
    }

    /// Total complex noise variance `σ² = 1/snr`.
    pub fn noise_variance(&self) -> f64 {
        self.snr_linear.recip()
    }
}

/// Channel kind plus its parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelModel {
    #[default]
    Awgn,
    RayleighLmmse {
        #[serde(default = "default_pilots")]
        pilots: usize,
    },
}

fn default_pilots() -> usize {
    1
}

impl fmt::Display for ChannelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelModel::Awgn => write!(f, "awgn"),
            ChannelModel::RayleighLmmse { .. } => write!(f, "rayleigh_lmmse"),
        }
    }
}

impl FromStr for ChannelModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "awgn" => Ok(ChannelModel::Awgn),
            "rayleigh" | "rayleigh_lmmse" => Ok(ChannelModel::RayleighLmmse { pilots: 1 }),
            other => Err(Error::Unsupported(format!("channel kind `{other}`"))),
        }
    }
}

/// Channel output together with the complex gain `∂y/∂x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmission {
    pub y: [f64; 2],
    pub gain: Complex64,
    pub h_hat: Complex64,
}

impl Transmission {
    /// Pulls `∂loss/∂y` back to `∂loss/∂x` (multiplication by `conj(gain)`).
    pub fn backward(&self, grad_y: [f64; 2]) -> [f64; 2] {
        let g = Complex64::new(grad_y[0], grad_y[1]) * self.gain.conj();
        [g.re, g.im]
    }
}

/// Test hooks for the fading channel.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RayleighHooks {
    /// Forces data and pilot noise to zero.
    pub zero_noise: bool,
    /// Uses `ĥ = h`.
    pub perfect_csi: bool,
    /// Fixes `h = 1` instead of drawing it.
    pub unit_gain: bool,
}

/// LMMSE estimator statistics for `P` unit pilots at linear SNR `ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmmseStats {
    /// `ĥ = weight · mean(y_p)`.
    pub weight: f64,
    /// `Var(ĥ) = Pρ/(Pρ+1)`.
    pub estimate_variance: f64,
    /// `Var(h − ĥ) = 1/(Pρ+1)`.
    pub error_variance: f64,
}

pub fn lmmse_stats(snr: SnrPoint, pilots: usize) -> LmmseStats {
    let prho = pilots as f64 * snr.snr_linear;
    let weight = 1.0 / (1.0 + prho.recip());
    LmmseStats {
        weight,
        estimate_variance: weight,
        error_variance: 1.0 / (prho + 1.0),
    }
}

fn complex_normal<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// `y = x + n`, `n ~ CN(0, 1/snr)`.
pub fn awgn_transmit<R: Rng + ?Sized>(x: [f64; 2], snr: SnrPoint, rng: &mut R) -> [f64; 2] {
    if snr.is_noiseless() {
        return x;
    }
    let n = complex_normal(snr.noise_variance(), rng);
    [x[0] + n.re, x[1] + n.im]
}

const MAX_PILOT_REDRAWS: usize = 64;

/// One fading realization: pilot-based LMMSE estimate, data transmission and
/// zero-forcing equalization `y_eq = y / ĥ`.
pub fn rayleigh_lmmse_transmit<R: Rng + ?Sized>(
    x: [f64; 2],
    snr: SnrPoint,
    pilots: usize,
    hooks: RayleighHooks,
    rng: &mut R,
) -> Result<Transmission> {
    if pilots == 0 {
        return Err(Error::InvalidArgument(
            "at least one pilot is required".into(),
        ));
    }
    let sigma2 = if hooks.zero_noise {
        0.0
    } else {
        snr.noise_variance()
    };
    let stats = lmmse_stats(snr, pilots);
    let h = if hooks.unit_gain {
        Complex64::new(1.0, 0.0)
    } else {
        complex_normal(1.0, rng)
    };
    let mut attempts = 0;
    let h_hat = loop {
        let h_hat = if hooks.perfect_csi {
            h
        } else {
            (h + complex_normal(sigma2 / pilots as f64, rng)) * stats.weight
        };
        if h_hat.norm() >= 1e-12 {
            break h_hat;
        }
        attempts += 1;
        log::debug!("channel estimate |ĥ| < 1e-12, redrawing pilot noise");
        if attempts >= MAX_PILOT_REDRAWS || hooks.perfect_csi {
            return Err(Error::DegenerateInput(format!(
                "channel estimate vanished after {attempts} redraws at {} dB",
                snr.snr_db
            )));
        }
    };
    let n = complex_normal(sigma2, rng);
    let xc = Complex64::new(x[0], x[1]);
    let y_eq = (h * xc + n) / h_hat;
    Ok(Transmission {
        y: [y_eq.re, y_eq.im],
        gain: h / h_hat,
        h_hat,
    })
}

impl ChannelModel {
    pub fn transmit<R: Rng + ?Sized>(
        &self,
        x: [f64; 2],
        snr: SnrPoint,
        rng: &mut R,
    ) -> Result<Transmission> {
        match *self {
            ChannelModel::Awgn => Ok(Transmission {
                y: awgn_transmit(x, snr, rng),
                gain: Complex64::new(1.0, 0.0),
                h_hat: Complex64::new(1.0, 0.0),
            }),
            ChannelModel::RayleighLmmse { pilots } => {
                rayleigh_lmmse_transmit(x, snr, pilots, RayleighHooks::default(), rng)
            }
        }
    }

    /// Natural-log density of the observed output `y` given input `x`. For the
    /// fading channel this is the equalized output with the fading and the
    /// estimate marginalized out, since the receiver sees only `y_eq`.
    pub fn log_density(&self, y: [f64; 2], x: [f64; 2], snr: SnrPoint) -> f64 {
        let dr = y[0] - x[0];
        let di = y[1] - x[1];
        let r2 = dr * dr + di * di;
        let sigma2 = snr.noise_variance();
        match *self {
            ChannelModel::Awgn => -(PI * sigma2).ln() - r2 / sigma2,
            ChannelModel::RayleighLmmse { pilots } => {
                let stats = lmmse_stats(snr, pilots);
                let g = stats.estimate_variance;
                let v = stats.error_variance * (x[0] * x[0] + x[1] * x[1]) + sigma2;
                (g * v / PI).ln() - 2.0 * (g * r2 + v).ln()
            }
        }
    }
}

/// `log2(1 + snr)`.
pub fn capacity_awgn(snr: SnrPoint) -> f64 {
    snr.snr_linear.ln_1p() / std::f64::consts::LN_2
}

pub const MIN_CAPACITY_SAMPLES: usize = 100_000;

/// Monte Carlo estimate of `E[log2(1 + |ĥ|²/(σ_e² + σ²))]`, the Gaussian-input
/// rate of the LMMSE-equalized fading channel with residual estimation error
/// treated as noise.
pub fn capacity_rayleigh_lower_bound<R: Rng + ?Sized>(
    snr: SnrPoint,
    pilots: usize,
    mc_samples: usize,
    hooks: RayleighHooks,
    rng: &mut R,
) -> Result<f64> {
    if mc_samples < MIN_CAPACITY_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "capacity bound needs at least {MIN_CAPACITY_SAMPLES} samples, got {mc_samples}"
        )));
    }
    if pilots == 0 {
        return Err(Error::InvalidArgument(
            "at least one pilot is required".into(),
        ));
    }
    let stats = lmmse_stats(snr, pilots);
    let sigma2 = if hooks.zero_noise {
        0.0
    } else {
        snr.noise_variance()
    };
    let err_var = if hooks.perfect_csi {
        0.0
    } else {
        stats.error_variance
    };
    let mut acc = 0.0;
    for _ in 0..mc_samples {
        let h = if hooks.unit_gain {
            Complex64::new(1.0, 0.0)
        } else {
            complex_normal(1.0, rng)
        };
        let h_hat = if hooks.perfect_csi {
            h
        } else {
            (h + complex_normal(sigma2 / pilots as f64, rng)) * stats.weight
        };
        let denom = err_var + sigma2;
        let rate = if denom == 0.0 {
            f64::INFINITY
        } else {
            (h_hat.norm_sqr() / denom).ln_1p()
        };
        acc += rate;
    }
    Ok(acc / mc_samples as f64 / std::f64::consts::LN_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noise_power(snr_db: f64, draws: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let snr = SnrPoint::from_db(snr_db);
        (0..draws)
            .map(|_| {
                let y = awgn_transmit([0.0, 0.0], snr, &mut rng);
                y[0] * y[0] + y[1] * y[1]
            })
            .sum::<f64>()
            / draws as f64
    }

    #[test]
    fn noiseless_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            awgn_transmit([0.3, -0.7], SnrPoint::noiseless(), &mut rng),
            [0.3, -0.7]
        );
    }

    #[test]
    fn noise_calibration() {
        assert!((noise_power(0.0, 1_000_000) - 1.0).abs() < 0.005);
        assert!((noise_power(10.0, 1_000_000) - 0.1).abs() < 0.001);
    }

    #[test]
    fn reproducible_given_seed() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let ch = ChannelModel::RayleighLmmse { pilots: 1 };
            (0..100)
                .map(|_| {
                    ch.transmit([1.0, 0.0], SnrPoint::from_db(3.0), &mut rng)
                        .unwrap()
                        .y
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn closed_form_capacities() {
        assert!((capacity_awgn(SnrPoint::from_db(0.0)) - 1.0).abs() < 1e-12);
        assert!((capacity_awgn(SnrPoint::from_db(15.0)) - 5.0278).abs() < 1e-4);
    }

    #[test]
    fn zero_noise_hook_scales_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let snr = SnrPoint::from_db(0.0);
        let hooks = RayleighHooks {
            zero_noise: true,
            ..Default::default()
        };
        let t = rayleigh_lmmse_transmit([0.6, 0.8], snr, 1, hooks, &mut rng).unwrap();
        // ρ = 1 ⇒ ĥ = h/2 and y_eq = 2x
        assert!((t.y[0] - 1.2).abs() < 1e-12 && (t.y[1] - 1.6).abs() < 1e-12);
        assert!((t.gain - Complex64::new(2.0, 0.0)).norm() < 1e-12);
        let t = rayleigh_lmmse_transmit([0.6, 0.8], SnrPoint::from_db(120.0), 1, hooks, &mut rng)
            .unwrap();
        assert!((t.y[0] - 0.6).abs() < 1e-9 && (t.y[1] - 0.8).abs() < 1e-9);
    }

    #[test]
    fn estimate_has_zero_prior_mean_at_low_snr() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let snr = SnrPoint::from_db(-30.0);
        let n = 200_000;
        let mut mean = Complex64::new(0.0, 0.0);
        for _ in 0..n {
            mean += rayleigh_lmmse_transmit([1.0, 0.0], snr, 1, RayleighHooks::default(), &mut rng)
                .unwrap()
                .h_hat;
        }
        mean /= n as f64;
        // Var(ĥ) ≈ 1e-3 ⇒ std of the mean ≈ 7e-5
        assert!(mean.norm() < 5e-4, "{mean}");
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let snr = SnrPoint::from_db(7.0);
        let ch = ChannelModel::RayleighLmmse { pilots: 1 };
        let x = [0.4, -0.3];
        let t = ch
            .transmit(x, snr, &mut ChaCha8Rng::seed_from_u64(21))
            .unwrap();
        let h = 1e-6;
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let yp = ch
                .transmit(xp, snr, &mut ChaCha8Rng::seed_from_u64(21))
                .unwrap()
                .y;
            let ym = ch
                .transmit(xm, snr, &mut ChaCha8Rng::seed_from_u64(21))
                .unwrap()
                .y;
            for j in 0..2 {
                let fd = (yp[j] - ym[j]) / (2.0 * h);
                let mut e = [0.0; 2];
                e[j] = 1.0;
                let an = t.backward(e)[k];
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "{fd} vs {an}");
            }
        }
        let a = ChannelModel::Awgn
            .transmit(x, snr, &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
        assert_eq!(a.backward([0.25, -2.0]), [0.25, -2.0]);
    }

    #[test]
    fn rayleigh_density_integrates_to_one() {
        let ch = ChannelModel::RayleighLmmse { pilots: 2 };
        let snr = SnrPoint::from_db(5.0);
        let x = [0.5, 0.5];
        // polar integration around x; the tail decays like r⁻⁴
        let (nr, nt, rmax) = (40_000, 64, 2000.0_f64);
        let mut total = 0.0;
        for i in 0..nr {
            // log-spaced radii
            let a = (1e-6f64).ln();
            let b = rmax.ln();
            let t0 = a + (b - a) * i as f64 / nr as f64;
            let t1 = a + (b - a) * (i + 1) as f64 / nr as f64;
            let r = (0.5 * (t0 + t1)).exp();
            let dr = t1.exp() - t0.exp();
            let mut ring = 0.0;
            for k in 0..nt {
                let th = 2.0 * PI * k as f64 / nt as f64;
                let y = [x[0] + r * th.cos(), x[1] + r * th.sin()];
                ring += ch.log_density(y, x, snr).exp();
            }
            total += ring / nt as f64 * 2.0 * PI * r * dr;
        }
        assert!((total - 1.0).abs() < 2e-3, "{total}");
    }

    #[test]
    fn config_round_trip() {
        let ch: ChannelModel = serde_json::from_str(r#"{"kind":"rayleigh_lmmse"}"#).unwrap();
        assert_eq!(ch, ChannelModel::RayleighLmmse { pilots: 1 });
        let a: ChannelModel = serde_json::from_str(r#"{"kind":"awgn"}"#).unwrap();
        assert_eq!(a, ChannelModel::Awgn);
        assert_eq!("rayleigh".parse::<ChannelModel>().unwrap(), ch);
        assert!("ricean".parse::<ChannelModel>().is_err());
    }
}
