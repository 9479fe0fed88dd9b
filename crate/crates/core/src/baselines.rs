//! Reference curves: unshaped QAM, Maxwell-Boltzmann shaped QAM, AWGN
//! capacity and the fading-channel capacity bound.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{
    ChannelModel, RayleighHooks, SnrPoint, capacity_awgn, capacity_rayleigh_lower_bound,
};
use crate::error::Result;
use crate::modulator::{MaxwellBoltzmannShaping, qam};
use crate::objectives::{MiCurve, mi_oracle_monte_carlo, mi_oracle_quadrature};
use crate::sampler::SymbolDistribution;

/// Search interval and tolerance for the Maxwell-Boltzmann parameter.
pub const MB_NU_RANGE: [f64; 2] = [0.0, 5.0];
pub const MB_NU_TOL: f64 = 1e-4;

fn point_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

/// Uniform QAM: quadrature on AWGN, Monte Carlo otherwise.
pub fn qam_curve(
    order: usize,
    grid: &[f64],
    channel: ChannelModel,
    mc_samples: usize,
    seed: u64,
) -> Result<MiCurve> {
    let c = qam(order)?;
    let d = SymbolDistribution::uniform(order);
    let mut entries = Vec::with_capacity(grid.len());
    for (k, &db) in grid.iter().enumerate() {
        let snr = SnrPoint::from_db(db);
        let mi = match channel {
            ChannelModel::Awgn => mi_oracle_quadrature(&c, &d, snr)?,
            ch => mi_oracle_monte_carlo(&c, &d, ch, snr, mc_samples, &mut point_rng(seed, k))?.bits,
        };
        entries.push((db, mi));
    }
    MiCurve::new(format!("qam{order}"), entries)
}

/// The best Maxwell-Boltzmann shaping of `N`-QAM at one SNR (AWGN).
pub fn mb_qam_optimum(order: usize, snr_db: f64) -> Result<(MaxwellBoltzmannShaping, f64)> {
    let base = qam(order)?;
    MaxwellBoltzmannShaping::optimize(
        &base,
        SnrPoint::from_db(snr_db),
        MB_NU_RANGE[0],
        MB_NU_RANGE[1],
        MB_NU_TOL,
    )
}

/// Maxwell-Boltzmann shaped QAM with `ν` searched per SNR point.
pub fn mb_qam_curve(order: usize, grid: &[f64]) -> Result<MiCurve> {
    let entries = grid
        .iter()
        .map(|&db| Ok((db, mb_qam_optimum(order, db)?.1)))
        .collect::<Result<Vec<_>>>()?;
    MiCurve::new(format!("mb_qam{order}"), entries)
}

pub fn capacity_curve(grid: &[f64]) -> Result<MiCurve> {
    MiCurve::new(
        "capacity",
        grid.iter()
            .map(|&db| (db, capacity_awgn(SnrPoint::from_db(db))))
            .collect(),
    )
}

pub fn rayleigh_bound_curve(
    grid: &[f64],
    pilots: usize,
    mc_samples: usize,
    seed: u64,
) -> Result<MiCurve> {
    let entries = grid
        .iter()
        .enumerate()
        .map(|(k, &db)| {
            let v = capacity_rayleigh_lower_bound(
                SnrPoint::from_db(db),
                pilots,
                mc_samples,
                RayleighHooks::default(),
                &mut point_rng(seed, k),
            )?;
            Ok((db, v))
        })
        .collect::<Result<Vec<_>>>()?;
    MiCurve::new("rayleigh_bound", entries)
}
