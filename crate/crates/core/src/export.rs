//! CSV export of constellations and distributions.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::modulator::Constellation;
use crate::sampler::SymbolDistribution;

#[derive(Serialize)]
struct PointRow {
    re: f64,
    im: f64,
    prob: f64,
}

#[derive(Serialize)]
struct ProbRow {
    symbol: usize,
    prob: f64,
}

/// One `re,im,prob` row per point.
pub fn write_constellation_csv(
    path: impl AsRef<Path>,
    c: &Constellation,
    dist: &SymbolDistribution,
) -> Result<()> {
    if c.order() != dist.len() {
        return Err(Error::dim("write_constellation_csv", c.order(), dist.len()));
    }
    let mut w = csv::Writer::from_path(path)?;
    for s in 0..c.order() {
        let z = c.point(s);
        w.serialize(PointRow {
            re: z.re,
            im: z.im,
            prob: dist.probs()[s],
        })?;
    }
    w.flush()?;
    Ok(())
}

/// One `symbol,prob` row per symbol.
pub fn write_distribution_csv(path: impl AsRef<Path>, dist: &SymbolDistribution) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (symbol, &prob) in dist.probs().iter().enumerate() {
        w.serialize(ProbRow { symbol, prob })?;
    }
    w.flush()?;
    Ok(())
}
