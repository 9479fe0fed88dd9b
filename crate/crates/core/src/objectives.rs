//! Cross-entropy, the entropy-corrected loss, and mutual-information oracles.
//!
//! Everything is computed in nats internally and converted to bits on output.

use std::f64::consts::{LN_2, PI};
use std::num::NonZeroUsize;
use std::path::Path;
use std::sync::OnceLock;

use gauss_quad::hermite::GaussHermite;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor2;
use crate::autodiff::ops::log_sum_exp;
use crate::channel::{ChannelModel, SnrPoint};
use crate::demodulator::{ExactPosterior, Posterior};
use crate::error::{Error, Result};
use crate::modulator::Constellation;
use crate::sampler::SymbolDistribution;

/// Posterior probabilities are clamped to this floor before taking logs.
pub const POSTERIOR_FLOOR: f64 = 1e-30;

/// Raises `p` to [`POSTERIOR_FLOOR`]; NaN passes through.
pub fn clamp_posterior(p: f64) -> f64 {
    if p < POSTERIOR_FLOOR {
        POSTERIOR_FLOOR
    } else {
        p
    }
}

/// Gauss–Hermite nodes per axis used by [`mi_oracle_quadrature`].
pub const QUADRATURE_NODES: usize = 128;

/// Smallest sample count accepted by the Monte Carlo estimators.
pub const MIN_MC_SAMPLES: usize = 100_000;

const MC_CHUNK: usize = 4096;

pub fn nats_to_bits(x: f64) -> f64 {
    x / LN_2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub cross_entropy_bits: f64,
    pub source_entropy_bits: f64,
    pub corrected_loss_bits: f64,
    pub mi_lower_bound_bits: f64,
}

impl LossBreakdown {
    pub fn new(cross_entropy_bits: f64, source_entropy_bits: f64) -> Self {
        let corrected_loss_bits = cross_entropy_bits - source_entropy_bits;
        Self {
            cross_entropy_bits,
            source_entropy_bits,
            corrected_loss_bits,
            mi_lower_bound_bits: -corrected_loss_bits,
        }
    }
}

/// Mean cross-entropy of a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossEntropy {
    pub bits: f64,
    /// Number of true-symbol probabilities that hit [`POSTERIOR_FLOOR`].
    pub clamped: usize,
}

/// Mean of `−log2 p̃(s|y)` over a batch of (true symbol, posterior row).
pub fn cross_entropy_loss(targets: &[usize], posteriors: &Tensor2) -> Result<CrossEntropy> {
    if targets.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if targets.len() != posteriors.rows() {
        return Err(Error::dim(
            "cross_entropy_loss",
            targets.len(),
            posteriors.rows(),
        ));
    }
    let mut clamped = 0;
    let mut acc = 0.0;
    for (i, &s) in targets.iter().enumerate() {
        if s >= posteriors.cols() {
            return Err(Error::dim(
                "cross_entropy_loss target",
                posteriors.cols(),
                s,
            ));
        }
        let p = posteriors.get(i, s);
        if p < POSTERIOR_FLOOR {
            clamped += 1;
        }
        acc -= clamp_posterior(p).ln();
    }
    if clamped > 0 {
        log::warn!("{clamped} posterior entries clamped at {POSTERIOR_FLOOR:e}");
    }
    Ok(CrossEntropy {
        bits: nats_to_bits(acc / targets.len() as f64),
        clamped,
    })
}

/// `L`, `H(S)`, `L̂ = L − H(S)` and the bound `−L̂` for one batch.
pub fn corrected_loss(
    targets: &[usize],
    posteriors: &Tensor2,
    dist: &SymbolDistribution,
) -> Result<LossBreakdown> {
    if dist.len() != posteriors.cols() {
        return Err(Error::dim("corrected_loss", dist.len(), posteriors.cols()));
    }
    let ce = cross_entropy_loss(targets, posteriors)?;
    Ok(LossBreakdown::new(ce.bits, dist.entropy_bits()))
}

/// Gradient of the batch-mean cross-entropy (nats) with respect to the
/// softmax logits that produced `posteriors`: `(p̃ − e_s)/B`.
pub fn cross_entropy_grad_logits(targets: &[usize], posteriors: &Tensor2) -> Result<Tensor2> {
    if targets.len() != posteriors.rows() {
        return Err(Error::dim(
            "cross_entropy_grad_logits",
            targets.len(),
            posteriors.rows(),
        ));
    }
    let mut g = posteriors.clone();
    let inv = 1.0 / targets.len() as f64;
    for (i, &s) in targets.iter().enumerate() {
        g.row_mut(i)[s] -= 1.0;
        g.row_mut(i).iter_mut().for_each(|v| *v *= inv);
    }
    Ok(g)
}

/// Entropy in nats of `softmax(logits)` and its gradient
/// `∂H/∂l_j = −p_j (ln p_j + H)`.
pub fn entropy_with_grad(logits: &[f64]) -> (f64, Vec<f64>) {
    let lse = log_sum_exp(logits);
    let logp: Vec<f64> = logits.iter().map(|l| l - lse).collect();
    let p: Vec<f64> = logp.iter().map(|v| v.exp()).collect();
    let h: f64 = -p
        .iter()
        .zip(&logp)
        .map(|(p, lp)| if *p > 0.0 { p * lp } else { 0.0 })
        .sum::<f64>();
    let grad = p
        .iter()
        .zip(&logp)
        .map(|(p, lp)| if *p > 0.0 { -p * (lp + h) } else { 0.0 })
        .collect();
    (h, grad)
}

/// A per-SNR mutual-information record for one scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiCurve {
    pub scheme: String,
    pub entries: Vec<(f64, f64)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CurveRow {
    snr: f64,
    mi: f64,
}

impl MiCurve {
    pub fn new(scheme: impl Into<String>, entries: Vec<(f64, f64)>) -> Result<Self> {
        for w in entries.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidArgument(format!(
                    "SNR grid must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some(&(snr, mi)) = entries
            .iter()
            .find(|(s, m)| !s.is_finite() || !m.is_finite() || *m < -1e-9)
        {
            return Err(Error::InvalidArgument(format!(
                "invalid MI {mi} at {snr} dB"
            )));
        }
        Ok(Self {
            scheme: scheme.into(),
            entries,
        })
    }

    /// Checks `mi ≤ log2 N` at every point.
    pub fn check_order(&self, order: usize) -> Result<()> {
        let cap = (order as f64).log2() + 1e-9;
        match self.entries.iter().find(|(_, mi)| *mi > cap) {
            Some((snr, mi)) => Err(Error::InvalidArgument(format!(
                "MI {mi} at {snr} dB exceeds log2({order})"
            ))),
            None => Ok(()),
        }
    }

    pub fn snrs(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.1).collect()
    }

    pub fn at(&self, snr_db: f64) -> Option<f64> {
        self.entries
            .iter()
            .find(|(s, _)| (s - snr_db).abs() < 1e-9)
            .map(|e| e.1)
    }

    /// Linear interpolation inside the grid; `None` outside.
    pub fn interpolate(&self, snr_db: f64) -> Option<f64> {
        let e = &self.entries;
        if e.is_empty() || snr_db < e[0].0 - 1e-12 || snr_db > e[e.len() - 1].0 + 1e-12 {
            return None;
        }
        if let Some(v) = self.at(snr_db) {
            return Some(v);
        }
        let k = e.iter().position(|(s, _)| *s > snr_db)?;
        let (s0, m0) = e[k - 1];
        let (s1, m1) = e[k];
        Some(m0 + (m1 - m0) * (snr_db - s0) / (s1 - s0))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for &(snr, mi) in &self.entries {
            w.serialize(CurveRow { snr, mi })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `snr,mi` rows; the scheme name is the file stem.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path)?;
        let mut entries = Vec::new();
        for row in r.deserialize() {
            let row: CurveRow = row?;
            entries.push((row.snr, row.mi));
        }
        let scheme = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::new(scheme, entries)
    }
}

/// Product-rule node `(t1, t2, w1·w2)`.
type Node2 = (f64, f64, f64);

/// Tensor-product Gauss–Hermite rule without the nodes whose weight is below
/// `NODE_WEIGHT_FLOOR`, sorted by radius.
fn hermite_rule_2d() -> &'static [Node2] {
    static RULE: OnceLock<Vec<Node2>> = OnceLock::new();
    RULE.get_or_init(|| {
        let rule = GaussHermite::new(NonZeroUsize::new(QUADRATURE_NODES).expect("nonzero"));
        let pairs = rule.as_node_weight_pairs();
        let mut nodes: Vec<Node2> = pairs
            .iter()
            .flat_map(|&(t1, w1)| pairs.iter().map(move |&(t2, w2)| (t1, t2, w1 * w2)))
            .filter(|n| n.2 > NODE_WEIGHT_FLOOR)
            .collect();
        nodes.sort_by(|a, b| (a.0.hypot(a.1)).total_cmp(&b.0.hypot(b.1)));
        nodes
    })
}

/// Nodes with a smaller product weight change the integral by less than
/// `1e-30` times the integrand.
const NODE_WEIGHT_FLOOR: f64 = 1e-30;

/// Exponents this far below the running maximum are dropped from the
/// log-sum-exp (their contribution is below `e^{-50}` relative).
const LSE_PRUNE: f64 = 50.0;

/// AWGN mutual information `I(X;Y)` in bits by 2-D Gauss–Hermite quadrature.
pub fn mi_oracle_quadrature(
    c: &Constellation,
    dist: &SymbolDistribution,
    snr: SnrPoint,
) -> Result<f64> {
    let n = c.order();
    if n != dist.len() {
        return Err(Error::dim("mi_oracle_quadrature", n, dist.len()));
    }
    if n > 1024 {
        return Err(Error::Unsupported(format!(
            "quadrature oracle limited to N ≤ 1024, got {n}"
        )));
    }
    if snr.is_noiseless() {
        return Ok(dist.entropy_bits());
    }
    let sigma = snr.noise_variance().sqrt();
    let inv_s2 = snr.snr_linear;
    let probs = dist.probs();
    let support: Vec<usize> = (0..n).filter(|&j| probs[j] > 0.0).collect();
    let pts: Vec<[f64; 2]> = support
        .iter()
        .map(|&j| [c.points.get(j, 0), c.points.get(j, 1)])
        .collect();
    let logp: Vec<f64> = support.iter().map(|&j| probs[j].ln()).collect();
    let logp_max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rule = hermite_rule_2d();
    let mut scores = Vec::with_capacity(support.len());
    let mut total = 0.0;
    for (k, &xs) in pts.iter().enumerate() {
        // Other points by distance from x_k, in units of σ.
        let mut near: Vec<(f64, usize)> = pts
            .iter()
            .enumerate()
            .map(|(j, x)| ((xs[0] - x[0]).hypot(xs[1] - x[1]) / sigma, j))
            .collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut inner = 0.0;
        for &(t1, t2, w) in rule {
            let r2 = t1 * t1 + t2 * t2;
            let r = r2.sqrt();
            // The x_k term alone bounds the maximum from below.
            let floor = logp[k] - r2 - LSE_PRUNE;
            let y = [xs[0] + sigma * t1, xs[1] + sigma * t2];
            scores.clear();
            let mut max = f64::NEG_INFINITY;
            for &(dist_k, j) in &near {
                let gap = (dist_k - r).max(0.0);
                if logp_max - gap * gap < floor {
                    break;
                }
                let d0 = y[0] - pts[j][0];
                let d1 = y[1] - pts[j][1];
                let v = logp[j] - (d0 * d0 + d1 * d1) * inv_s2;
                scores.push(v);
                max = max.max(v);
            }
            let cutoff = max - LSE_PRUNE;
            let sum: f64 = scores
                .iter()
                .filter(|&&v| v > cutoff)
                .map(|&v| (v - max).exp())
                .sum();
            let lse = max + sum.ln();
            inner += w * (-r2 - lse);
        }
        total += probs[support[k]] * inner / PI;
    }
    Ok(nats_to_bits(total).max(0.0))
}

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub bits: f64,
    pub std_error: f64,
}

#[derive(Default)]
struct Moments {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    /// Mean and standard error, converted from nats to bits.
    fn estimate(&self) -> McEstimate {
        let n = self.n as f64;
        let mean = self.sum / n;
        let var = ((self.sum_sq / n - mean * mean) * n / (n - 1.0)).max(0.0);
        McEstimate {
            bits: nats_to_bits(mean),
            std_error: nats_to_bits((var / n).sqrt()),
        }
    }
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "Monte Carlo estimate needs at least {MIN_MC_SAMPLES} samples, got {samples}"
        )));
    }
    Ok(())
}

fn check_pair(c: &Constellation, dist: &SymbolDistribution) -> Result<()> {
    if c.order() != dist.len() {
        return Err(Error::dim(
            "constellation/distribution",
            c.order(),
            dist.len(),
        ));
    }
    Ok(())
}

/// Draws `(symbol, received sample)` pairs in chunks and hands each chunk to `f`.
fn for_each_chunk<R, F>(
    c: &Constellation,
    dist: &SymbolDistribution,
    channel: ChannelModel,
    snr: SnrPoint,
    samples: usize,
    rng: &mut R,
    mut f: F,
) -> Result<()>
where
    R: Rng + ?Sized,
    F: FnMut(&[usize], &[[f64; 2]]) -> Result<()>,
{
    let sampler = WeightedIndex::new(dist.probs())
        .map_err(|e| Error::DegenerateInput(format!("symbol distribution: {e}")))?;
    let mut symbols = Vec::with_capacity(MC_CHUNK);
    let mut ys = Vec::with_capacity(MC_CHUNK);
    let mut left = samples;
    while left > 0 {
        let m = left.min(MC_CHUNK);
        symbols.clear();
        ys.clear();
        for _ in 0..m {
            let s = sampler.sample(rng);
            let r = c.points.row(s);
            ys.push(channel.transmit([r[0], r[1]], snr, rng)?.y);
            symbols.push(s);
        }
        f(&symbols, &ys)?;
        left -= m;
    }
    Ok(())
}

/// Monte Carlo estimate of `I(X;Y)` using the channel's output density.
pub fn mi_oracle_monte_carlo<R: Rng + ?Sized>(
    c: &Constellation,
    dist: &SymbolDistribution,
    channel: ChannelModel,
    snr: SnrPoint,
    samples: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    check_samples(samples)?;
    check_pair(c, dist)?;
    if snr.is_noiseless() {
        return Err(Error::Unsupported("Monte Carlo MI needs finite SNR".into()));
    }
    let oracle = ExactPosterior::new(c.clone(), dist.clone(), channel)?;
    let probs = dist.probs();
    let mut scores = vec![0.0; c.order()];
    let mut m = Moments::default();
    for_each_chunk(c, dist, channel, snr, samples, rng, |symbols, ys| {
        for (&s, &y) in symbols.iter().zip(ys) {
            oracle.log_joint_into(y, snr, &mut scores);
            // log p(y|x_s) − log p(y) = log p(s, y) − log p(s) − log p(y)
            m.push(scores[s] - probs[s].ln() - log_sum_exp(&scores));
        }
        Ok(())
    })?;
    Ok(m.estimate())
}

/// Monte Carlo estimate of the cross-entropy `L = E[−log2 p̃(s|y)]`.
pub fn cross_entropy_monte_carlo<R: Rng + ?Sized>(
    c: &Constellation,
    dist: &SymbolDistribution,
    demod: &dyn Posterior,
    channel: ChannelModel,
    snr: SnrPoint,
    samples: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    check_samples(samples)?;
    check_pair(c, dist)?;
    if demod.order() != c.order() {
        return Err(Error::dim("demodulator order", c.order(), demod.order()));
    }
    let mut m = Moments::default();
    for_each_chunk(c, dist, channel, snr, samples, rng, |symbols, ys| {
        let post = demod.posteriors(ys, snr)?;
        for (i, &s) in symbols.iter().enumerate() {
            m.push(-clamp_posterior(post.get(i, s)).ln());
        }
        Ok(())
    })?;
    Ok(m.estimate())
}

/// Monte Carlo estimate of `E_y[D_KL(p(·|y) ‖ p̃(·|y))]` in bits against the
/// exact posterior of the channel.
pub fn mean_kl_to_oracle<R: Rng + ?Sized>(
    c: &Constellation,
    dist: &SymbolDistribution,
    demod: &dyn Posterior,
    channel: ChannelModel,
    snr: SnrPoint,
    samples: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    check_samples(samples)?;
    check_pair(c, dist)?;
    if demod.order() != c.order() {
        return Err(Error::dim("demodulator order", c.order(), demod.order()));
    }
    let oracle = ExactPosterior::new(c.clone(), dist.clone(), channel)?;
    let mut m = Moments::default();
    for_each_chunk(c, dist, channel, snr, samples, rng, |_, ys| {
        let exact = oracle.posteriors(ys, snr)?;
        let approx = demod.posteriors(ys, snr)?;
        for i in 0..ys.len() {
            let kl: f64 = exact
                .row(i)
                .iter()
                .zip(approx.row(i))
                .filter(|(p, _)| **p > 0.0)
                .map(|(p, q)| p * (p.ln() - clamp_posterior(*q).ln()))
                .sum();
            m.push(kl);
        }
        Ok(())
    })?;
    Ok(m.estimate())
}

/// Monte Carlo estimate of the bound `−L̂ = H(S) − L`.
pub fn mi_lower_bound_monte_carlo<R: Rng + ?Sized>(
    c: &Constellation,
    dist: &SymbolDistribution,
    demod: &dyn Posterior,
    channel: ChannelModel,
    snr: SnrPoint,
    samples: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    let l = cross_entropy_monte_carlo(c, dist, demod, channel, snr, samples, rng)?;
    Ok(McEstimate {
        bits: dist.entropy_bits() - l.bits,
        std_error: l.std_error,
    })
}

/// The terms of `L = H(S) − I(X;Y) + E_y[D_KL]`, each estimated separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub cross_entropy: McEstimate,
    pub entropy_bits: f64,
    pub mi_bits: f64,
    pub kl: McEstimate,
    pub residual_bits: f64,
    pub combined_std_error: f64,
}

/// Estimates `L` and the KL term on independent random streams, `H(S)` in
/// closed form and `I(X;Y)` by quadrature, and returns `|L − (H − I + KL)|`.
pub fn decomposition_check<R: Rng + ?Sized>(
    c: &Constellation,
    dist: &SymbolDistribution,
    demod: &dyn Posterior,
    snr: SnrPoint,
    samples: usize,
    rng: &mut R,
) -> Result<Decomposition> {
    let mut l_rng = ChaCha8Rng::seed_from_u64(rng.r#gen());
    let mut kl_rng = ChaCha8Rng::seed_from_u64(rng.r#gen());
    let ch = ChannelModel::Awgn;
    let cross_entropy = cross_entropy_monte_carlo(c, dist, demod, ch, snr, samples, &mut l_rng)?;
    let kl = mean_kl_to_oracle(c, dist, demod, ch, snr, samples, &mut kl_rng)?;
    let entropy_bits = dist.entropy_bits();
    let mi_bits = mi_oracle_quadrature(c, dist, snr)?;
    let residual_bits = (cross_entropy.bits - (entropy_bits - mi_bits + kl.bits)).abs();
    Ok(Decomposition {
        cross_entropy,
        entropy_bits,
        mi_bits,
        kl,
        residual_bits,
        combined_std_error: cross_entropy.std_error.hypot(kl.std_error),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modulator::qam;

    #[test]
    fn cross_entropy_extremes() {
        let mut one_hot = Tensor2::zeros(3, 4);
        let targets = [0, 3, 2];
        for (i, &s) in targets.iter().enumerate() {
            one_hot.set(i, s, 1.0);
        }
        let ce = cross_entropy_loss(&targets, &one_hot).unwrap();
        assert_eq!(ce.bits, 0.0);
        assert_eq!(ce.clamped, 0);
        let uniform = Tensor2::filled(3, 16, 1.0 / 16.0);
        let ce = cross_entropy_loss(&[1, 9, 15], &uniform).unwrap();
        assert!((ce.bits - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_probability_is_clamped_and_counted() {
        let p = Tensor2::from_rows(&[[1.0, 0.0]]).unwrap();
        let ce = cross_entropy_loss(&[1], &p).unwrap();
        assert_eq!(ce.clamped, 1);
        assert!((ce.bits - nats_to_bits(-(1e-30f64).ln())).abs() < 1e-9);
        assert!(cross_entropy_loss(&[], &Tensor2::zeros(0, 2)).is_err());
    }

    #[test]
    fn breakdown_identities() {
        let uniform = Tensor2::filled(2, 16, 1.0 / 16.0);
        let b = corrected_loss(&[0, 5], &uniform, &SymbolDistribution::uniform(16)).unwrap();
        assert!((b.cross_entropy_bits - 4.0).abs() < 1e-12);
        assert!((b.source_entropy_bits - 4.0).abs() < 1e-12);
        assert!(b.corrected_loss_bits.abs() < 1e-12);
        let d = SymbolDistribution::new(vec![0.5, 0.25, 0.125, 0.125]).unwrap();
        let p = Tensor2::from_rows(&[[0.1, 0.2, 0.3, 0.4], [0.7, 0.1, 0.1, 0.1]]).unwrap();
        let b = corrected_loss(&[2, 0], &p, &d).unwrap();
        assert_eq!(
            b.corrected_loss_bits,
            b.cross_entropy_bits - b.source_entropy_bits
        );
        assert_eq!(b.mi_lower_bound_bits, -b.corrected_loss_bits);
    }

    #[test]
    fn quadrature_saturation_and_trivial_cases() {
        let qpsk = qam(4).unwrap();
        let mi = mi_oracle_quadrature(
            &qpsk,
            &SymbolDistribution::uniform(4),
            SnrPoint::from_db(40.0),
        )
        .unwrap();
        assert!((mi - 2.0).abs() < 1e-4, "{mi}");
        let single = Constellation::from_complex(&[num_complex::Complex64::new(1.0, 0.0)]).unwrap();
        let mi = mi_oracle_quadrature(
            &single,
            &SymbolDistribution::uniform(1),
            SnrPoint::from_db(3.0),
        )
        .unwrap();
        assert!(mi.abs() < 1e-12);
    }

    #[test]
    fn quadrature_matches_reference_values() {
        // uniform 16-QAM, reference values from an independent high-order integration
        let c = qam(16).unwrap();
        let d = SymbolDistribution::uniform(16);
        for (db, expect) in [(0.0, 0.9897), (5.0, 1.9732), (9.0, 2.9269), (13.0, 3.7371)] {
            let mi = mi_oracle_quadrature(&c, &d, SnrPoint::from_db(db)).unwrap();
            assert!((mi - expect).abs() < 1e-3, "{db} dB: {mi} vs {expect}");
        }
    }

    #[test]
    fn entropy_gradient_matches_finite_differences() {
        let logits = [0.3, -1.2, 2.0, 0.0, 0.7];
        let (_, g) = entropy_with_grad(&logits);
        let h = 1e-6;
        for j in 0..logits.len() {
            let mut lp = logits;
            let mut lm = logits;
            lp[j] += h;
            lm[j] -= h;
            let fd = (entropy_with_grad(&lp).0 - entropy_with_grad(&lm).0) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-8, "{fd} vs {}", g[j]);
        }
    }

    #[test]
    fn curve_validation_and_interpolation() {
        assert!(MiCurve::new("x", vec![(1.0, 0.5), (1.0, 0.6)]).is_err());
        assert!(MiCurve::new("x", vec![(1.0, -0.5)]).is_err());
        let c = MiCurve::new("x", vec![(0.0, 1.0), (10.0, 3.0)]).unwrap();
        assert_eq!(c.interpolate(5.0), Some(2.0));
        assert_eq!(c.interpolate(11.0), None);
        assert!(c.check_order(4).is_err());
        assert!(c.check_order(8).is_ok());
    }
}
