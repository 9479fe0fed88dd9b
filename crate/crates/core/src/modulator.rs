//! Constellation geometry: energy normalization, QAM grids, and
//! Maxwell-Boltzmann probabilistic shaping.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor2;
use crate::channel::SnrPoint;
use crate::error::{Error, Result};
use crate::objectives::mi_oracle_quadrature;
use crate::sampler::{GumbelSample, SymbolDistribution, straight_through_select};

/// `N` complex points stored as an `N×2` matrix of (re, im) rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    pub points: Tensor2,
    pub trainable: bool,
}

impl Constellation {
    pub fn new(points: Tensor2) -> Result<Self> {
        if points.cols() != 2 {
            return Err(Error::dim("Constellation", "2 columns", points.cols()));
        }
        if !points.is_finite() {
            return Err(Error::DegenerateInput(
                "non-finite constellation point".into(),
            ));
        }
        Ok(Self {
            points,
            trainable: false,
        })
    }

    pub fn from_complex(points: &[Complex64]) -> Result<Self> {
        let rows: Vec<[f64; 2]> = points.iter().map(|z| [z.re, z.im]).collect();
        Self::new(Tensor2::from_rows(&rows)?)
    }

    pub fn order(&self) -> usize {
        self.points.rows()
    }

    pub fn point(&self, i: usize) -> Complex64 {
        let r = self.points.row(i);
        Complex64::new(r[0], r[1])
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        (0..self.order()).map(|i| self.point(i)).collect()
    }

    /// `Σ_s p(s)·|x_s|²`.
    pub fn mean_energy(&self, dist: &SymbolDistribution) -> f64 {
        mean_energy(&self.points, dist.probs())
    }

    /// Multiplies every point by `e^{iφ}`.
    pub fn rotated(&self, phase: f64) -> Self {
        let rot = Complex64::from_polar(1.0, phase);
        let pts: Vec<Complex64> = self.to_complex().into_iter().map(|z| z * rot).collect();
        Self {
            trainable: self.trainable,
            ..Self::from_complex(&pts).expect("finite rotation")
        }
    }

    /// Smallest pairwise Euclidean distance.
    pub fn min_distance(&self) -> f64 {
        let pts = self.to_complex();
        let mut best = f64::INFINITY;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                best = best.min((pts[i] - pts[j]).norm());
            }
        }
        best
    }
}

fn mean_energy(points: &Tensor2, probs: &[f64]) -> f64 {
    (0..points.rows())
        .map(|s| {
            let r = points.row(s);
            probs[s] * (r[0] * r[0] + r[1] * r[1])
        })
        .sum()
}

fn check_order(points: &Tensor2, dist: &SymbolDistribution) -> Result<()> {
    if points.cols() != 2 || points.rows() != dist.len() {
        return Err(Error::dim(
            "normalize",
            format!("({}, 2)", dist.len()),
            format!("{:?}", points.shape()),
        ));
    }
    Ok(())
}

/// Scales `points` so that `Σ_s p(s)·|x_s|² = 1`.
pub fn normalize(points: &Tensor2, dist: &SymbolDistribution) -> Result<Constellation> {
    check_order(points, dist)?;
    let energy = mean_energy(points, dist.probs());
    if !(energy > 0.0) || !energy.is_finite() {
        return Err(Error::DegenerateInput(format!(
            "expected energy {energy} cannot be normalized"
        )));
    }
    let mut out = points.clone();
    out.scale(energy.sqrt().recip());
    Constellation::new(out)
}

/// Gradients of [`normalize`] with respect to its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizeGrad {
    pub points: Tensor2,
    pub probs: Vec<f64>,
}

/// Backward pass of [`normalize`] given `∂loss/∂normalized_points`.
pub fn normalize_backward(
    points: &Tensor2,
    dist: &SymbolDistribution,
    grad_normalized: &Tensor2,
) -> Result<NormalizeGrad> {
    check_order(points, dist)?;
    if grad_normalized.shape() != points.shape() {
        return Err(Error::dim(
            "normalize_backward",
            format!("{:?}", points.shape()),
            format!("{:?}", grad_normalized.shape()),
        ));
    }
    let probs = dist.probs();
    let energy = mean_energy(points, probs);
    if !(energy > 0.0) {
        return Err(Error::DegenerateInput("zero expected energy".into()));
    }
    let scale = energy.sqrt().recip();
    let d_scale: f64 = points
        .data()
        .iter()
        .zip(grad_normalized.data())
        .map(|(p, g)| p * g)
        .sum();
    let d_energy = d_scale * (-0.5 * scale / energy);
    let mut grad_points = grad_normalized.clone();
    grad_points.scale(scale);
    let mut grad_probs = vec![0.0; probs.len()];
    for s in 0..points.rows() {
        let r = points.row(s);
        let gp = grad_points.row_mut(s);
        gp[0] += d_energy * 2.0 * probs[s] * r[0];
        gp[1] += d_energy * 2.0 * probs[s] * r[1];
        grad_probs[s] = d_energy * (r[0] * r[0] + r[1] * r[1]);
    }
    Ok(NormalizeGrad {
        points: grad_points,
        probs: grad_probs,
    })
}

/// Odd-integer levels `m−1, m−3, …, −(m−1)` in descending order.
fn qam_levels(side: usize) -> Vec<f64> {
    (0..side)
        .map(|i| (side as f64 - 1.0) - 2.0 * i as f64)
        .collect()
}

/// Unnormalized square grid with odd-integer levels. Symbol `i·m + q` has
/// in-phase level `i` and quadrature level `q`.
pub fn qam_grid(order: usize) -> Result<Tensor2> {
    if ![4usize, 16, 64, 256, 1024].contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    let side = (order as f64).sqrt().round() as usize;
    let levels = qam_levels(side);
    let mut rows = Vec::with_capacity(order);
    for &re in &levels {
        for &im in &levels {
            rows.push([re, im]);
        }
    }
    Tensor2::from_rows(&rows)
}

/// Square QAM normalized to unit energy under the uniform distribution.
pub fn qam(order: usize) -> Result<Constellation> {
    normalize(&qam_grid(order)?, &SymbolDistribution::uniform(order))
}

/// `p_s ∝ exp(−ν·|x_s|²)` over the given (not re-normalized) geometry.
pub fn maxwell_boltzmann_distribution(base: &Constellation, nu: f64) -> Result<SymbolDistribution> {
    if !(nu >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "nu must be nonnegative, got {nu}"
        )));
    }
    let logits: Vec<f64> = (0..base.order())
        .map(|s| -nu * base.point(s).norm_sqr())
        .collect();
    Ok(SymbolDistribution::from_logits(&logits))
}

/// A fixed geometry shaped by a Maxwell-Boltzmann distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxwellBoltzmannShaping {
    pub nu: f64,
    pub base: Constellation,
}

impl MaxwellBoltzmannShaping {
    pub fn distribution(&self) -> Result<SymbolDistribution> {
        maxwell_boltzmann_distribution(&self.base, self.nu)
    }

    /// The base geometry re-normalized under the shaped distribution.
    pub fn constellation(&self) -> Result<Constellation> {
        normalize(&self.base.points, &self.distribution()?)
    }

    pub fn mutual_information(&self, snr: SnrPoint) -> Result<f64> {
        mi_oracle_quadrature(&self.constellation()?, &self.distribution()?, snr)
    }

    /// Golden-section search for the `ν ∈ [lo, hi]` maximizing the AWGN
    /// mutual information at `snr`. Returns the shaping and its MI.
    pub fn optimize(
        base: &Constellation,
        snr: SnrPoint,
        lo: f64,
        hi: f64,
        tol: f64,
    ) -> Result<(Self, f64)> {
        let eval = |nu: f64| -> Result<f64> {
            Self {
                nu,
                base: base.clone(),
            }
            .mutual_information(snr)
        };
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (lo, hi);
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut fc = eval(c)?;
        let mut fd = eval(d)?;
        while b - a > tol {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = eval(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = eval(d)?;
            }
        }
        // the interior optimum may sit on the boundary (e.g. ν = 0 at high SNR)
        let mut best = (0.5 * (a + b), eval(0.5 * (a + b))?);
        for nu in [lo, hi] {
            let v = eval(nu)?;
            if v > best.1 {
                best = (nu, v);
            }
        }
        Ok((
            Self {
                nu: best.0,
                base: base.clone(),
            },
            best.1,
        ))
    }
}

/// Maps a sampled symbol to its point (exact row forward).
pub fn modulate(sample: &GumbelSample, c: &Constellation) -> Result<[f64; 2]> {
    if sample.symbol_index >= c.order() {
        return Err(Error::dim(
            "modulate index",
            format!("< {}", c.order()),
            sample.symbol_index,
        ));
    }
    straight_through_select(sample, &c.points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn qpsk_is_already_unit_energy() {
        let c = qam(4).unwrap();
        let again = normalize(&c.points, &SymbolDistribution::uniform(4)).unwrap();
        for (a, b) in c.points.data().iter().zip(again.points.data()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((c.point(0).re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((c.point(0).im - FRAC_1_SQRT_2).abs() < 1e-15);
        for z in c.to_complex() {
            assert!((z.re.abs() - FRAC_1_SQRT_2).abs() < 1e-15);
            assert!((z.im.abs() - FRAC_1_SQRT_2).abs() < 1e-15);
        }
    }

    #[test]
    fn normalization_is_scale_invariant_and_idempotent() {
        let grid = qam_grid(16).unwrap();
        let d = SymbolDistribution::uniform(16);
        let mut scaled = grid.clone();
        scaled.scale(3.0);
        let a = normalize(&grid, &d).unwrap();
        let b = normalize(&scaled, &d).unwrap();
        let c = normalize(&a.points, &d).unwrap();
        for ((x, y), z) in a
            .points
            .data()
            .iter()
            .zip(b.points.data())
            .zip(c.points.data())
        {
            assert!((x - y).abs() < 1e-12);
            assert!((x - z).abs() < 1e-12);
        }
        // mean energy of {±1,±3}² is 10
        assert!((a.points.get(0, 0) - 3.0 / 10f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sixteen_qam_min_distance() {
        let c = qam(16).unwrap();
        assert_eq!(c.order(), 16);
        assert!((c.min_distance() - 2.0 / 10f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn unsupported_orders() {
        for n in [2, 8, 32, 36, 2048] {
            assert!(matches!(qam(n), Err(Error::UnsupportedOrder(_))));
        }
    }

    #[test]
    fn zero_energy_is_degenerate() {
        let pts = Tensor2::zeros(4, 2);
        assert!(matches!(
            normalize(&pts, &SymbolDistribution::uniform(4)),
            Err(Error::DegenerateInput(_))
        ));
        // energy only on a zero-probability point
        let mut pts = Tensor2::zeros(2, 2);
        pts.set(1, 0, 1.0);
        let d = SymbolDistribution::new(vec![1.0, 0.0]).unwrap();
        assert!(normalize(&pts, &d).is_err());
    }

    #[test]
    fn maxwell_boltzmann_limits() {
        let base = qam(16).unwrap();
        let d0 = maxwell_boltzmann_distribution(&base, 0.0).unwrap();
        assert!(d0.probs().iter().all(|&p| (p - 1.0 / 16.0).abs() < 1e-15));
        let d = maxwell_boltzmann_distribution(&base, 1e6).unwrap();
        let inner: Vec<usize> = (0..16)
            .filter(|&s| (base.point(s).norm_sqr() - 0.2).abs() < 1e-9)
            .collect();
        assert_eq!(inner.len(), 4);
        for s in 0..16 {
            let expect = if inner.contains(&s) { 0.25 } else { 0.0 };
            assert!((d.probs()[s] - expect).abs() < 1e-12);
        }
        assert!(maxwell_boltzmann_distribution(&base, -1.0).is_err());
    }

    #[test]
    fn one_hot_rows_reproduce_points() {
        let c = qam(16).unwrap();
        for s in 0..16 {
            let x = modulate(&GumbelSample::exact(16, s), &c).unwrap();
            assert_eq!(x, [c.points.get(s, 0), c.points.get(s, 1)]);
        }
        let bad = GumbelSample::exact(17, 16);
        assert!(modulate(&bad, &c).is_err());
    }
}
