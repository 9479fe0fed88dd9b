//! Fast invariant suite: gradient checks, sampler law, oracle cross-check and
//! the cross-entropy decomposition.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autodiff::{Activation, DenseLayer, Tensor2, ops};
use crate::channel::{SnrPoint, awgn_transmit};
use crate::demodulator::{DemodNetwork, ExactPosterior};
use crate::error::Result;
use crate::modulator::{normalize, normalize_backward, qam};
use crate::objectives::{
    cross_entropy_grad_logits, decomposition_check, entropy_with_grad, mi_oracle_quadrature,
    nats_to_bits,
};
use crate::sampler::{
    SymbolDistribution, gumbel_softmax, gumbel_softmax_backward, gumbel_vector, sample_gumbel_max,
};

/// Deliberate defects used to confirm that the checks can fail.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Faults {
    /// Negates analytic gradients before comparison.
    pub flip_backward_sign: bool,
    /// Multiplies the simulated noise variance.
    pub noise_variance_scale: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

/// Worst relative error between an analytic gradient and central differences
/// of `f` at `x`, with the denominator floored at 1.
pub fn finite_difference_error(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x: &[f64],
    analytic: &[f64],
    h: f64,
) -> f64 {
    let mut worst = 0.0f64;
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        let fd = (fp - fm) / (2.0 * h);
        let err = (fd - analytic[i]).abs() / fd.abs().max(analytic[i].abs()).max(1.0);
        worst = worst.max(err);
    }
    worst
}

const FD_STEP: f64 = 1e-5;
const FD_TOL: f64 = 1e-4;
const FD_POINTS: usize = 10;

fn signed(g: Vec<f64>, faults: &Faults) -> Vec<f64> {
    if faults.flip_backward_sign {
        g.into_iter().map(|v| -v).collect()
    } else {
        g
    }
}

fn random_vec<R: Rng>(n: usize, scale: f64, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect()
}

/// Largest finite-difference error over random points for each differentiable
/// operation.
pub fn gradient_errors(seed: u64, faults: &Faults) -> Result<Vec<(&'static str, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    // dense layer with a smooth activation
    let mut worst = 0.0f64;
    for _ in 0..FD_POINTS {
        let mut layer = DenseLayer::glorot(3, 4, Activation::Softmax, &mut rng);
        let x = random_vec(3, 1.0, &mut rng);
        let w = random_vec(4, 1.0, &mut rng);
        let input = Tensor2::from_vec(1, 3, x.clone())?;
        layer.forward(&input)?;
        let g = layer.backward(&Tensor2::from_vec(1, 4, w.clone())?)?;
        let probe = layer.clone();
        let mut f = |v: &[f64]| {
            let y = probe
                .infer(&Tensor2::from_vec(1, 3, v.to_vec()).expect("shape"))
                .expect("fwd");
            y.data().iter().zip(&w).map(|(a, b)| a * b).sum()
        };
        let an = signed(g.into_vec(), faults);
        worst = worst.max(finite_difference_error(&mut f, &x, &an, FD_STEP));
    }
    out.push(("dense layer", worst));

    // softmax
    let mut worst = 0.0f64;
    for _ in 0..FD_POINTS {
        let z = random_vec(6, 3.0, &mut rng);
        let w = random_vec(6, 1.0, &mut rng);
        let p = ops::softmax(&z);
        let mut g = vec![0.0; 6];
        ops::softmax_vjp(&p, &w, &mut g);
        let mut f = |v: &[f64]| ops::softmax(v).iter().zip(&w).map(|(a, b)| a * b).sum();
        worst = worst.max(finite_difference_error(
            &mut f,
            &z,
            &signed(g, faults),
            FD_STEP,
        ));
    }
    out.push(("softmax", worst));

    // Gumbel-Softmax relaxation
    let mut worst = 0.0f64;
    for _ in 0..FD_POINTS {
        let n = 8;
        let logits = random_vec(n, 2.0, &mut rng);
        let gumbels = gumbel_vector(n, &mut rng);
        let tau = rng.gen_range(0.1..20.0);
        let w = random_vec(n, 1.0, &mut rng);
        let s = gumbel_softmax(&logits, &gumbels, tau)?;
        let g = gumbel_softmax_backward(&s, tau, &w);
        let mut f = |v: &[f64]| {
            let s = gumbel_softmax(v, &gumbels, tau).expect("valid tau");
            s.soft.iter().zip(&w).map(|(a, b)| a * b).sum()
        };
        worst = worst.max(finite_difference_error(
            &mut f,
            &logits,
            &signed(g, faults),
            FD_STEP,
        ));
    }
    out.push(("gumbel-softmax", worst));

    // energy normalization, jointly in the points and the probabilities
    let mut worst = 0.0f64;
    for _ in 0..FD_POINTS {
        let n = 6;
        let pts = random_vec(2 * n, 1.0, &mut rng);
        let logits = random_vec(n, 1.0, &mut rng);
        let w = random_vec(2 * n, 1.0, &mut rng);
        let dist = SymbolDistribution::from_logits(&logits);
        let grad = normalize_backward(
            &Tensor2::from_vec(n, 2, pts.clone())?,
            &dist,
            &Tensor2::from_vec(n, 2, w.clone())?,
        )?;
        let mut gl = vec![0.0; n];
        ops::softmax_vjp(dist.probs(), &grad.probs, &mut gl);
        let mut an = grad.points.into_vec();
        an.extend(gl);
        let mut x = pts.clone();
        x.extend(&logits);
        let mut f = |v: &[f64]| {
            let d = SymbolDistribution::from_logits(&v[2 * n..]);
            let p = Tensor2::from_vec(n, 2, v[..2 * n].to_vec()).expect("shape");
            let c = normalize(&p, &d).expect("nonzero energy");
            c.points.data().iter().zip(&w).map(|(a, b)| a * b).sum()
        };
        worst = worst.max(finite_difference_error(
            &mut f,
            &x,
            &signed(an, faults),
            FD_STEP,
        ));
    }
    out.push(("normalization", worst));

    // cross-entropy through the softmax, and the source entropy
    let mut worst = 0.0f64;
    for _ in 0..FD_POINTS {
        let n = 5;
        let z = random_vec(n, 2.0, &mut rng);
        let s = rng.gen_range(0..n);
        let p = Tensor2::from_vec(1, n, ops::softmax(&z))?;
        let g = cross_entropy_grad_logits(&[s], &p)?.into_vec();
        let mut f = |v: &[f64]| -ops::log_softmax(v)[s];
        worst = worst.max(finite_difference_error(
            &mut f,
            &z,
            &signed(g, faults),
            FD_STEP,
        ));
        let (_, gh) = entropy_with_grad(&z);
        let mut fh = |v: &[f64]| entropy_with_grad(v).0;
        worst = worst.max(finite_difference_error(
            &mut fh,
            &z,
            &signed(gh, faults),
            FD_STEP,
        ));
    }
    out.push(("losses", worst));
    Ok(out)
}

/// Total-variation distance between Gumbel-Max samples and a random target.
pub fn sampler_tv(order: usize, draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let logits = random_vec(order, 2.0, &mut rng);
    let dist = SymbolDistribution::from_logits(&logits);
    let mut counts = vec![0usize; order];
    for _ in 0..draws {
        counts[sample_gumbel_max(&dist, &mut rng)] += 1;
    }
    0.5 * counts
        .iter()
        .zip(dist.probs())
        .map(|(&c, p)| (c as f64 / draws as f64 - p).abs())
        .sum::<f64>()
}

/// Quadrature MI against a Monte Carlo estimate whose channel simulation may
/// carry an injected noise-variance error. Returns (quadrature, MC, std error).
pub fn oracle_cross_check(
    snr_db: f64,
    samples: usize,
    seed: u64,
    faults: &Faults,
) -> Result<(f64, f64, f64)> {
    let c = qam(4)?;
    let d = SymbolDistribution::uniform(4);
    let snr = SnrPoint::from_db(snr_db);
    let sim = match faults.noise_variance_scale {
        Some(k) => SnrPoint::from_db(snr_db - 10.0 * k.log10()),
        None => snr,
    };
    let quad = mi_oracle_quadrature(&c, &d, snr)?;
    let oracle = ExactPosterior::awgn(c.clone(), d.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scores = [0.0; 4];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let s = rng.gen_range(0..4);
        let y = awgn_transmit([c.points.get(s, 0), c.points.get(s, 1)], sim, &mut rng);
        oracle.log_joint_into(y, snr, &mut scores);
        let v = scores[s] - 0.25f64.ln() - ops::log_sum_exp(&scores);
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let se = ((sum_sq / n - mean * mean) / n).max(0.0).sqrt();
    Ok((quad, nats_to_bits(mean), nats_to_bits(se)))
}

fn timed(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    CheckResult {
        name: name.to_string(),
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Runs the whole suite.
pub fn run_checks(seed: u64, faults: &Faults) -> Vec<CheckResult> {
    let mut results = Vec::new();
    match gradient_errors(seed, faults) {
        Ok(errs) => {
            for (name, err) in errs {
                results.push(CheckResult {
                    name: format!("gradient: {name}"),
                    passed: err < FD_TOL,
                    detail: format!("max rel err {err:.2e} (tol {FD_TOL:.0e})"),
                    seconds: 0.0,
                });
            }
        }
        Err(e) => results.push(CheckResult {
            name: "gradient".into(),
            passed: false,
            detail: format!("error: {e}"),
            seconds: 0.0,
        }),
    }
    results.push(timed("sampler law (N=16, 1e5 draws)", || {
        let tv = sampler_tv(16, 100_000, seed);
        Ok((tv < 0.02, format!("TV {tv:.4} (tol 0.02)")))
    }));
    results.push(timed("oracle cross-check (QPSK, 5 dB)", || {
        let (quad, mc, se) = oracle_cross_check(5.0, 1_000_000, seed, faults)?;
        let tol = 4.0 * se + 1e-3;
        Ok((
            (quad - mc).abs() < tol,
            format!("quadrature {quad:.4}, MC {mc:.4} ± {se:.4}"),
        ))
    }));
    results.push(timed("decomposition identity (QPSK, 5 dB)", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let demod = DemodNetwork::with_hidden(4, 32, &mut rng);
        let r = decomposition_check(
            &qam(4)?,
            &SymbolDistribution::uniform(4),
            &demod,
            SnrPoint::from_db(5.0),
            200_000,
            &mut rng,
        )?;
        Ok((
            r.residual_bits < 4.0 * r.combined_std_error,
            format!(
                "residual {:.2e}, σ {:.2e}",
                r.residual_bits, r.combined_std_error
            ),
        ))
    }));
    results
}
