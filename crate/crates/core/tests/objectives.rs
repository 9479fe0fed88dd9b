use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shaping_core::autodiff::Tensor2;
use shaping_core::channel::{ChannelModel, SnrPoint};
use shaping_core::demodulator::{DemodNetwork, ExactPosterior, Posterior, UniformPosterior};
use shaping_core::modulator::{MaxwellBoltzmannShaping, qam};
use shaping_core::objectives::{
    corrected_loss, cross_entropy_monte_carlo, decomposition_check, mean_kl_to_oracle,
    mi_oracle_monte_carlo, mi_oracle_quadrature,
};
use shaping_core::sampler::SymbolDistribution;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn qpsk_at_zero_db_matches_a_long_monte_carlo_run() {
    let c = qam(4).unwrap();
    let d = SymbolDistribution::uniform(4);
    let snr = SnrPoint::from_db(0.0);
    let quad = mi_oracle_quadrature(&c, &d, snr).unwrap();
    let mc =
        mi_oracle_monte_carlo(&c, &d, ChannelModel::Awgn, snr, 10_000_000, &mut rng(1)).unwrap();
    assert!((quad - mc.bits).abs() < 0.005, "{quad} vs {mc:?}");
}

#[test]
fn monte_carlo_agrees_with_quadrature_within_three_sigma() {
    let c = qam(16).unwrap();
    let d = SymbolDistribution::uniform(16);
    let snr = SnrPoint::from_db(7.0);
    let quad = mi_oracle_quadrature(&c, &d, snr).unwrap();
    let mc =
        mi_oracle_monte_carlo(&c, &d, ChannelModel::Awgn, snr, 1_000_000, &mut rng(2)).unwrap();
    assert!(
        (quad - mc.bits).abs() < 3.0 * mc.std_error,
        "{quad} vs {mc:?}"
    );
}

#[test]
fn monte_carlo_error_shrinks_like_root_n_and_is_reproducible() {
    let c = qam(16).unwrap();
    let d = SymbolDistribution::uniform(16);
    let snr = SnrPoint::from_db(5.0);
    let run = |n, seed| {
        mi_oracle_monte_carlo(&c, &d, ChannelModel::Awgn, snr, n, &mut rng(seed)).unwrap()
    };
    let a = run(200_000, 3);
    let b = run(400_000, 4);
    let ratio = b.std_error / a.std_error;
    let expected = std::f64::consts::FRAC_1_SQRT_2;
    assert!((ratio / expected - 1.0).abs() < 0.2, "ratio {ratio}");
    assert_eq!(run(200_000, 3), a);
    assert!(mi_oracle_monte_carlo(&c, &d, ChannelModel::Awgn, snr, 10, &mut rng(0)).is_err());
}

#[test]
fn noiseless_exact_posterior_recovers_the_source_entropy() {
    let mb = MaxwellBoltzmannShaping {
        nu: 0.5,
        base: qam(16).unwrap(),
    };
    let c = mb.constellation().unwrap();
    let d = mb.distribution().unwrap();
    let oracle = ExactPosterior::awgn(c.clone(), d.clone()).unwrap();
    let symbols: Vec<usize> = (0..16).collect();
    let ys: Vec<[f64; 2]> = symbols
        .iter()
        .map(|&s| [c.points.get(s, 0), c.points.get(s, 1)])
        .collect();
    let post = oracle.posteriors(&ys, SnrPoint::noiseless()).unwrap();
    let b = corrected_loss(&symbols, &post, &d).unwrap();
    assert_eq!(b.cross_entropy_bits, 0.0);
    assert_eq!(b.mi_lower_bound_bits, d.entropy_bits());
}

#[test]
fn decomposition_with_the_exact_posterior_has_no_kl() {
    let c = qam(16).unwrap();
    let d = SymbolDistribution::uniform(16);
    let exact = ExactPosterior::awgn(c.clone(), d.clone()).unwrap();
    let snr = SnrPoint::from_db(6.0);
    let kl = mean_kl_to_oracle(
        &c,
        &d,
        &exact,
        ChannelModel::Awgn,
        snr,
        100_000,
        &mut rng(5),
    )
    .unwrap();
    assert!(kl.bits.abs() < 1e-12, "{kl:?}");
    let r = decomposition_check(&c, &d, &exact, snr, 400_000, &mut rng(6)).unwrap();
    assert!(r.residual_bits < 3.0 * r.combined_std_error, "{r:?}");
}

#[test]
fn decomposition_with_a_uniform_demodulator() {
    let mb = MaxwellBoltzmannShaping {
        nu: 0.3,
        base: qam(16).unwrap(),
    };
    let c = mb.constellation().unwrap();
    let d = mb.distribution().unwrap();
    let snr = SnrPoint::from_db(8.0);
    let u = UniformPosterior { order: 16 };
    let l = cross_entropy_monte_carlo(&c, &d, &u, ChannelModel::Awgn, snr, 100_000, &mut rng(7))
        .unwrap();
    assert!((l.bits - 4.0).abs() < 1e-9);
    let r = decomposition_check(&c, &d, &u, snr, 1_000_000, &mut rng(8)).unwrap();
    // KL then equals log2 N − H(S|Y).
    let h_s_given_y = r.entropy_bits - r.mi_bits;
    assert!((r.kl.bits - (4.0 - h_s_given_y)).abs() < 3.0 * r.kl.std_error + 1e-9);
    assert!(r.residual_bits < 3.0 * r.combined_std_error, "{r:?}");
}

#[test]
fn decomposition_with_a_random_demodulator_on_qpsk() {
    let mut r0 = rng(9);
    let demod = DemodNetwork::new(4, &mut r0);
    let r = decomposition_check(
        &qam(4).unwrap(),
        &SymbolDistribution::uniform(4),
        &demod,
        SnrPoint::from_db(5.0),
        1_000_000,
        &mut r0,
    )
    .unwrap();
    assert!(r.residual_bits < 3.0 * r.combined_std_error, "{r:?}");
    assert!(r.kl.bits > 0.1);
}

#[test]
fn one_hot_and_uniform_posteriors_bracket_the_loss() {
    let targets = [0usize, 3, 1];
    let mut onehot = Tensor2::zeros(3, 4);
    for (i, &s) in targets.iter().enumerate() {
        onehot.set(i, s, 1.0);
    }
    let d = SymbolDistribution::uniform(4);
    let b = corrected_loss(&targets, &onehot, &d).unwrap();
    assert_eq!(b.cross_entropy_bits, 0.0);
    assert_eq!(b.corrected_loss_bits, -2.0);
    let b = corrected_loss(&targets, &Tensor2::filled(3, 4, 0.25), &d).unwrap();
    assert_eq!((b.cross_entropy_bits, b.corrected_loss_bits), (2.0, 0.0));
}
