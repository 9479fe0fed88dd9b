use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shaping_core::autodiff::Tensor2;
use shaping_core::baselines::mb_qam_optimum;
use shaping_core::channel::{ChannelModel, SnrPoint, capacity_awgn};
use shaping_core::demodulator::{DemodNetwork, ExactPosterior, UniformPosterior};
use shaping_core::modulator::{Constellation, normalize, qam};
use shaping_core::objectives::{
    mi_lower_bound_monte_carlo, mi_oracle_monte_carlo, mi_oracle_quadrature,
};
use shaping_core::sampler::SymbolDistribution;

fn pair(order: usize, coords: &[f64], logits: &[f64]) -> (Constellation, SymbolDistribution) {
    let dist = SymbolDistribution::from_logits(&logits[..order]);
    let pts = Tensor2::from_vec(order, 2, coords[..2 * order].to_vec()).unwrap();
    (normalize(&pts, &dist).unwrap(), dist)
}

fn pair_strategy() -> impl Strategy<Value = (Constellation, SymbolDistribution)> {
    (
        prop::sample::select(vec![2usize, 4, 16]),
        prop::collection::vec(-2.0f64..2.0, 32),
        prop::collection::vec(-3.0f64..3.0, 16),
    )
        .prop_map(|(n, coords, logits)| pair(n, &coords, &logits))
}

#[test]
fn sixty_four_qam_saturates_at_high_snr() {
    let c = qam(64).unwrap();
    let mi = mi_oracle_quadrature(
        &c,
        &SymbolDistribution::uniform(64),
        SnrPoint::from_db(40.0),
    )
    .unwrap();
    assert!((mi - 6.0).abs() < 1e-6, "{mi}");
}

#[test]
fn mi_is_rotation_invariant() {
    let c = qam(16).unwrap();
    let d = SymbolDistribution::uniform(16);
    for db in [0.0, 9.0, 18.0] {
        let snr = SnrPoint::from_db(db);
        let base = mi_oracle_quadrature(&c, &d, snr).unwrap();
        for phase in [0.1, 0.7, 2.0] {
            let r = mi_oracle_quadrature(&c.rotated(phase), &d, snr).unwrap();
            assert!(
                (r - base).abs() < 1e-6,
                "{db} dB, φ = {phase}: {r} vs {base}"
            );
        }
    }
}

#[test]
fn quadrature_and_monte_carlo_agree_on_shaped_inputs() {
    let (mb, _) = mb_qam_optimum(16, 9.0).unwrap();
    let c = mb.constellation().unwrap();
    let d = mb.distribution().unwrap();
    let snr = SnrPoint::from_db(9.0);
    let quad = mi_oracle_quadrature(&c, &d, snr).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mc = mi_oracle_monte_carlo(&c, &d, ChannelModel::Awgn, snr, 1_000_000, &mut rng).unwrap();
    assert!(
        (quad - mc.bits).abs() < 4.0 * mc.std_error + 1e-3,
        "{quad} vs {mc:?}"
    );
}

#[test]
fn maxwell_boltzmann_optimum_is_reproducible_and_beats_uniform() {
    let (a, mi_a) = mb_qam_optimum(16, 9.0).unwrap();
    let (b, mi_b) = mb_qam_optimum(16, 9.0).unwrap();
    assert_eq!(a.nu.to_bits(), b.nu.to_bits());
    assert_eq!(mi_a.to_bits(), mi_b.to_bits());
    let uniform = mi_oracle_quadrature(
        &qam(16).unwrap(),
        &SymbolDistribution::uniform(16),
        SnrPoint::from_db(9.0),
    )
    .unwrap();
    assert!(a.nu > 0.0);
    assert!(mi_a > uniform + 0.05, "{mi_a} vs {uniform}");
}

#[test]
fn exact_posterior_attains_the_bound_and_uniform_gives_nothing() {
    let c = qam(16).unwrap();
    let d = SymbolDistribution::uniform(16);
    let snr = SnrPoint::from_db(7.0);
    let mi = mi_oracle_quadrature(&c, &d, snr).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let exact = ExactPosterior::awgn(c.clone(), d.clone()).unwrap();
    let b = mi_lower_bound_monte_carlo(&c, &d, &exact, ChannelModel::Awgn, snr, 400_000, &mut rng)
        .unwrap();
    assert!(
        (b.bits - mi).abs() < 4.0 * b.std_error + 1e-3,
        "{b:?} vs {mi}"
    );
    let u = mi_lower_bound_monte_carlo(
        &c,
        &d,
        &UniformPosterior { order: 16 },
        ChannelModel::Awgn,
        snr,
        100_000,
        &mut rng,
    )
    .unwrap();
    assert!(u.bits.abs() < 1e-9, "{u:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn entropy_is_bounded(logits in prop::collection::vec(-30.0f64..30.0, 2..64)) {
        let d = SymbolDistribution::from_logits(&logits);
        let h = d.entropy_bits();
        prop_assert!(h >= -1e-12);
        prop_assert!(h <= (logits.len() as f64).log2() + 1e-12);
    }

    #[test]
    fn mi_is_bounded_by_entropy_and_capacity((c, d) in pair_strategy(), db in -10.0f64..35.0) {
        let snr = SnrPoint::from_db(db);
        let mi = mi_oracle_quadrature(&c, &d, snr).unwrap();
        prop_assert!(mi >= -1e-9, "{}", mi);
        prop_assert!(mi <= d.entropy_bits() + 1e-6, "{} > H = {}", mi, d.entropy_bits());
        prop_assert!(mi <= capacity_awgn(snr) + 1e-6, "{} > C = {}", mi, capacity_awgn(snr));
    }

    #[test]
    fn mi_increases_with_snr((c, d) in pair_strategy(), lo in -10.0f64..30.0, step in 0.5f64..10.0) {
        let a = mi_oracle_quadrature(&c, &d, SnrPoint::from_db(lo)).unwrap();
        let b = mi_oracle_quadrature(&c, &d, SnrPoint::from_db(lo + step)).unwrap();
        prop_assert!(b >= a - 1e-7, "{} dB: {}, {} dB: {}", lo, a, lo + step, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn any_demodulator_gives_a_lower_bound((c, d) in pair_strategy(), db in -5.0f64..20.0, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let demod = DemodNetwork::with_hidden(c.order(), 16, &mut rng);
        let snr = SnrPoint::from_db(db);
        let mi = mi_oracle_quadrature(&c, &d, snr).unwrap();
        let b = mi_lower_bound_monte_carlo(&c, &d, &demod, ChannelModel::Awgn, snr, 100_000, &mut rng).unwrap();
        prop_assert!(b.bits <= mi + 3.0 * b.std_error, "bound {:?} above MI {}", b, mi);
    }
}
