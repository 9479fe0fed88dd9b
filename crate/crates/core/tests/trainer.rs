use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shaping_core::Error;
use shaping_core::channel::{ChannelModel, SnrPoint};
use shaping_core::modulator::qam;
use shaping_core::objectives::{mi_lower_bound_monte_carlo, mi_oracle_quadrature};
use shaping_core::sampler::SymbolDistribution;
use shaping_core::trainer::{
    Mode, Objective, ShapingSystem, TrainConfig, Trainer, forward_backward, train,
    train_with_uncorrected_loss,
};

fn small(mode: Mode, order: usize, steps: usize, seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::new(mode, order, steps, seed);
    cfg.batch_schedule = vec![(0, 64)];
    cfg.lr_schedule = vec![(0, 1e-3)];
    cfg.hidden_units = 32;
    cfg
}

fn bits(data: &[f64]) -> Vec<u64> {
    data.iter().map(|v| v.to_bits()).collect()
}

fn logits_bits(system: &ShapingSystem) -> Vec<Vec<u64>> {
    let mut s = system.clone();
    s.logits
        .params_mut()
        .map(|p| bits(p.value.data()))
        .collect()
}

#[test]
fn ps_only_never_moves_the_geometry() {
    let mut t = Trainer::new(small(Mode::PsOnly, 16, 40, 1), Objective::Corrected).unwrap();
    let before = bits(t.system.points.value.data());
    let logits_before = logits_bits(&t.system);
    for _ in 0..40 {
        t.step().unwrap();
    }
    assert_eq!(bits(t.system.points.value.data()), before);
    assert_ne!(logits_bits(&t.system), logits_before);
}

#[test]
fn gs_only_never_moves_the_distribution() {
    let mut t = Trainer::new(small(Mode::GsOnly, 16, 40, 2), Objective::Corrected).unwrap();
    let before = logits_bits(&t.system);
    let points_before = bits(t.system.points.value.data());
    for _ in 0..40 {
        t.step().unwrap();
    }
    assert_eq!(logits_bits(&t.system), before);
    assert_ne!(bits(t.system.points.value.data()), points_before);
    let d = t.system.distribution(10.0).unwrap();
    assert_eq!(d.probs(), SymbolDistribution::uniform(16).probs());
}

#[test]
fn gs_only_gradients_ignore_the_entropy_term() {
    let cfg = small(Mode::GsOnly, 16, 10, 3);
    let t = Trainer::new(cfg.clone(), Objective::Corrected).unwrap();
    let grads = |objective| {
        let mut system = t.system.clone();
        system.zero_grad();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        forward_backward(&mut system, &cfg, 256, objective, 0, &mut rng).unwrap();
        system
            .trainable_params()
            .into_iter()
            .map(|p| p.grad.data().to_vec())
            .collect::<Vec<_>>()
    };
    let corrected = grads(Objective::Corrected);
    let plain = grads(Objective::Uncorrected);
    assert_eq!(corrected.len(), plain.len());
    let mut nonzero = 0;
    for (a, b) in corrected.iter().zip(&plain) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
            nonzero += usize::from(*x != 0.0);
        }
    }
    assert!(nonzero > 0);
}

#[test]
fn training_is_deterministic_per_seed() {
    let cfg = small(Mode::Joint, 16, 30, 4);
    let a = train(&cfg).unwrap();
    let b = train(&cfg).unwrap();
    assert!(a.same_outcome(&b));
    let a_curve: Vec<_> = a.loss_curve.iter().map(|r| r.loss_bits.to_bits()).collect();
    let b_curve: Vec<_> = b.loss_curve.iter().map(|r| r.loss_bits.to_bits()).collect();
    assert_eq!(a_curve, b_curve);
    let mut other = cfg.clone();
    other.seed = 5;
    assert!(!train(&other).unwrap().same_outcome(&a));
}

#[test]
fn reports_round_trip_and_flag_controls() {
    let cfg = small(Mode::PsOnly, 16, 5, 6);
    let r = train(&cfg).unwrap();
    assert!(r.production);
    assert_eq!(r.loss_curve.len(), 5);
    for row in &r.loss_curve {
        assert_eq!(row.mi_bound_bits, row.entropy_bits - row.loss_bits);
    }
    let back: shaping_core::trainer::TrainReport =
        serde_json::from_str(&r.to_json().unwrap()).unwrap();
    assert!(back.same_outcome(&r));
    let restored = back.system().unwrap();
    assert_eq!(
        bits(restored.points.value.data()),
        bits(r.system().unwrap().points.value.data())
    );

    let control = train_with_uncorrected_loss(&cfg).unwrap();
    assert!(!control.production);
    assert_eq!(control.objective, Objective::Uncorrected);
}

#[test]
fn energy_constraint_holds_after_joint_training() {
    let r = train(&small(Mode::Joint, 16, 50, 7)).unwrap();
    let system = r.system().unwrap();
    for db in [-2.0, 5.0, 20.0, 40.0] {
        let c = system.constellation(db).unwrap();
        let d = system.distribution(db).unwrap();
        assert!((c.mean_energy(&d) - 1.0).abs() < 1e-12, "{db} dB");
    }
}

#[test]
fn non_finite_loss_aborts_with_a_dump() {
    let mut t = Trainer::new(small(Mode::Joint, 4, 10, 8), Objective::Corrected).unwrap();
    for p in t.system.demod.params_mut() {
        p.value.fill(f64::NAN);
    }
    match t.step() {
        Err(Error::NonFiniteLoss { step, dump }) => {
            assert_eq!(step, 0);
            assert!(dump.contains("snr="));
        }
        other => panic!("expected a non-finite loss error, got {other:?}"),
    }
}

#[test]
fn gs_only_four_points_learn_qpsk() {
    let mut cfg = TrainConfig::new(Mode::GsOnly, 4, 2000, 11);
    cfg.batch_schedule = vec![(0, 100), (500, 500), (1000, 1000), (1500, 2000)];
    cfg.lr_schedule = vec![(0, 1e-3), (1000, 3e-4), (1500, 1e-4)];
    cfg.hidden_units = 64;
    cfg.init_jitter = 0.2;
    let system = train(&cfg).unwrap().system().unwrap();
    let snr = SnrPoint::from_db(5.0);
    let learned = mi_oracle_quadrature(
        &system.constellation(5.0).unwrap(),
        &SymbolDistribution::uniform(4),
        snr,
    )
    .unwrap();
    let qpsk =
        mi_oracle_quadrature(&qam(4).unwrap(), &SymbolDistribution::uniform(4), snr).unwrap();
    assert!(
        (learned - qpsk).abs() < 0.01,
        "learned {learned} vs QPSK {qpsk}"
    );
}

#[test]
fn trained_binary_demodulator_bound_is_tight() {
    let mut cfg = TrainConfig::new(Mode::GsOnly, 2, 1500, 12);
    cfg.snr_range_db = [3.0, 3.0];
    cfg.batch_schedule = vec![(0, 200), (500, 1000)];
    cfg.lr_schedule = vec![(0, 1e-3), (1000, 1e-4)];
    cfg.hidden_units = 32;
    let system = train(&cfg).unwrap().system().unwrap();
    let c = system.constellation(3.0).unwrap();
    let d = SymbolDistribution::uniform(2);
    let snr = SnrPoint::from_db(3.0);
    let mi = mi_oracle_quadrature(&c, &d, snr).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let bound = mi_lower_bound_monte_carlo(
        &c,
        &d,
        &system.demod,
        ChannelModel::Awgn,
        snr,
        1_000_000,
        &mut rng,
    )
    .unwrap();
    assert!((mi - bound.bits).abs() < 0.01, "bound {bound:?} vs MI {mi}");
}
