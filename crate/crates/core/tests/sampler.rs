use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shaping_core::sampler::{SymbolDistribution, gumbel_softmax, gumbel_vector, sample_gumbel_max};

/// Pearson statistic of observed counts against `probs`.
fn chi_square(counts: &[usize], probs: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = p * n as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum()
}

fn skewed_logits(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| -0.15 * (k as f64) + 0.4 * ((k * 7 % 5) as f64))
        .collect()
}

// 99.9th percentile of χ² with 15 degrees of freedom.
const CHI2_15_999: f64 = 37.70;

#[test]
fn gumbel_max_draws_follow_the_distribution() {
    let logits = skewed_logits(16);
    let d = SymbolDistribution::from_logits(&logits);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut counts = vec![0; 16];
    for _ in 0..200_000 {
        counts[sample_gumbel_max(&d, &mut rng)] += 1;
    }
    let chi2 = chi_square(&counts, d.probs());
    assert!(chi2 < CHI2_15_999, "χ² = {chi2}");
}

#[test]
fn relaxed_sample_selects_with_the_same_law_at_any_temperature() {
    let logits = skewed_logits(16);
    let d = SymbolDistribution::from_logits(&logits);
    for tau in [0.1, 1.0, 10.0] {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let mut counts = vec![0; 16];
        for _ in 0..100_000 {
            let g = gumbel_vector(16, &mut rng);
            let s = gumbel_softmax(&logits, &g, tau).unwrap();
            assert_eq!(s.hard_onehot[s.symbol_index], 1.0);
            assert!((s.soft.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            counts[s.symbol_index] += 1;
        }
        let chi2 = chi_square(&counts, d.probs());
        assert!(chi2 < CHI2_15_999, "τ = {tau}: χ² = {chi2}");
    }
}

#[test]
fn relaxed_sample_sharpens_as_temperature_drops() {
    let logits = skewed_logits(8);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = gumbel_vector(8, &mut rng);
    let peak = |tau| {
        let s = gumbel_softmax(&logits, &g, tau).unwrap();
        s.soft[s.symbol_index]
    };
    assert!(peak(0.01) > 0.99);
    assert!(peak(0.01) > peak(1.0));
    assert!(peak(1.0) > peak(100.0));
    assert!(peak(1e4) < 0.13);
}
