use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toxscore_core::evaluation::ranking_accuracy;
use toxscore_core::{ComparisonPair, PairCorpus};

/// Pairs over numeric texts where the larger number is the more toxic.
fn synthetic_pairs(n: usize, seed: u64) -> PairCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PairCorpus::new(
        (0..n)
            .map(|i| {
                let a: u32 = rng.random_range(0..1_000_000);
                let b = a + rng.random_range(1..1000);
                ComparisonPair {
                    worker: format!("w{}", i % 17),
                    less_toxic: a.to_string(),
                    more_toxic: b.to_string(),
                }
            })
            .collect(),
    )
}

fn oracle(t: &str) -> f64 {
    t.parse().unwrap()
}

#[test]
fn oracle_inverse_constant() {
    let pairs = synthetic_pairs(2_000, 1);
    assert_eq!(ranking_accuracy(oracle, &pairs).unwrap().accuracy, 1.0);
    assert_eq!(ranking_accuracy(|t| -oracle(t), &pairs).unwrap().accuracy, 0.0);
    let r = ranking_accuracy(|_| 0.42, &pairs).unwrap();
    assert_eq!((r.accuracy, r.n_ties), (0.5, 2_000));
}

#[test]
fn seeded_random_scorer_is_near_half() {
    let pairs = synthetic_pairs(10_000, 2);
    // hash-like but fixed per text so the scorer is a function
    let scorer = |t: &str| {
        let mut rng = ChaCha8Rng::seed_from_u64(oracle(t) as u64 ^ 0x9e37_79b9);
        rng.random::<f64>()
    };
    let acc = ranking_accuracy(scorer, &pairs).unwrap().accuracy;
    assert!((acc - 0.5).abs() <= 0.02, "{acc}");
}

proptest! {
    #[test]
    fn strictly_monotone_transform_invariant(a in 0.1f64..5.0, b in -3.0f64..3.0, c in 0.01f64..2.0, seed in 0u64..1000) {
        let pairs = synthetic_pairs(300, seed);
        let base = |t: &str| ((oracle(t) * 7.3) % 1000.0) / 1000.0;
        let f = |t: &str| a * (c * base(t)).exp() + b;
        let r0 = ranking_accuracy(base, &pairs).unwrap();
        let r1 = ranking_accuracy(f, &pairs).unwrap();
        prop_assert_eq!(r0, r1);
    }
}
