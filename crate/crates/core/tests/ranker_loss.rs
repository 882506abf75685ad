use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toxscore_core::models::{margin_rank_loss, train_ranker_on_vectors, TrainParams};
use toxscore_core::SparseVector;

#[test]
fn analytic_cases_bit_exact() {
    assert_eq!(margin_rank_loss(1.0, 2.0, 0.5).to_bits(), 0.0f64.to_bits());
    assert_eq!(margin_rank_loss(2.0, 1.0, 0.5).to_bits(), 1.5f64.to_bits());
    assert_eq!(margin_rank_loss(3.0, 3.0, 0.5).to_bits(), 0.5f64.to_bits());
}

/// 50 pairs separable by a hidden direction `u`: the more toxic side always
/// has a larger projection.
fn separable_pairs(seed: u64) -> Vec<(SparseVector, SparseVector)> {
    let dim = 20;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut pairs = Vec::new();
    while pairs.len() < 50 {
        let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pa: f64 = a.iter().zip(&u).map(|(x, y)| x * y).sum();
        let pb: f64 = b.iter().zip(&u).map(|(x, y)| x * y).sum();
        if (pa - pb).abs() < 0.2 {
            continue;
        }
        let to_sv = |v: &[f64]| SparseVector::from_entries(v.iter().enumerate().map(|(j, &x)| (j as u32, x)));
        let (less, more) = if pa < pb { (a, b) } else { (b, a) };
        pairs.push((to_sv(&less), to_sv(&more)));
    }
    pairs
}

#[test]
fn separable_pairs_reach_near_zero_loss() {
    let pairs = separable_pairs(5);
    let params = TrainParams {
        epochs: 200,
        learning_rate: 0.05,
        ..TrainParams::default()
    };
    let (_, report) = train_ranker_on_vectors(&pairs, 20, &params).unwrap();
    assert!(report.final_loss < 1e-3, "final loss {}", report.final_loss);
}
