use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toxscore_core::models::MlpModel;
use toxscore_core::SparseVector;

fn batch_loss(m: &MlpModel, xs: &[SparseVector], ys: &[f64]) -> f64 {
    let b = xs.len() as f64;
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (m.predict(x).unwrap() - y).powi(2))
        .sum::<f64>()
        / (2.0 * b)
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..5 {
        let mut model = MlpModel::init(4, 6, seed, 0.3);
        // spread hidden biases so no unit sits on the ReLU kink
        for b in &mut model.hidden_bias {
            *b = rng.random_range(-0.5..0.5);
        }
        let xs: Vec<SparseVector> = (0..5)
            .map(|_| SparseVector::from_entries((0..4).map(|j| (j, rng.random_range(-1.0..1.0)))))
            .collect();
        let ys: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..1.0)).collect();

        let (loss, grad) = model.loss_and_gradient(&xs, &ys);
        assert!((loss - batch_loss(&model, &xs, &ys)).abs() < 1e-14);
        let analytic = grad.flatten();
        let params = model.parameters();
        let h = 1e-5;
        for i in 0..params.len() {
            let mut p = params.clone();
            p[i] += h;
            model.set_parameters(&p);
            let up = batch_loss(&model, &xs, &ys);
            p[i] -= 2.0 * h;
            model.set_parameters(&p);
            let down = batch_loss(&model, &xs, &ys);
            model.set_parameters(&params);
            let numeric = (up - down) / (2.0 * h);
            let scale = analytic[i].abs().max(numeric.abs());
            let rel = if scale < 1e-10 { 0.0 } else { (analytic[i] - numeric).abs() / scale };
            assert!(rel <= 1e-4, "seed {seed} param {i}: analytic {} numeric {numeric}", analytic[i]);
        }
    }
}
