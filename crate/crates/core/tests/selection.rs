use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use complexnn::mlp::{MlpParams, TrainConfig, TrainingPair, Transfer};
use complexnn::rng::seeded;
use complexnn::selection::{select_hidden_units, PenaltyKind, PenaltySpec};

fn two_unit_data(seed: u64, n: usize) -> Vec<TrainingPair> {
    let truth = MlpParams::new(vec![vec![1.5, -1.0], vec![-0.5, 2.0]], vec![0.3, -0.2], vec![1.0, -0.8], 0.1, Transfer::Tanh).unwrap();
    let mut rng = seeded(seed);
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let e: f64 = StandardNormal.sample(&mut rng);
            let y = truth.forward(&x).unwrap() + 0.1 * e;
            TrainingPair::new(x, y)
        })
        .collect()
}

#[test]
fn log_penalty_scales_training_error_only() {
    // a_n = E_n ln(n)/n leaves T_n ordered exactly like E_n
    let pairs = two_unit_data(1, 300);
    let cfg = TrainConfig {
        restarts: 2,
        max_iters: 200,
        ..Default::default()
    };
    let sel = select_hidden_units(&pairs, 3, PenaltySpec::default(), &cfg, 1).unwrap();
    let factor = 1.0 + (300f64).ln() / 300.0;
    for row in &sel.trace.rows {
        assert!((row.score - factor * row.training_error).abs() <= 1e-12 * row.score);
    }
}

#[test]
fn per_parameter_penalty_recovers_two_units() {
    let penalty = PenaltySpec::new(PenaltyKind::Custom("perParameterLog", complexnn::selection::per_parameter_log), 1.0).unwrap();
    let mut chosen = Vec::new();
    for trial in 0..5 {
        let pairs = two_unit_data(2000 + trial, 1000);
        let sel = select_hidden_units(&pairs, 5, penalty, &TrainConfig::default(), trial).unwrap();
        chosen.push(sel.trace.chosen_k);
    }
    println!("chosen {chosen:?}");
    assert!(chosen.iter().filter(|&&k| k == 2).count() >= 4, "chosen {chosen:?}");
}
