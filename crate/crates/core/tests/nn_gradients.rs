mod common;

use common::{fd_gradient, max_relative_error, random_net};
use grace_core::data::Normalizer;
use grace_core::model::Classifier;
use grace_core::nn::{train, Adam, NeuralNet, Samples, TrainConfig};
use grace_core::DifferentiableModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn class_gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let m = rng.random_range(1..=20);
        let dims = [
            m,
            rng.random_range(1..=30),
            rng.random_range(1..=30),
            rng.random_range(2..=5),
        ];
        let net = random_net(&dims, &mut rng);
        let x: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = rng.random_range(0..dims[3]);
        let analytic = net.class_gradient(&x, c).unwrap();
        let numeric = fd_gradient(|p| net.forward(p).unwrap()[c], &x, 1e-5);
        worst = worst.max(max_relative_error(&analytic, &numeric, 1e-8));
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn jacobian_rows_match_class_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let net = random_net(&[4, 6, 5, 3], &mut rng);
    let x = [0.3, -0.2, 0.9, 0.1];
    let (probs, grads) = net.jacobian(&x).unwrap();
    assert_eq!(probs, net.forward(&x).unwrap());
    for (c, g) in grads.iter().enumerate() {
        assert_eq!(g, &net.class_gradient(&x, c).unwrap());
    }
}

#[test]
fn classifier_gradients_are_in_raw_units() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let net = random_net(&[3, 8, 4, 2], &mut rng);
    let rows = vec![vec![0.0, 10.0, -5.0], vec![100.0, 20.0, 5.0]];
    let normalizer = Normalizer::fit(&rows).unwrap();
    let model = Classifier::new(
        net,
        normalizer,
        vec!["a".into(), "b".into()],
        vec!["p".into(), "q".into(), "r".into()],
    )
    .unwrap();
    let x = [37.0, 14.0, 1.5];
    for c in 0..2 {
        let analytic = model.class_gradient(&x, c).unwrap();
        let numeric = fd_gradient(|p| model.predict(p).unwrap()[c], &x, 1e-4);
        assert!(max_relative_error(&analytic, &numeric, 1e-10) < 1e-5);
    }
}

#[test]
fn small_adam_steps_reduce_batch_loss() {
    // A single step with a small learning rate follows the negative gradient
    // closely, so the batch loss should drop in nearly every trial.
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut failures = 0;
    for _ in 0..20 {
        let mut net = random_net(&[5, 8, 6, 3], &mut rng);
        let rows: Vec<Vec<f64>> = (0..32)
            .map(|_| (0..5).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let labels: Vec<usize> = (0..32).map(|_| rng.random_range(0..3)).collect();
        let batch: Vec<usize> = (0..32).collect();
        let (before, grads) = net.loss_and_gradients(&rows, &labels, &batch).unwrap();
        let mut adam = Adam::new(&net, 1e-4);
        adam.update(&mut net, &grads);
        let (after, _) = net.loss_and_gradients(&rows, &labels, &batch).unwrap();
        if after >= before {
            failures += 1;
        }
    }
    assert!(failures <= 2, "{failures} of 20 steps increased the loss");
}

fn separable_samples(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    while rows.len() < n {
        let x: [f64; 2] = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
        let margin = x[0] + x[1] - 1.0;
        if margin.abs() < 0.05 {
            continue;
        }
        labels.push(usize::from(margin > 0.0));
        rows.push(x.to_vec());
    }
    (rows, labels)
}

fn accuracy(net: &NeuralNet, rows: &[Vec<f64>], labels: &[usize]) -> f64 {
    let hits = rows
        .iter()
        .zip(labels)
        .filter(|(x, &y)| grace_core::argmax(&net.forward(x).unwrap()) == y)
        .count();
    hits as f64 / rows.len() as f64
}

#[test]
fn separable_toy_trains_to_high_validation_accuracy() {
    let (train_rows, train_labels) = separable_samples(400, 1);
    let (val_rows, val_labels) = separable_samples(100, 2);
    let config = TrainConfig {
        hidden_sizes: [8, 8],
        batch_size: 32,
        early_stopping_patience: 10,
        rng_seed: 3,
        ..TrainConfig::default()
    };
    let out = train(
        Samples::new(&train_rows, &train_labels),
        Samples::new(&val_rows, &val_labels),
        2,
        &config,
    )
    .unwrap();
    assert!(accuracy(&out.net, &val_rows, &val_labels) >= 0.95);
    assert!(out.best_epoch <= out.epochs_run);
}

#[test]
fn training_is_deterministic_for_a_seed() {
    let (rows, labels) = separable_samples(120, 4);
    let (val_rows, val_labels) = separable_samples(40, 5);
    let config = TrainConfig {
        hidden_sizes: [5, 4],
        batch_size: 16,
        max_epochs: 30,
        rng_seed: 9,
        ..TrainConfig::default()
    };
    let run = || {
        train(
            Samples::new(&rows, &labels),
            Samples::new(&val_rows, &val_labels),
            2,
            &config,
        )
        .unwrap()
        .net
    };
    assert_eq!(run(), run());
    let other = train(
        Samples::new(&rows, &labels),
        Samples::new(&val_rows, &val_labels),
        2,
        &TrainConfig {
            rng_seed: 10,
            ..config.clone()
        },
    )
    .unwrap()
    .net;
    assert_ne!(run(), other);
}

#[test]
fn best_snapshot_is_restored() {
    let (rows, labels) = separable_samples(200, 6);
    let (val_rows, val_labels) = separable_samples(60, 7);
    let config = TrainConfig {
        hidden_sizes: [6, 6],
        batch_size: 32,
        max_epochs: 60,
        early_stopping_patience: 2,
        rng_seed: 1,
        ..TrainConfig::default()
    };
    let out = train(
        Samples::new(&rows, &labels),
        Samples::new(&val_rows, &val_labels),
        2,
        &config,
    )
    .unwrap();
    let val_loss = out.net.mean_loss(&val_rows, &val_labels).unwrap();
    assert_eq!(val_loss, out.best_val_loss);
}
