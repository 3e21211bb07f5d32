use std::time::Instant;

use evcustom::neuralnet::{gradient_check, gradient_check_with, Activation};
use evcustom_testkit::gradcase;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn check_many(arg: bool, activation: Activation) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let (m, x, label) = gradcase::case(arg, activation, seed);
        let weights = [1.0, 3.0, 3.0, 3.0];
        let report = gradient_check(&m, &x, label, &weights, 1e-4).unwrap();
        assert!(report.passed, "seed {seed}: {report:?}");
        worst = worst.max(report.max_relative_error);
    }
    worst
}

#[test]
fn trigger_model_gradients_match_finite_differences() {
    let start = Instant::now();
    let worst = check_many(false, Activation::Tanh);
    assert!(worst < 1e-4, "{worst}");
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn argument_model_gradients_match_finite_differences() {
    let start = Instant::now();
    let worst = check_many(true, Activation::Tanh);
    assert!(worst < 1e-4, "{worst}");
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn identity_activation_gradients() {
    assert!(check_many(true, Activation::Identity) < 1e-4);
}

#[test]
fn doubled_gradient_is_caught() {
    let m = gradcase::model(true, Activation::Tanh, 3);
    let x = gradcase::instance(&mut ChaCha8Rng::seed_from_u64(9), true);
    let weights = [1.0; 4];
    let report = gradient_check_with(&m, &x, 1, &weights, 1e-4, |m| {
        let mut g = m.zero_grads();
        m.accumulate_gradients(&x, 1, &weights, None, 2.0, &mut g)?;
        Ok(g)
    })
    .unwrap();
    assert!(!report.passed);
    assert!(report.max_relative_error > 0.4);
}

#[test]
fn every_parameter_group_is_reported() {
    let (m, x, _) = gradcase::case(true, Activation::Tanh, 5);
    let report = gradient_check(&m, &x, 0, &[1.0; 4], 1e-4).unwrap();
    let names: Vec<&str> = report.groups.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        ["word_unk", "pf_trigger", "pf_arg", "conv_weight", "conv_bias", "out_weight", "out_bias"]
    );
}
