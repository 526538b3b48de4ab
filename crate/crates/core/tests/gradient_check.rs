use pgnaa_core::nn::{backward, cross_entropy, forward, init_params, Activation, BlockConfig, ModelConfig, ModelParams};
use pgnaa_core::rng::seeded;
use rand::Rng;

const STEP: f64 = 1e-5;
const TOLERANCE: f64 = 1e-4;

fn loss(params: &ModelParams, config: &ModelConfig, input: &[f64], label: usize) -> f64 {
    let t = forward(params, config, input).unwrap();
    cross_entropy(&t.probs, label).unwrap()
}

/// Largest relative error between the analytic gradient and central
/// differences. Both sides are compared against a floor of 1e-7 so that
/// exactly-zero gradients do not divide by zero.
fn max_relative_error(config: &ModelConfig, seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let params = init_params(config).unwrap();
    let input: Vec<f64> = (0..config.input_width).map(|_| rng.random_range(-1.0..1.0)).collect();
    let label = rng.random_range(0..config.n_classes);
    let trace = forward(&params, config, &input).unwrap();
    let grad = backward(&trace, &params, config, label).unwrap();

    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let mut plus = params.clone();
        plus.as_mut_slice()[i] += STEP;
        let mut minus = params.clone();
        minus.as_mut_slice()[i] -= STEP;
        let numeric = (loss(&plus, config, &input, label) - loss(&minus, config, &input, label)) / (2.0 * STEP);
        let analytic = grad.as_slice()[i];
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7);
        worst = worst.max(rel);
    }
    worst
}

fn two_blocks(seed: u64) -> ModelConfig {
    ModelConfig {
        input_width: 24,
        n_classes: 3,
        blocks: vec![BlockConfig::new(4, 3, 2, true), BlockConfig::new(4, 5, 1, true)],
        activation: Activation::Relu,
        seed,
    }
}

#[test]
fn two_block_gradient_matches_central_differences() {
    for seed in 0..3 {
        let err = max_relative_error(&two_blocks(seed), 100 + seed);
        assert!(err <= TOLERANCE, "seed {seed}: relative error {err}");
    }
}

#[test]
fn standard_backbone_gradient_matches_central_differences() {
    let config = ModelConfig::standard(32, 4, 4, 3, 5, 9);
    let err = max_relative_error(&config, 7);
    assert!(err <= TOLERANCE, "relative error {err}");
}
