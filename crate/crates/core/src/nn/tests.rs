use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;
use crate::matrix::DenseMatrix;

fn scalar_model(w: f64, bias: Option<f64>) -> NetModel {
    let layer = LinearLayer::new("w", DenseMatrix::from_rows(&[[w]]), bias.map(|b| vec![b])).unwrap();
    NetModel::new(
        vec![Stage {
            layer: Layer::Dense(layer),
            activation: Activation::Identity,
        }],
        LossHead::MeanSquaredError,
    )
    .unwrap()
}

fn scalar_data(pairs: &[(f64, f64)]) -> Dataset {
    let x = DenseMatrix::from_fn(pairs.len(), 1, |i, _| pairs[i].0);
    let y = DenseMatrix::from_fn(pairs.len(), 1, |i, _| pairs[i].1);
    Dataset::regression(x, y, Split::Train).unwrap()
}

fn random_batch(rng: &mut ChaCha8Rng, n: usize, d: usize, out: usize) -> Dataset {
    let x = DenseMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
    let y = DenseMatrix::from_fn(n, out, |_, _| rng.random_range(-1.0..1.0));
    Dataset::regression(x, y, Split::Train).unwrap()
}

#[test]
fn identity_layer_reproduces_inputs() {
    let layer = LinearLayer::new("id", DenseMatrix::identity(3), Some(vec![0.0; 3])).unwrap();
    let model = NetModel::new(
        vec![Stage {
            layer: Layer::Dense(layer),
            activation: Activation::Identity,
        }],
        LossHead::MeanSquaredError,
    )
    .unwrap();
    let x = DenseMatrix::from_rows(&[[1.0, -2.0, 0.5], [0.0, 3.0, 1.0]]);
    let data = Dataset::regression(x.clone(), x, Split::Eval).unwrap();
    let (_, loss) = model.forward(&data).unwrap();
    assert_eq!(loss, 0.0);
}

#[test]
fn scalar_forward() {
    let model = scalar_model(2.0, Some(1.0));
    let (y, _) = model.forward(&scalar_data(&[(3.0, 0.0)])).unwrap();
    assert_eq!(y[(0, 0)], 7.0);
}

#[test]
fn forward_rejects_wrong_width_naming_layer() {
    let model = scalar_model(1.0, None);
    let x = DenseMatrix::zeros(1, 2);
    let y = DenseMatrix::zeros(1, 1);
    let data = Dataset::regression(x, y, Split::Eval).unwrap();
    match model.forward(&data) {
        Err(Error::Layer { layer, .. }) => assert_eq!(layer, "w"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn scalar_gradient_by_hand() {
    // d/dw (wx − y)² = 2x(wx − y) = 2 at w = 1, x = 1, y = 0.
    let model = scalar_model(1.0, None);
    let (g, _) = model.backward(&scalar_data(&[(1.0, 0.0)])).unwrap();
    let WeightGrad::Dense(gw) = &g.layers[0].weight else { panic!() };
    assert_eq!(gw[(0, 0)], 2.0);
}

#[test]
fn gradients_vanish_at_interpolation() {
    let model = scalar_model(3.0, Some(0.5));
    let data = scalar_data(&[(1.0, 3.5), (-2.0, -5.5), (0.25, 1.25)]);
    let (g, loss) = model.backward(&data).unwrap();
    assert!(loss <= 1e-24);
    for s in g.layers[0].slices() {
        assert!(s.iter().all(|v| v.abs() <= 1e-12));
    }
}

/// Central differences over every parameter of the model.
fn check_gradients(model: &NetModel, batch: &Dataset, tol: f64) {
    let (g, _) = model.backward(batch).unwrap();
    let h = 1e-5;
    for (l, stage) in model.stages().iter().enumerate() {
        let n_tensors = stage.layer.clone().params_mut().len();
        for t in 0..n_tensors {
            let len = stage.layer.clone().params_mut()[t].len();
            for i in 0..len {
                let mut plus = model.clone();
                plus.stages_mut()[l].layer.params_mut()[t][i] += h;
                let mut minus = model.clone();
                minus.stages_mut()[l].layer.params_mut()[t][i] -= h;
                let fd = (plus.forward(batch).unwrap().1 - minus.forward(batch).unwrap().1) / (2.0 * h);
                let an = g.layers[l].slices()[t][i];
                let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-7);
                assert!(rel <= tol, "layer {l} tensor {t} entry {i}: {an} vs {fd}");
            }
        }
    }
}

#[test]
fn finite_differences_two_layer_tanh() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let model = NetModel::mlp(&[4, 5, 3], Activation::Tanh, LossHead::MeanSquaredError, &mut rng).unwrap();
    let mut model = model;
    // Nonzero biases so their gradients are exercised off the init point.
    for s in model.stages_mut() {
        s.layer.bias_mut().unwrap().iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
    }
    let batch = random_batch(&mut rng, 6, 4, 3);
    check_gradients(&model, &batch, 1e-5);
}

#[test]
fn finite_differences_factorized_and_cross_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = DenseMatrix::from_fn(4, 2, |_, _| rng.random_range(-1.0..1.0));
    let b = DenseMatrix::from_fn(2, 5, |_, _| rng.random_range(-1.0..1.0));
    let f = FactorizedLinear::new("f1", a, b, Some(vec![0.1; 5])).unwrap();
    let d = LinearLayer::new("d2", DenseMatrix::from_fn(5, 3, |_, _| rng.random_range(-1.0..1.0)), None).unwrap();
    let model = NetModel::new(
        vec![
            Stage {
                layer: Layer::Factorized(f),
                activation: Activation::Tanh,
            },
            Stage {
                layer: Layer::Dense(d),
                activation: Activation::Identity,
            },
        ],
        LossHead::SoftmaxCrossEntropy,
    )
    .unwrap();
    let x = DenseMatrix::from_fn(5, 4, |_, _| rng.random_range(-1.0..1.0));
    let batch = Dataset::new(x, Targets::Classes(vec![0, 2, 1, 1, 0]), Split::Train).unwrap();
    check_gradients(&model, &batch, 1e-5);
}

#[test]
fn zero_epochs_leaves_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let model = NetModel::mlp(&[3, 4, 1], Activation::Relu, LossHead::MeanSquaredError, &mut rng).unwrap();
    let data = random_batch(&mut rng, 10, 3, 1);
    let cfg = TrainConfig {
        epochs: 0,
        ..TrainConfig::default()
    };
    let trained = train(&model, &data, &cfg).unwrap();
    assert_eq!(trained.stages(), model.stages());
}

#[test]
fn learns_linear_regression_slope() {
    let pairs: Vec<(f64, f64)> = (0..32).map(|i| {
        let x = -1.0 + i as f64 / 16.0;
        (x, 3.0 * x)
    }).collect();
    let data = scalar_data(&pairs);
    let cfg = TrainConfig {
        learning_rate: 0.1,
        batch_size: 8,
        epochs: 50,
        seed: 3,
        optimizer: Optimizer::Sgd,
    };
    let trained = train(&scalar_model(0.0, None), &data, &cfg).unwrap();
    let Layer::Dense(l) = &trained.stages()[0].layer else { panic!() };
    assert!((l.weight[(0, 0)] - 3.0).abs() < 1e-3, "{}", l.weight[(0, 0)]);
}

#[test]
fn training_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let model = NetModel::mlp(&[3, 8, 2], Activation::Tanh, LossHead::MeanSquaredError, &mut rng).unwrap();
    let data = random_batch(&mut rng, 50, 3, 2);
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 7,
        ..TrainConfig::default()
    };
    assert_eq!(train(&model, &data, &cfg).unwrap(), train(&model, &data, &cfg).unwrap());
}

#[test]
fn divergence_is_reported() {
    let data = scalar_data(&[(10.0, 0.0), (-10.0, 1.0)]);
    let cfg = TrainConfig {
        learning_rate: 10.0,
        batch_size: 2,
        epochs: 100,
        seed: 0,
        optimizer: Optimizer::Sgd,
    };
    assert!(matches!(train(&scalar_model(1.0, None), &data, &cfg), Err(Error::Diverged { .. })));
}

#[test]
fn replace_layer_checks_name_and_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut model = NetModel::mlp(&[4, 4, 2], Activation::Tanh, LossHead::MeanSquaredError, &mut rng).unwrap();
    let f = FactorizedLinear::new("x", DenseMatrix::zeros(4, 1), DenseMatrix::zeros(1, 4), None).unwrap();
    assert!(matches!(model.replace_with_factorized("nope", f.clone()), Err(Error::UnknownLayer(_))));
    assert!(matches!(model.replace_with_factorized("fc2", f.clone()), Err(Error::Layer { .. })));
    model.replace_with_factorized("fc1", f).unwrap();
    assert_eq!(model.layer("fc1").unwrap().param_count(), 8);
}

#[test]
fn accuracy_metric() {
    // Perfect classifier: identity logits on one-hot inputs.
    let layer = LinearLayer::new("c", DenseMatrix::identity(3), None).unwrap();
    let model = NetModel::new(
        vec![Stage {
            layer: Layer::Dense(layer),
            activation: Activation::Identity,
        }],
        LossHead::SoftmaxCrossEntropy,
    )
    .unwrap();
    let labels = vec![0, 1, 2, 2, 1];
    let x = DenseMatrix::from_fn(5, 3, |i, j| if labels[i] == j { 1.0 } else { 0.0 });
    let data = Dataset::new(x, Targets::Classes(labels), Split::Train).unwrap();
    assert_eq!(model.evaluate(&data, Metric::Accuracy).unwrap(), 1.0);
    assert_eq!(
        model.evaluate(&data, Metric::Loss).unwrap(),
        model.evaluate(&data, Metric::Loss).unwrap()
    );

    let reg = scalar_model(1.0, None);
    assert!(reg.evaluate(&scalar_data(&[(1.0, 1.0)]), Metric::Accuracy).is_err());
}

#[test]
fn random_guess_accuracy_within_binomial_bound() {
    // A model with random weights on inputs independent of balanced labels.
    let classes = 4;
    let n = 4000;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let model = NetModel::mlp(&[6, classes], Activation::Identity, LossHead::SoftmaxCrossEntropy, &mut rng).unwrap();
    let x = DenseMatrix::from_fn(n, 6, |_, _| rng.random_range(-1.0..1.0));
    let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    let data = Dataset::new(x, Targets::Classes(labels), Split::Eval).unwrap();
    let acc = model.evaluate(&data, Metric::Accuracy).unwrap();
    let p = 1.0 / classes as f64;
    let bound = 3.0 * (p * (1.0 - p) / n as f64).sqrt();
    assert!((acc - p).abs() <= bound, "accuracy {acc}");
}
