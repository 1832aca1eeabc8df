use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::data::Dataset;
use super::model::NetModel;
use crate::error::{Error, Result};

/// Loss above which training is considered diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Optimizer::Sgd => "sgd",
            Optimizer::Adam { .. } => "adam",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    /// The recipe the demo task is calibrated against.
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 60,
            seed: 42,
            optimizer: Optimizer::adam(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        Ok(())
    }

    /// Key/value pairs recorded as model provenance.
    pub fn provenance(&self) -> Vec<(String, String)> {
        vec![
            ("train.seed".into(), self.seed.to_string()),
            ("train.epochs".into(), self.epochs.to_string()),
            ("train.batch_size".into(), self.batch_size.to_string()),
            ("train.learning_rate".into(), format!("{:e}", self.learning_rate)),
            ("train.optimizer".into(), self.optimizer.name().to_string()),
        ]
    }
}

/// Minibatch training on the mean batch loss. Each epoch visits the examples
/// in an order shuffled by a generator seeded from `config.seed`, so the same
/// inputs always give a bitwise-identical model.
pub fn train(model: &NetModel, data: &Dataset, config: &TrainConfig) -> Result<NetModel> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("cannot train on an empty dataset".into()));
    }
    let mut model = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();

    // Adam moments, one buffer per parameter tensor.
    let mut first: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut second: Vec<Vec<Vec<f64>>> = Vec::new();
    for stage in model.stages_mut() {
        let shapes: Vec<usize> = stage.layer.params_mut().iter().map(|p| p.len()).collect();
        first.push(shapes.iter().map(|&n| vec![0.0; n]).collect());
        second.push(shapes.iter().map(|&n| vec![0.0; n]).collect());
    }
    let mut step: i32 = 0;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch = data.subset(chunk);
            let (grads, loss) = model.backward(&batch)?;
            if !loss.is_finite() || loss > DIVERGENCE_LIMIT {
                return Err(Error::Diverged {
                    epoch,
                    batch: batch_idx,
                    loss,
                });
            }
            step += 1;
            for (l, stage) in model.stages_mut().iter_mut().enumerate() {
                let g = grads.layers[l].slices();
                for (t, param) in stage.layer.params_mut().into_iter().enumerate() {
                    update(
                        param,
                        g[t],
                        &mut first[l][t],
                        &mut second[l][t],
                        config,
                        step,
                    );
                }
            }
        }
    }

    for (k, v) in config.provenance() {
        model.provenance.insert(k, v);
    }
    Ok(model)
}

fn update(param: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], config: &TrainConfig, step: i32) {
    let lr = config.learning_rate;
    match config.optimizer {
        Optimizer::Sgd => {
            param.iter_mut().zip(grad).for_each(|(p, g)| *p -= lr * g);
        }
        Optimizer::Adam { beta1, beta2, eps } => {
            let c1 = 1.0 - beta1.powi(step);
            let c2 = 1.0 - beta2.powi(step);
            for i in 0..param.len() {
                let g = grad[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
