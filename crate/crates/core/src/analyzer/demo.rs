//! Synthetic teacher-student regression task with deliberately uneven
//! feature importance.
//!
//! A few input dimensions are rare (nonzero in a small fraction of examples)
//! while the teacher weights them far more heavily than the rest. A student
//! trained on the teacher's labels ends up with large first-layer rows for
//! the rare dimensions even though they contribute little loss on average,
//! so plain SVD spends rank on them while the empirical Fisher, which tracks
//! how often each input actually fires, does not.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::matrix::DenseMatrix;
use crate::nn::{Activation, Dataset, Layer, LossHead, NetModel, Split};

#[derive(Debug, Clone, PartialEq)]
pub struct DemoConfig {
    pub input_dim: usize,
    /// The first `rare_dims` inputs are the rare ones.
    pub rare_dims: usize,
    pub rare_probability: f64,
    /// Factor applied to the teacher's first-layer rows for rare inputs.
    pub rare_weight: f64,
    pub hidden: usize,
    /// Hidden nonlinearity of both teacher and student.
    pub activation: Activation,
    pub outputs: usize,
    pub train_examples: usize,
    pub eval_examples: usize,
    /// Standard deviation of Gaussian label noise.
    pub noise_std: f64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            input_dim: 64,
            rare_dims: 8,
            rare_probability: 0.05,
            rare_weight: 10.0,
            hidden: 64,
            activation: Activation::Tanh,
            outputs: 64,
            train_examples: 4096,
            eval_examples: 1024,
            noise_std: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DemoTask {
    pub teacher: NetModel,
    /// Untrained student, two hidden layers of width `hidden`.
    pub student: NetModel,
    pub train: Dataset,
    pub eval: Dataset,
    /// Seed for training the student, drawn from the same root generator.
    pub train_seed: u64,
    pub config: DemoConfig,
}

/// Builds the task with the default configuration.
pub fn make_demo_task(seed: u64) -> Result<DemoTask> {
    make_demo_task_with(seed, &DemoConfig::default())
}

pub fn make_demo_task_with(seed: u64, config: &DemoConfig) -> Result<DemoTask> {
    let mut root = ChaCha8Rng::seed_from_u64(seed);
    let mut teacher_rng = ChaCha8Rng::seed_from_u64(root.next_u64());
    let mut data_rng = ChaCha8Rng::seed_from_u64(root.next_u64());
    let mut student_rng = ChaCha8Rng::seed_from_u64(root.next_u64());
    let train_seed = root.next_u64();

    let dims = [config.input_dim, config.hidden, config.hidden, config.outputs];
    let mut teacher = NetModel::mlp(&dims, config.activation, LossHead::MeanSquaredError, &mut teacher_rng)?;
    if let Layer::Dense(first) = &mut teacher.stages_mut()[0].layer {
        for i in 0..config.rare_dims.min(config.input_dim) {
            first.weight.row_mut(i).iter_mut().for_each(|w| *w *= config.rare_weight);
        }
    }
    teacher.provenance.insert("demo.seed".into(), seed.to_string());
    teacher.provenance.insert("demo.role".into(), "teacher".into());

    let train = labeled(&teacher, config, config.train_examples, Split::Train, &mut data_rng)?;
    let eval = labeled(&teacher, config, config.eval_examples, Split::Eval, &mut data_rng)?;

    let mut student = NetModel::mlp(&dims, config.activation, LossHead::MeanSquaredError, &mut student_rng)?;
    student.provenance.insert("demo.seed".into(), seed.to_string());
    student.provenance.insert("demo.role".into(), "student".into());

    Ok(DemoTask {
        teacher,
        student,
        train,
        eval,
        train_seed,
        config: config.clone(),
    })
}

/// Inputs: common dimensions standard normal; rare dimensions standard
/// normal with probability `rare_probability`, zero otherwise.
pub fn sample_inputs<R: Rng>(config: &DemoConfig, n: usize, rng: &mut R) -> DenseMatrix {
    DenseMatrix::from_fn(n, config.input_dim, |_, j| {
        let z: f64 = rng.sample(StandardNormal);
        if j < config.rare_dims {
            let fires = rng.random::<f64>() < config.rare_probability;
            if fires {
                z
            } else {
                0.0
            }
        } else {
            z
        }
    })
}

fn labeled<R: Rng>(teacher: &NetModel, config: &DemoConfig, n: usize, split: Split, rng: &mut R) -> Result<Dataset> {
    let x = sample_inputs(config, n, rng);
    let mut y = teacher_outputs(teacher, &x);
    y.data_mut().iter_mut().for_each(|v| {
        let e: f64 = rng.sample(StandardNormal);
        *v += config.noise_std * e;
    });
    Dataset::regression(x, y, split)
}

/// Noise-free teacher predictions.
pub fn teacher_outputs(teacher: &NetModel, x: &DenseMatrix) -> DenseMatrix {
    teacher.trace(x).outputs.pop().unwrap()
}
