//! A feed-forward stack of linear layers with hand-written reverse-mode
//! gradients.

use std::collections::BTreeMap;

use rand::Rng;

use super::data::{Dataset, Targets};
use super::layer::{Activation, FactorizedLinear, Layer, LinearLayer};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossHead {
    /// Per example `Σⱼ (yⱼ − tⱼ)²`.
    MeanSquaredError,
    /// Per example `−log softmax(y)[label]`.
    SoftmaxCrossEntropy,
}

impl LossHead {
    pub fn name(self) -> &'static str {
        match self {
            LossHead::MeanSquaredError => "mse",
            LossHead::SoftmaxCrossEntropy => "softmax_cross_entropy",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "mse" => Some(LossHead::MeanSquaredError),
            "softmax_cross_entropy" => Some(LossHead::SoftmaxCrossEntropy),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Loss,
    Accuracy,
}

impl Metric {
    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::Accuracy)
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Loss => "loss",
            Metric::Accuracy => "accuracy",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub layer: Layer,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetModel {
    stages: Vec<Stage>,
    loss: LossHead,
    /// Free-form provenance (training seed, config), persisted in the manifest.
    pub provenance: BTreeMap<String, String>,
}

/// Gradient of one layer's weight parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightGrad {
    Dense(DenseMatrix),
    Factorized { a: DenseMatrix, b: DenseMatrix },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub name: String,
    pub weight: WeightGrad,
    pub bias: Option<Vec<f64>>,
}

impl LayerGradient {
    /// Parameter slices in the same order as [`Layer::params_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = match &self.weight {
            WeightGrad::Dense(w) => vec![w.data()],
            WeightGrad::Factorized { a, b } => vec![a.data(), b.data()],
        };
        if let Some(b) = &self.bias {
            out.push(b);
        }
        out
    }
}

/// Gradients of the mean batch loss, one entry per layer in model order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn get(&self, name: &str) -> Option<&LayerGradient> {
        self.layers.iter().find(|g| g.name == name)
    }
}

impl Layer {
    /// Mutable parameter slices: weight (or A then B), then bias.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Layer::Dense(l) => {
                let mut v: Vec<&mut [f64]> = vec![l.weight.data_mut()];
                if let Some(b) = l.bias.as_mut() {
                    v.push(b);
                }
                v
            }
            Layer::Factorized(l) => {
                let mut v: Vec<&mut [f64]> = vec![l.a.data_mut(), l.b.data_mut()];
                if let Some(b) = l.bias.as_mut() {
                    v.push(b);
                }
                v
            }
        }
    }
}

/// Activations recorded by a forward pass: `inputs[l]` feeds stage `l`,
/// `outputs[l]` is stage `l` after its nonlinearity.
pub(crate) struct Trace {
    pub inputs: Vec<DenseMatrix>,
    pub outputs: Vec<DenseMatrix>,
}

impl NetModel {
    pub fn new(stages: Vec<Stage>, loss: LossHead) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidArgument("a model needs at least one layer".into()));
        }
        for pair in stages.windows(2) {
            let (a, b) = (&pair[0].layer, &pair[1].layer);
            if a.out_dim() != b.in_dim() {
                return Err(Error::layer(
                    b.name(),
                    format!(
                        "expects {} inputs but '{}' produces {}",
                        b.in_dim(),
                        a.name(),
                        a.out_dim()
                    ),
                ));
            }
        }
        for (i, s) in stages.iter().enumerate() {
            if stages[..i].iter().any(|t| t.layer.name() == s.layer.name()) {
                return Err(Error::layer(s.layer.name(), "duplicate layer name"));
            }
        }
        Ok(Self {
            stages,
            loss,
            provenance: BTreeMap::new(),
        })
    }

    /// A multilayer perceptron `dims[0] → dims[1] → … → dims[L]` with layers
    /// named `fc1..fcL`, `hidden` after every layer but the last. Weights are
    /// uniform in `±sqrt(6/(N+M))`, biases zero.
    pub fn mlp<R: Rng>(
        dims: &[usize],
        hidden: Activation,
        loss: LossHead,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("bad layer widths {dims:?}")));
        }
        let last = dims.len() - 2;
        let stages = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (n, m) = (w[0], w[1]);
                let limit = (6.0 / (n + m) as f64).sqrt();
                let weight = DenseMatrix::from_fn(n, m, |_, _| rng.random_range(-limit..limit));
                Stage {
                    layer: Layer::Dense(LinearLayer {
                        name: format!("fc{}", i + 1),
                        weight,
                        bias: Some(vec![0.0; m]),
                    }),
                    activation: if i == last { Activation::Identity } else { hidden },
                }
            })
            .collect();
        Self::new(stages, loss)
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn stages_mut(&mut self) -> &mut [Stage] {
        &mut self.stages
    }

    pub fn loss_head(&self) -> LossHead {
        self.loss
    }

    pub fn layer(&self, name: &str) -> Option<&Layer> {
        self.stages.iter().map(|s| &s.layer).find(|l| l.name() == name)
    }

    pub fn layer_names(&self) -> Vec<String> {
        self.stages.iter().map(|s| s.layer.name().to_string()).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.stages[0].layer.in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.stages.last().unwrap().layer.out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.stages.iter().map(|s| s.layer.param_count()).sum()
    }

    /// Swaps the named layer for `replacement`, which must have the same
    /// input and output widths. The replacement takes over the slot's name.
    pub fn replace_layer(&mut self, name: &str, replacement: Layer) -> Result<()> {
        let stage = self
            .stages
            .iter_mut()
            .find(|s| s.layer.name() == name)
            .ok_or_else(|| Error::UnknownLayer(name.to_string()))?;
        let (n, m) = (stage.layer.in_dim(), stage.layer.out_dim());
        if (replacement.in_dim(), replacement.out_dim()) != (n, m) {
            return Err(Error::layer(
                name,
                format!(
                    "replacement maps {}→{}, slot maps {n}→{m}",
                    replacement.in_dim(),
                    replacement.out_dim()
                ),
            ));
        }
        let mut replacement = replacement;
        match &mut replacement {
            Layer::Dense(l) => l.name = name.to_string(),
            Layer::Factorized(l) => l.name = name.to_string(),
        }
        stage.layer = replacement;
        Ok(())
    }

    /// Convenience for swapping in a factorized layer.
    pub fn replace_with_factorized(&mut self, name: &str, f: FactorizedLinear) -> Result<()> {
        self.replace_layer(name, Layer::Factorized(f))
    }

    fn check_batch(&self, batch: &Dataset) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let first = &self.stages[0].layer;
        if batch.input_dim() != first.in_dim() {
            return Err(Error::layer(
                first.name(),
                format!("expects {} inputs, batch has {}", first.in_dim(), batch.input_dim()),
            ));
        }
        match (&batch.targets, self.loss) {
            (Targets::Regression(t), LossHead::MeanSquaredError) => {
                if t.cols() != self.output_dim() {
                    let last = self.stages.last().unwrap().layer.name();
                    return Err(Error::layer(
                        last,
                        format!("produces {} outputs, targets have {}", self.output_dim(), t.cols()),
                    ));
                }
            }
            (Targets::Classes(c), LossHead::SoftmaxCrossEntropy) => {
                if let Some(&bad) = c.iter().find(|&&k| k >= self.output_dim()) {
                    return Err(Error::InvalidArgument(format!(
                        "class index {bad} out of range for {} outputs",
                        self.output_dim()
                    )));
                }
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "targets do not match the {} loss head",
                    self.loss.name()
                )))
            }
        }
        Ok(())
    }

    pub(crate) fn trace(&self, x: &DenseMatrix) -> Trace {
        let mut inputs = Vec::with_capacity(self.stages.len());
        let mut outputs = Vec::with_capacity(self.stages.len());
        let mut cur = x.clone();
        for stage in &self.stages {
            let mut z = stage.layer.apply(&cur);
            if stage.activation != Activation::Identity {
                z.data_mut().iter_mut().for_each(|v| *v = stage.activation.apply(*v));
            }
            inputs.push(cur);
            cur = z.clone();
            outputs.push(z);
        }
        Trace { inputs, outputs }
    }

    /// Per-example losses and the per-example gradient of each example's
    /// own loss with respect to the network output (not divided by the batch
    /// size).
    pub(crate) fn loss_and_output_grad(&self, y: &DenseMatrix, targets: &Targets) -> (Vec<f64>, DenseMatrix) {
        let (n, w) = y.shape();
        let mut losses = Vec::with_capacity(n);
        let mut grad = DenseMatrix::zeros(n, w);
        match (self.loss, targets) {
            (LossHead::MeanSquaredError, Targets::Regression(t)) => {
                for i in 0..n {
                    let mut l = 0.0;
                    for j in 0..w {
                        let d = y[(i, j)] - t[(i, j)];
                        l += d * d;
                        grad[(i, j)] = 2.0 * d;
                    }
                    losses.push(l);
                }
            }
            (LossHead::SoftmaxCrossEntropy, Targets::Classes(c)) => {
                for i in 0..n {
                    let row = y.row(i);
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
                    let log_z = max + sum.ln();
                    losses.push(log_z - row[c[i]]);
                    for j in 0..w {
                        grad[(i, j)] = (row[j] - log_z).exp();
                    }
                    grad[(i, c[i])] -= 1.0;
                }
            }
            _ => unreachable!("checked by check_batch"),
        }
        (losses, grad)
    }

    /// Network outputs and the mean loss over the batch.
    pub fn forward(&self, batch: &Dataset) -> Result<(DenseMatrix, f64)> {
        self.check_batch(batch)?;
        let mut trace = self.trace(&batch.inputs);
        let y = trace.outputs.pop().unwrap();
        let (losses, _) = self.loss_and_output_grad(&y, &batch.targets);
        let loss = losses.iter().sum::<f64>() / losses.len() as f64;
        Ok((y, loss))
    }

    /// Runs the backward pass from `delta_out` (gradient w.r.t. the final
    /// activations) and hands each layer's input activations and
    /// pre-activation gradient to `visit`, last layer first.
    pub(crate) fn backprop(
        &self,
        trace: &Trace,
        delta_out: DenseMatrix,
        mut visit: impl FnMut(usize, &DenseMatrix, &DenseMatrix),
    ) {
        let mut delta = delta_out;
        for (l, stage) in self.stages.iter().enumerate().rev() {
            // Through the nonlinearity.
            if stage.activation != Activation::Identity {
                let out = &trace.outputs[l];
                delta
                    .data_mut()
                    .iter_mut()
                    .zip(out.data())
                    .for_each(|(d, &y)| *d *= stage.activation.derivative_from_output(y));
            }
            visit(l, &trace.inputs[l], &delta);
            if l > 0 {
                delta = match &stage.layer {
                    Layer::Dense(d) => delta.matmul_t(&d.weight),
                    Layer::Factorized(f) => delta.matmul_t(&f.b).matmul_t(&f.a),
                };
            }
        }
    }

    /// Gradients of the mean batch loss with respect to every parameter.
    pub fn backward(&self, batch: &Dataset) -> Result<(Gradients, f64)> {
        self.check_batch(batch)?;
        let trace = self.trace(&batch.inputs);
        let y = trace.outputs.last().unwrap();
        let (losses, mut delta) = self.loss_and_output_grad(y, &batch.targets);
        let n = losses.len() as f64;
        let loss = losses.iter().sum::<f64>() / n;
        delta.data_mut().iter_mut().for_each(|d| *d /= n);

        let mut grads: Vec<Option<LayerGradient>> = vec![None; self.stages.len()];
        self.backprop(&trace, delta, |l, x, delta| {
            let layer = &self.stages[l].layer;
            let weight = match layer {
                Layer::Dense(_) => WeightGrad::Dense(x.t_matmul(delta)),
                Layer::Factorized(f) => WeightGrad::Factorized {
                    a: x.t_matmul(&delta.matmul_t(&f.b)),
                    b: x.matmul(&f.a).t_matmul(delta),
                },
            };
            let bias = layer.bias().map(|_| column_sums(delta));
            grads[l] = Some(LayerGradient {
                name: layer.name().to_string(),
                weight,
                bias,
            });
        });
        Ok((
            Gradients {
                layers: grads.into_iter().map(Option::unwrap).collect(),
            },
            loss,
        ))
    }

    /// Mean loss or classification accuracy over `data`.
    pub fn evaluate(&self, data: &Dataset, metric: Metric) -> Result<f64> {
        match metric {
            Metric::Loss => self.forward(data).map(|(_, l)| l),
            Metric::Accuracy => {
                if self.loss != LossHead::SoftmaxCrossEntropy {
                    return Err(Error::InvalidArgument(
                        "accuracy needs a classification (softmax cross-entropy) head".into(),
                    ));
                }
                let (y, _) = self.forward(data)?;
                let Targets::Classes(labels) = &data.targets else {
                    unreachable!("checked by forward")
                };
                let correct = labels
                    .iter()
                    .enumerate()
                    .filter(|&(i, &label)| argmax(y.row(i)) == label)
                    .count();
                Ok(correct as f64 / labels.len() as f64)
            }
        }
    }
}

pub(crate) fn column_sums(m: &DenseMatrix) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        out.iter_mut().zip(m.row(i)).for_each(|(o, v)| *o += v);
    }
    out
}

/// First index of the maximum.
fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = j;
        }
    }
    best
}
