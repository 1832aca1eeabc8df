//! Empirical Fisher information: the mean over examples of each parameter's
//! squared per-example loss gradient, and its reduction to one importance
//! value per weight row.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::nn::{Dataset, NetModel};

/// Examples per vectorized chunk. Chunking changes nothing numerically
/// beyond summation order, which is fixed.
const CHUNK: usize = 256;

/// Per-layer accumulated squared gradients with respect to the layer's
/// effective `N×M` weight (for a factorized layer, `A·B`).
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMap {
    pub weights: BTreeMap<String, DenseMatrix>,
    /// Bias Fisher, carried along but unused by the factorizers.
    pub biases: BTreeMap<String, Vec<f64>>,
    pub example_count: usize,
}

impl FisherMap {
    pub fn get(&self, layer: &str) -> Option<&DenseMatrix> {
        self.weights.get(layer)
    }

    /// Same map with every entry multiplied by `c`.
    pub fn scaled(&self, c: f64) -> FisherMap {
        FisherMap {
            weights: self.weights.iter().map(|(k, v)| (k.clone(), v.scaled(c))).collect(),
            biases: self
                .biases
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().map(|x| x * c).collect()))
                .collect(),
            example_count: self.example_count,
        }
    }

    /// Entries must be nonnegative and finite.
    pub fn validate(&self) -> Result<()> {
        for (name, m) in &self.weights {
            m.check_finite(&format!("{name}.fisher"))?;
            if let Some(idx) = m.data().iter().position(|v| *v < 0.0) {
                return Err(Error::NegativeWeight {
                    context: format!("{name}.fisher"),
                    row: idx / m.cols(),
                    col: idx % m.cols(),
                    value: m.data()[idx],
                });
            }
        }
        Ok(())
    }

    /// Checks that the covered layers are exactly the model's layers, with
    /// matching shapes.
    pub fn check_covers(&self, model: &NetModel) -> Result<()> {
        for stage in model.stages() {
            let layer = &stage.layer;
            let m = self.weights.get(layer.name()).ok_or_else(|| {
                Error::layer(layer.name(), "no Fisher information for this layer")
            })?;
            if m.shape() != (layer.in_dim(), layer.out_dim()) {
                return Err(Error::ShapeMismatch {
                    context: format!("Fisher information for '{}'", layer.name()),
                    expected: (layer.in_dim(), layer.out_dim()),
                    got: m.shape(),
                });
            }
        }
        if let Some(extra) = self.weights.keys().find(|k| model.layer(k).is_none()) {
            return Err(Error::layer(extra, "Fisher information names a layer the model lacks"));
        }
        Ok(())
    }
}

/// Mean over `data` of per-example squared gradients, for every layer.
///
/// Per-example gradients are used throughout: for a layer with input `x` and
/// pre-activation gradient `δ` on one example the weight gradient is `xᵀδ`,
/// so its square summed over examples is `(X∘X)ᵀ(Δ∘Δ)`.
pub fn accumulate_fisher(model: &NetModel, data: &Dataset) -> Result<FisherMap> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("Fisher information needs a nonempty dataset".into()));
    }
    let stages = model.stages();
    let mut weights: Vec<DenseMatrix> = stages
        .iter()
        .map(|s| DenseMatrix::zeros(s.layer.in_dim(), s.layer.out_dim()))
        .collect();
    let mut biases: Vec<Vec<f64>> = stages.iter().map(|s| vec![0.0; s.layer.out_dim()]).collect();

    let mut start = 0;
    while start < data.len() {
        let end = (start + CHUNK).min(data.len());
        let chunk = data.range(start, end);
        // Run forward for validation side effects (shape checks).
        model.forward(&chunk)?;
        let trace = model.trace(&chunk.inputs);
        let (_, delta_out) = model.loss_and_output_grad(trace.outputs.last().unwrap(), &chunk.targets);
        let mut bad: Option<usize> = None;
        model.backprop(&trace, delta_out, |l, x, delta| {
            if let Some(i) = (0..delta.rows()).find(|&i| delta.row(i).iter().any(|v| !v.is_finite())) {
                bad = Some(bad.map_or(i, |b: usize| b.min(i)));
                return;
            }
            let x2 = squared(x);
            let d2 = squared(delta);
            let acc = x2.t_matmul(&d2);
            weights[l]
                .data_mut()
                .iter_mut()
                .zip(acc.data())
                .for_each(|(w, a)| *w += a);
            for i in 0..d2.rows() {
                biases[l].iter_mut().zip(d2.row(i)).for_each(|(b, v)| *b += v);
            }
        });
        if let Some(i) = bad {
            return Err(Error::NonFiniteGradient { example: start + i });
        }
        start = end;
    }

    let n = data.len() as f64;
    let mut map = FisherMap {
        weights: BTreeMap::new(),
        biases: BTreeMap::new(),
        example_count: data.len(),
    };
    for (l, stage) in stages.iter().enumerate() {
        let name = stage.layer.name().to_string();
        let w = std::mem::replace(&mut weights[l], DenseMatrix::zeros(1, 1)).scaled(1.0 / n);
        if let Some((idx, v)) = w.data().iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("{name}.fisher"),
                row: idx / w.cols(),
                col: idx % w.cols(),
                value: *v,
            });
        }
        map.weights.insert(name.clone(), w);
        if stage.layer.bias().is_some() {
            map.biases.insert(name, biases[l].iter().map(|v| v / n).collect());
        }
    }
    Ok(map)
}

fn squared(m: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)] * m[(i, j)])
}

/// One importance per weight row: the row sums of a Fisher matrix, floored
/// at `1e-6 · mean + 1e-12` so the weighting stays invertible.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceVector {
    values: Vec<f64>,
}

/// Relative part of the importance floor.
pub const FLOOR_RELATIVE: f64 = 1e-6;
/// Absolute part of the importance floor.
pub const FLOOR_ABSOLUTE: f64 = 1e-12;

impl ImportanceVector {
    /// Wraps raw per-row importances, which must be strictly positive.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty importance vector".into()));
        }
        if let Some((row, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
        {
            return Err(Error::NonPositiveImportance { row, value });
        }
        Ok(Self { values })
    }

    /// All rows equally important.
    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Diagonal of the row weighting, `sqrt(importance)`.
    pub fn sqrt_diag(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.sqrt()).collect()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| v * c).collect())
    }
}

/// Row sums of `fisher`, floored per [`ImportanceVector`].
pub fn row_importance(fisher: &DenseMatrix) -> Result<ImportanceVector> {
    if let Some(idx) = fisher.data().iter().position(|v| *v < 0.0 || v.is_nan()) {
        return Err(Error::NegativeWeight {
            context: "row_importance".into(),
            row: idx / fisher.cols(),
            col: idx % fisher.cols(),
            value: fisher.data()[idx],
        });
    }
    let sums = fisher.row_sums();
    let mean = sums.iter().sum::<f64>() / sums.len() as f64;
    let floor = FLOOR_RELATIVE * mean + FLOOR_ABSOLUTE;
    ImportanceVector::new(sums.into_iter().map(|s| s.max(floor)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Layer, LinearLayer, LossHead, Split, Stage};

    fn scalar_model(w: f64) -> NetModel {
        let layer = LinearLayer::new("w", DenseMatrix::from_rows(&[[w]]), None).unwrap();
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

    #[test]
    fn hand_value_34() {
        // Per-example gradients 2x(wx − y): 2 and 8; mean of squares 34.
        let f = accumulate_fisher(&scalar_model(1.0), &scalar_data(&[(1.0, 0.0), (2.0, 0.0)])).unwrap();
        assert_eq!(f.get("w").unwrap()[(0, 0)], 34.0);
        assert_eq!(f.example_count, 2);
    }

    #[test]
    fn not_the_square_of_the_mean_gradient() {
        // Gradients +2 and −2 cancel in the batch mean but not here.
        let f = accumulate_fisher(&scalar_model(1.0), &scalar_data(&[(1.0, 0.0), (1.0, 2.0)])).unwrap();
        assert_eq!(f.get("w").unwrap()[(0, 0)], 4.0);
    }

    #[test]
    fn zero_at_interpolation() {
        let f = accumulate_fisher(&scalar_model(2.0), &scalar_data(&[(1.0, 2.0), (-3.0, -6.0)])).unwrap();
        assert!(f.get("w").unwrap()[(0, 0)] <= 1e-20);
    }

    #[test]
    fn duplicating_examples_is_invariant() {
        let data = scalar_data(&[(1.0, 0.3), (2.0, -1.0), (-0.5, 0.25)]);
        let model = scalar_model(0.7);
        let once = accumulate_fisher(&model, &data).unwrap();
        let twice = accumulate_fisher(&model, &data.repeated(2)).unwrap();
        let a = once.get("w").unwrap()[(0, 0)];
        let b = twice.get("w").unwrap()[(0, 0)];
        assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn row_importance_examples() {
        let ones = DenseMatrix::from_fn(3, 5, |_, _| 1.0);
        assert_eq!(row_importance(&ones).unwrap().values(), &[5.0, 5.0, 5.0]);

        let imp = row_importance(&DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]])).unwrap();
        assert_eq!(imp.values(), &[3.0, 7.0]);
        assert_eq!(imp.sqrt_diag(), vec![3f64.sqrt(), 7f64.sqrt()]);
    }

    #[test]
    fn zero_row_is_floored() {
        let f = DenseMatrix::from_rows(&[[1.0, 1.0], [0.0, 0.0]]);
        let imp = row_importance(&f).unwrap();
        let floor = FLOOR_RELATIVE * 1.0 + FLOOR_ABSOLUTE;
        assert_eq!(imp.values()[1], floor);
        assert!(imp.values()[1] > 0.0);

        let all_zero = row_importance(&DenseMatrix::zeros(2, 2)).unwrap();
        assert_eq!(all_zero.values(), &[FLOOR_ABSOLUTE, FLOOR_ABSOLUTE]);
    }

    #[test]
    fn row_importance_rejects_negative() {
        let f = DenseMatrix::from_rows(&[[1.0, -1.0]]);
        assert!(matches!(row_importance(&f), Err(Error::NegativeWeight { row: 0, col: 1, .. })));
    }

    #[test]
    fn importance_vector_requires_positive() {
        assert!(matches!(
            ImportanceVector::new(vec![1.0, 0.0]),
            Err(Error::NonPositiveImportance { row: 1, .. })
        ));
    }
}
