//! Diagnostics comparing factorization methods on a trained model: the
//! grouped singular-value truncation attack and rank-ratio sweeps.

mod demo;
mod groups;

pub use demo::{make_demo_task, make_demo_task_with, sample_inputs, teacher_outputs, DemoConfig, DemoTask};
pub use groups::{group_partition, group_truncate_layer, group_truncate_scaled, GroupPartition};

use crate::error::{Error, Result};
use crate::factorize::{compress_model, registry, CompressionSpec, RowScaledSvd};
use crate::fisher::{row_importance, FisherMap};
use crate::matrix::frobenius_error;
use crate::nn::{train, Dataset, Layer, LinearLayer, LossHead, Metric, NetModel, TrainConfig};

/// Loss for regression heads, accuracy for classification heads.
pub fn default_metric(model: &NetModel) -> Metric {
    match model.loss_head() {
        LossHead::MeanSquaredError => Metric::Loss,
        LossHead::SoftmaxCrossEntropy => Metric::Accuracy,
    }
}

/// `baseline − value` when higher is better, `value − baseline` for losses,
/// so a positive drop always means worse.
pub fn performance_drop(metric: Metric, baseline: f64, value: f64) -> f64 {
    if metric.higher_is_better() {
        baseline - value
    } else {
        value - baseline
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupCell {
    pub method: String,
    /// 1-based group index.
    pub group: usize,
    pub metric: f64,
    pub drop: f64,
    /// Mean over layers of `‖W − W̄‖_F / ‖W‖_F`.
    pub recon_err_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupTruncationReport {
    pub metric: Metric,
    pub baseline: f64,
    pub groups: usize,
    /// Layers the attack touched, in model order.
    pub layers: Vec<String>,
    pub seed: Option<u64>,
    /// Method-major, then group.
    pub cells: Vec<GroupCell>,
}

impl GroupTruncationReport {
    pub fn cell(&self, method: &str, group: usize) -> Option<&GroupCell> {
        self.cells.iter().find(|c| c.method == method && c.group == group)
    }

    /// Mean of `field` over groups `from..=to` for `method`.
    pub fn mean_over(&self, method: &str, from: usize, to: usize, field: impl Fn(&GroupCell) -> f64) -> f64 {
        let vals: Vec<f64> = (from..=to)
            .filter_map(|g| self.cell(method, g))
            .map(field)
            .collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

/// Truncates group `g` of every eligible layer at once and measures the
/// effect, for each compared method and each group.
///
/// A layer is eligible when it is dense and has at least `groups` singular
/// values; smaller layers are left untouched.
pub fn run_group_truncation(
    model: &NetModel,
    fisher: &FisherMap,
    data: &Dataset,
    groups: usize,
) -> Result<GroupTruncationReport> {
    run_group_truncation_with(model, fisher, data, groups, &registry::COMPARED)
}

pub fn run_group_truncation_with(
    model: &NetModel,
    fisher: &FisherMap,
    data: &Dataset,
    groups: usize,
    methods: &[&str],
) -> Result<GroupTruncationReport> {
    if groups < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 groups, got {groups}")));
    }
    fisher.check_covers(model)?;
    let metric = default_metric(model);
    let baseline = model.evaluate(data, metric)?;

    let eligible: Vec<&LinearLayer> = model
        .stages()
        .iter()
        .filter_map(|s| match &s.layer {
            Layer::Dense(l) if l.weight.rows().min(l.weight.cols()) >= groups => Some(l),
            _ => None,
        })
        .collect();
    if eligible.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no dense layer has at least {groups} singular values"
        )));
    }

    let mut cells = Vec::with_capacity(methods.len() * groups);
    for &name in methods {
        let method = registry::get(name)?;
        let mut prepared: Vec<(&LinearLayer, RowScaledSvd, GroupPartition)> = Vec::new();
        for layer in &eligible {
            let importance = if method.needs_importance() {
                Some(row_importance(fisher.get(&layer.name).unwrap())?)
            } else {
                None
            };
            let dec = method.decompose(&layer.weight, importance.as_ref())?;
            let partition = group_partition(dec.rank(), groups)?;
            prepared.push((layer, dec, partition));
        }
        for g in 1..=groups {
            let mut attacked = model.clone();
            let mut rel_sum = 0.0;
            for (layer, dec, partition) in &prepared {
                let w_bar = group_truncate_scaled(dec, g, partition)?;
                let norm = layer.weight.frobenius_norm();
                let err = frobenius_error(&layer.weight, &w_bar)?;
                rel_sum += if norm > 0.0 { err / norm } else { 0.0 };
                attacked.replace_layer(
                    &layer.name,
                    Layer::Dense(LinearLayer {
                        name: layer.name.clone(),
                        weight: w_bar,
                        bias: layer.bias.clone(),
                    }),
                )?;
            }
            let value = attacked.evaluate(data, metric)?;
            cells.push(GroupCell {
                method: name.to_string(),
                group: g,
                metric: value,
                drop: performance_drop(metric, baseline, value),
                recon_err_mean: rel_sum / prepared.len() as f64,
            });
        }
    }

    Ok(GroupTruncationReport {
        metric,
        baseline,
        groups,
        layers: eligible.iter().map(|l| l.name.clone()).collect(),
        seed: None,
        cells,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub method: String,
    pub ratio: f64,
    pub metric_raw: f64,
    pub metric_finetuned: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankSweepReport {
    pub metric: Metric,
    pub baseline: f64,
    pub ratios: Vec<f64>,
    pub seed: Option<u64>,
    /// Method-major, then ratio.
    pub rows: Vec<SweepRow>,
}

impl RankSweepReport {
    pub fn row(&self, method: &str, ratio: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.method == method && r.ratio == ratio)
    }
}

/// For each compared method and ratio: compress a fresh copy of `model`,
/// evaluate it on `eval`, and, if `finetune` is given, train it further on
/// `train` and evaluate again.
pub fn run_rank_sweep(
    model: &NetModel,
    fisher: &FisherMap,
    train_data: &Dataset,
    eval: &Dataset,
    ratios: &[f64],
    finetune: Option<&TrainConfig>,
) -> Result<RankSweepReport> {
    run_rank_sweep_with(model, fisher, train_data, eval, ratios, finetune, &registry::COMPARED)
}

pub fn run_rank_sweep_with(
    model: &NetModel,
    fisher: &FisherMap,
    train_data: &Dataset,
    eval: &Dataset,
    ratios: &[f64],
    finetune: Option<&TrainConfig>,
    methods: &[&str],
) -> Result<RankSweepReport> {
    if let Some(&bad) = ratios.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
        return Err(Error::InvalidArgument(format!("rank ratio {bad} is outside (0, 1]")));
    }
    if ratios.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("rank ratios must be strictly increasing".into()));
    }
    fisher.check_covers(model)?;
    let metric = default_metric(model);
    let baseline = model.evaluate(eval, metric)?;

    let mut rows = Vec::with_capacity(methods.len() * ratios.len());
    for &method in methods {
        for &ratio in ratios {
            let (compressed, _) = compress_model(model, Some(fisher), &CompressionSpec::new(method, ratio))?;
            let metric_raw = compressed.evaluate(eval, metric)?;
            let metric_finetuned = match finetune {
                Some(cfg) => Some(train(&compressed, train_data, cfg)?.evaluate(eval, metric)?),
                None => None,
            };
            rows.push(SweepRow {
                method: method.to_string(),
                ratio,
                metric_raw,
                metric_finetuned,
            });
        }
    }
    Ok(RankSweepReport {
        metric,
        baseline,
        ratios: ratios.to_vec(),
        seed: None,
        rows,
    })
}
