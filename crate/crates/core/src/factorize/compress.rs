use std::collections::BTreeSet;

use super::{rank_for_ratio, registry};
use crate::error::{Error, Result};
use crate::fisher::{row_importance, FisherMap, ImportanceVector};
use crate::matrix::{frobenius_error, row_weighted_error};
use crate::nn::{Layer, NetModel};

#[derive(Debug, Clone, PartialEq)]
pub enum LayerFilter {
    /// Every dense layer.
    All,
    Named(BTreeSet<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressionSpec {
    /// Registered method name, see [`registry`].
    pub method: String,
    pub ratio: f64,
    /// Overrides the ratio-derived rank for every targeted layer.
    pub rank: Option<usize>,
    pub layers: LayerFilter,
}

impl CompressionSpec {
    pub fn new(method: impl Into<String>, ratio: f64) -> Self {
        Self {
            method: method.into(),
            ratio,
            rank: None,
            layers: LayerFilter::All,
        }
    }
}

/// One row per compressed layer. Parameter counts cover the weight matrices
/// only; the bias is carried over unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerReport {
    pub layer: String,
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub params_before: usize,
    pub params_after: usize,
    /// `‖W − AB‖_F`.
    pub err_unweighted: f64,
    /// `Σᵢ Iᵢ ‖Wᵢ − (AB)ᵢ‖²` with the floored row importances, or NaN when
    /// no Fisher information was supplied.
    pub err_weighted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressionReport {
    pub method: String,
    pub ratio: f64,
    pub layers: Vec<LayerReport>,
}

impl CompressionReport {
    /// Negative when the factors outgrow the dense weights.
    pub fn params_removed(&self) -> i64 {
        self.layers.iter().map(|l| l.params_before as i64 - l.params_after as i64).sum()
    }
}

/// Replaces the targeted dense layers by rank-`r` factorizations.
pub fn compress_model(
    model: &NetModel,
    fisher: Option<&FisherMap>,
    spec: &CompressionSpec,
) -> Result<(NetModel, CompressionReport)> {
    let method = registry::get(&spec.method)?;
    if method.needs_importance() && fisher.is_none() {
        return Err(Error::InvalidArgument(format!(
            "method '{}' needs Fisher information",
            spec.method
        )));
    }
    if !(spec.ratio > 0.0 && spec.ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!("rank ratio {} is outside (0, 1]", spec.ratio)));
    }

    let targets: Vec<String> = match &spec.layers {
        LayerFilter::All => model
            .stages()
            .iter()
            .filter(|s| matches!(s.layer, Layer::Dense(_)))
            .map(|s| s.layer.name().to_string())
            .collect(),
        LayerFilter::Named(names) => {
            for name in names {
                match model.layer(name) {
                    None => return Err(Error::UnknownLayer(name.clone())),
                    Some(Layer::Factorized(_)) => {
                        return Err(Error::layer(name, "layer is already factorized"))
                    }
                    Some(Layer::Dense(_)) => {}
                }
            }
            // Model order, not set order.
            model
                .layer_names()
                .into_iter()
                .filter(|n| names.contains(n))
                .collect()
        }
    };

    let mut out = model.clone();
    let mut rows = Vec::with_capacity(targets.len());
    for name in &targets {
        let Some(Layer::Dense(dense)) = model.layer(name) else {
            unreachable!("targets are dense layers")
        };
        let (n, m) = dense.weight.shape();
        let r = match spec.rank {
            Some(r) => {
                if r == 0 || r > n.min(m) {
                    return Err(Error::RankOutOfRange { rank: r, max: n.min(m) });
                }
                r
            }
            None => rank_for_ratio(n, m, spec.ratio)?,
        };
        let importance: Option<ImportanceVector> = match fisher {
            Some(f) => {
                let fm = f
                    .get(name)
                    .ok_or_else(|| Error::layer(name, "no Fisher information for this layer"))?;
                if fm.shape() != (n, m) {
                    return Err(Error::ShapeMismatch {
                        context: format!("Fisher information for '{name}'"),
                        expected: (n, m),
                        got: fm.shape(),
                    });
                }
                Some(row_importance(fm)?)
            }
            None => None,
        };

        let decomposition = method.decompose(&dense.weight, importance.as_ref())?;
        let factorized = decomposition.factorized(name, dense.bias.clone(), r)?;
        let approx = factorized.product();
        let err_unweighted = frobenius_error(&dense.weight, &approx)?;
        let err_weighted = match &importance {
            Some(imp) => row_weighted_error(&dense.weight, &approx, imp.values())?,
            None => f64::NAN,
        };
        rows.push(LayerReport {
            layer: name.clone(),
            n,
            m,
            r,
            params_before: n * m,
            params_after: n * r + m * r,
            err_unweighted,
            err_weighted,
        });
        out.replace_with_factorized(name, factorized)?;
    }
    out.provenance.insert("compress.method".into(), spec.method.clone());
    out.provenance.insert("compress.ratio".into(), spec.ratio.to_string());

    Ok((
        out,
        CompressionReport {
            method: spec.method.clone(),
            ratio: spec.ratio,
            layers: rows,
        },
    ))
}
