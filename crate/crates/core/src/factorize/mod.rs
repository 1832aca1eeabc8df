//! Low-rank factorization of linear layers.
//!
//! Every method is a [`LowRankMethod`]: it turns a weight matrix (and,
//! optionally, per-row importances) into a [`RowScaledSvd`], the SVD of a
//! row-scaled copy `D·W` together with the scaling `D`. Truncating that SVD
//! and folding `D⁻¹` back into the left factor yields the compressed layer.
//! Plain SVD uses `D = I`; Fisher-weighted SVD uses `D = diag(sqrt(importance))`.
//!
//! Methods are looked up by name through [`registry`], which is how the CLI
//! and the analyzer select them at runtime.

mod compress;
mod methods;
pub mod registry;

pub use compress::{compress_model, CompressionReport, CompressionSpec, LayerFilter, LayerReport};
pub use methods::{FisherWeightedSvd, PlainSvd};

use crate::error::{Error, Result};
use crate::fisher::ImportanceVector;
use crate::matrix::DenseMatrix;
use crate::nn::FactorizedLinear;
use crate::svd::SvdResult;

/// A factorization strategy.
pub trait LowRankMethod: Send + Sync {
    /// Registry key, e.g. `"svd"`.
    fn name(&self) -> &'static str;

    /// Whether [`LowRankMethod::decompose`] needs row importances.
    fn needs_importance(&self) -> bool;

    fn decompose(&self, w: &DenseMatrix, importance: Option<&ImportanceVector>) -> Result<RowScaledSvd>;
}

/// SVD of `diag(scale)·W`. With `scale = None` the scaling is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct RowScaledSvd {
    pub svd: SvdResult,
    pub scale: Option<Vec<f64>>,
}

impl RowScaledSvd {
    pub fn rank(&self) -> usize {
        self.svd.rank()
    }

    /// Undoes the row scaling of a matrix in the scaled space.
    fn unscale(&self, m: DenseMatrix) -> DenseMatrix {
        match &self.scale {
            None => m,
            Some(d) => {
                let inv: Vec<f64> = d.iter().map(|x| 1.0 / x).collect();
                m.scale_rows(&inv)
            }
        }
    }

    /// `A = D⁻¹·U_r·diag(S_r)`, `B = V_rᵀ`.
    pub fn factors(&self, r: usize) -> Result<(DenseMatrix, DenseMatrix)> {
        let t = self.svd.truncate(r)?;
        let us = DenseMatrix::from_fn(t.u.rows(), r, |i, j| t.u[(i, j)] * t.s[j]);
        Ok((self.unscale(us), t.v.transpose()))
    }

    /// `D⁻¹·U·diag(s)·Vᵀ` for replacement singular values `s`.
    pub fn reconstruct_with(&self, s: &[f64]) -> DenseMatrix {
        self.unscale(self.svd.reconstruct_with(s))
    }

    pub fn factorized(&self, name: &str, bias: Option<Vec<f64>>, r: usize) -> Result<FactorizedLinear> {
        let (a, b) = self.factors(r)?;
        FactorizedLinear::new(name, a, b, bias)
    }
}

/// `max(1, floor(ratio · min(n, m)))`.
pub fn rank_for_ratio(n: usize, m: usize, ratio: f64) -> Result<usize> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!("rank ratio {ratio} is outside (0, 1]")));
    }
    Ok(((ratio * n.min(m) as f64).floor() as usize).max(1))
}

fn check_rank(w: &DenseMatrix, r: usize) -> Result<()> {
    let max = w.rows().min(w.cols());
    if r == 0 || r > max {
        return Err(Error::RankOutOfRange { rank: r, max });
    }
    Ok(())
}

/// Rank-`r` truncated SVD of `w` as a two-matrix layer, bias carried over.
pub fn factorize_svd(w: &DenseMatrix, bias: Option<Vec<f64>>, r: usize) -> Result<FactorizedLinear> {
    check_rank(w, r)?;
    PlainSvd.decompose(w, None)?.factorized("factorized", bias, r)
}

/// Rank-`r` Fisher-weighted SVD of `w` as a two-matrix layer.
pub fn factorize_fwsvd(
    w: &DenseMatrix,
    importance: &ImportanceVector,
    bias: Option<Vec<f64>>,
    r: usize,
) -> Result<FactorizedLinear> {
    check_rank(w, r)?;
    FisherWeightedSvd
        .decompose(w, Some(importance))?
        .factorized("factorized", bias, r)
}
