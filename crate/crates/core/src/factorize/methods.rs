use super::{LowRankMethod, RowScaledSvd};
use crate::error::{Error, Result};
use crate::fisher::ImportanceVector;
use crate::matrix::DenseMatrix;
use crate::svd::svd;

/// Truncated SVD; minimizes the unweighted reconstruction error.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlainSvd;

impl LowRankMethod for PlainSvd {
    fn name(&self) -> &'static str {
        "svd"
    }

    fn needs_importance(&self) -> bool {
        false
    }

    fn decompose(&self, w: &DenseMatrix, _importance: Option<&ImportanceVector>) -> Result<RowScaledSvd> {
        Ok(RowScaledSvd {
            svd: svd(w)?,
            scale: None,
        })
    }
}

/// Fisher-weighted SVD with row-shared importance.
///
/// Minimizes `Σᵢ Iᵢ ‖Wᵢ − (AB)ᵢ‖²` by taking the SVD of `Î·W` with
/// `Î = diag(sqrt(I))`, then removing `Î` from the left factor.
#[derive(Debug, Clone, Copy, Default)]
pub struct FisherWeightedSvd;

impl LowRankMethod for FisherWeightedSvd {
    fn name(&self) -> &'static str {
        "fwsvd"
    }

    fn needs_importance(&self) -> bool {
        true
    }

    fn decompose(&self, w: &DenseMatrix, importance: Option<&ImportanceVector>) -> Result<RowScaledSvd> {
        let importance = importance
            .ok_or_else(|| Error::InvalidArgument("fwsvd needs row importances".into()))?;
        if importance.len() != w.rows() {
            return Err(Error::ShapeMismatch {
                context: "fwsvd importance".into(),
                expected: (w.rows(), 1),
                got: (importance.len(), 1),
            });
        }
        let d = importance.sqrt_diag();
        Ok(RowScaledSvd {
            svd: svd(&w.scale_rows(&d))?,
            scale: Some(d),
        })
    }
}
