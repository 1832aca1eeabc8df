//! Low-rank compression of linear layers by truncated SVD and Fisher-weighted
//! SVD, with the small dense-network toolkit needed to train, measure and
//! compare them.

pub mod analyzer;
pub mod cli;
pub mod error;
pub mod factorize;
pub mod fisher;
pub mod io;
pub mod matrix;
pub mod nn;
pub mod svd;

pub use error::{Error, ErrorKind, Result};
pub use factorize::{compress_model, registry, CompressionReport, CompressionSpec, LowRankMethod};
pub use fisher::{accumulate_fisher, row_importance, FisherMap, ImportanceVector};
pub use matrix::DenseMatrix;
pub use nn::{train, Dataset, NetModel, TrainConfig};
pub use svd::{svd, SvdResult};
