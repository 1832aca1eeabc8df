//! Human-readable TOML manifests written next to each container.

use std::collections::BTreeMap;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::container::FormatError;

pub const MODEL_FORMAT: &str = "fwsvd-model";
pub const FISHER_FORMAT: &str = "fwsvd-fisher";
pub const DATASET_FORMAT: &str = "fwsvd-dataset";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format: String,
    pub version: u32,
    pub loss: String,
    pub layers: Vec<LayerEntry>,
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub name: String,
    /// `dense` or `factorized`.
    pub kind: String,
    pub activation: String,
    pub in_dim: usize,
    pub out_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    pub bias: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherManifest {
    pub format: String,
    pub version: u32,
    pub example_count: usize,
    pub layers: Vec<FisherEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub bias: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub splits: Vec<SplitEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub name: String,
    pub examples: usize,
    pub input_dim: usize,
    /// `regression` or `classes`.
    pub targets: String,
    /// Output width for regression targets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_dim: Option<usize>,
}

pub(crate) fn to_text<T: Serialize>(manifest: &T) -> String {
    toml::to_string(manifest).expect("manifest types always serialize")
}

pub(crate) fn from_text<T: DeserializeOwned>(text: &str, format: &str) -> Result<T, FormatError> {
    #[derive(Deserialize)]
    struct Header {
        format: String,
        version: u32,
    }
    let header: Header = toml::from_str(text).map_err(|e| FormatError::Manifest(e.message().to_string()))?;
    if header.format != format {
        return Err(FormatError::Manifest(format!(
            "expected a '{format}' manifest, found '{}'",
            header.format
        )));
    }
    if header.version != MANIFEST_VERSION {
        return Err(FormatError::UnsupportedVersion(header.version));
    }
    toml::from_str(text).map_err(|e| FormatError::Manifest(e.message().to_string()))
}
