//! On-disk formats: tensor containers with TOML manifests for models,
//! Fisher sidecars and datasets, and CSV reports.

mod checkpoint;
mod container;
mod manifest;
mod report;

pub use checkpoint::{
    load_datasets, load_fisher, load_fisher_for, load_model, load_split, manifest_path, save_datasets, save_fisher,
    save_model, save_model_as,
};
pub use container::{DType, FormatError, Tensor, TensorContainer, MAGIC, VERSION};
pub use manifest::{DatasetManifest, FisherManifest, LayerEntry, ModelManifest, SplitEntry};
pub use report::{format_number, write_csv, CsvReport, COMPRESSION_COLUMNS, GROUP_COLUMNS, SWEEP_COLUMNS};
