use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::container::{DType, FormatError, Tensor, TensorContainer};
use super::manifest::{
    self, DatasetManifest, FisherEntry, FisherManifest, LayerEntry, ModelManifest, SplitEntry,
    DATASET_FORMAT, FISHER_FORMAT, MANIFEST_VERSION, MODEL_FORMAT,
};
use crate::error::{Error, Result};
use crate::fisher::FisherMap;
use crate::matrix::DenseMatrix;
use crate::nn::{Activation, Dataset, FactorizedLinear, Layer, LinearLayer, LossHead, NetModel, Split, Stage, Targets};

/// The manifest that accompanies the container at `path`.
pub fn manifest_path(path: &Path) -> PathBuf {
    path.with_extension("manifest")
}

/// Writes every file to a temporary sibling first and renames only once all
/// writes succeeded.
pub(crate) fn write_atomically(files: &[(&Path, &[u8])]) -> Result<()> {
    let mut staged = Vec::with_capacity(files.len());
    for (path, bytes) in files {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(*path, e))?;
        tmp.write_all(bytes).map_err(|e| Error::io(*path, e))?;
        tmp.as_file().sync_all().map_err(|e| Error::io(*path, e))?;
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            tmp.as_file()
                .set_permissions(std::fs::Permissions::from_mode(0o644))
                .map_err(|e| Error::io(*path, e))?;
        }
        staged.push((tmp, *path));
    }
    for (tmp, path) in staged {
        tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    }
    Ok(())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn format_err(path: &Path) -> impl Fn(FormatError) -> Error + '_ {
    move |source| Error::Format {
        path: path.to_path_buf(),
        source,
    }
}

fn read_pair<M: serde::de::DeserializeOwned>(path: &Path, format: &str) -> Result<(M, TensorContainer)> {
    let mpath = manifest_path(path);
    let manifest = manifest::from_text(&read_text(&mpath)?, format).map_err(format_err(&mpath))?;
    let container = TensorContainer::from_bytes(&read(path)?).map_err(format_err(path))?;
    Ok((manifest, container))
}

fn write_pair<M: serde::Serialize>(path: &Path, manifest: &M, container: &TensorContainer) -> Result<()> {
    let text = manifest::to_text(manifest);
    let bytes = container.to_bytes();
    let mpath = manifest_path(path);
    write_atomically(&[(path, &bytes), (&mpath, text.as_bytes())])
}

fn matrix_tensor(m: &DenseMatrix, dtype: DType) -> Tensor {
    Tensor::new(vec![m.rows(), m.cols()], m.data().to_vec()).with_dtype(dtype)
}

fn vector_tensor(v: &[f64], dtype: DType) -> Tensor {
    Tensor::new(vec![v.len()], v.to_vec()).with_dtype(dtype)
}

/// Checks that the container holds exactly `expected`.
fn check_names(container: &TensorContainer, expected: &BTreeSet<String>) -> Result<(), FormatError> {
    if let Some(missing) = expected.iter().find(|n| container.get(n).is_none()) {
        return Err(FormatError::MissingTensor(missing.clone()));
    }
    if let Some(extra) = container.names().find(|n| !expected.contains(*n)) {
        return Err(FormatError::Mismatch(format!(
            "container holds '{extra}' which the manifest does not list"
        )));
    }
    Ok(())
}

fn take_matrix(container: &TensorContainer, name: &str, shape: (usize, usize)) -> Result<DenseMatrix, FormatError> {
    let t = container
        .get(name)
        .ok_or_else(|| FormatError::MissingTensor(name.to_string()))?;
    if t.dims != [shape.0, shape.1] {
        return Err(FormatError::Mismatch(format!(
            "'{name}' has dims {:?}, manifest implies {:?}",
            t.dims,
            [shape.0, shape.1]
        )));
    }
    // The shape check above guarantees the length.
    Ok(DenseMatrix::from_vec(shape.0, shape.1, t.data.clone()))
}

fn take_vector(container: &TensorContainer, name: &str, len: usize) -> Result<Vec<f64>, FormatError> {
    let t = container
        .get(name)
        .ok_or_else(|| FormatError::MissingTensor(name.to_string()))?;
    if t.dims != [len] {
        return Err(FormatError::Mismatch(format!(
            "'{name}' has dims {:?}, manifest implies [{len}]",
            t.dims
        )));
    }
    Ok(t.data.clone())
}

pub fn save_model(model: &NetModel, path: &Path) -> Result<()> {
    save_model_as(model, path, DType::F64)
}

/// Saves at the given precision. `DType::F32` rounds every parameter.
pub fn save_model_as(model: &NetModel, path: &Path, dtype: DType) -> Result<()> {
    let mut container = TensorContainer::new();
    let mut layers = Vec::new();
    for stage in model.stages() {
        let layer = &stage.layer;
        let name = layer.name();
        let insert = |c: &mut TensorContainer, key: String, t: Tensor| c.insert(key, t).map_err(format_err(path));
        let rank = match layer {
            Layer::Dense(l) => {
                insert(&mut container, format!("{name}.weight"), matrix_tensor(&l.weight, dtype))?;
                None
            }
            Layer::Factorized(f) => {
                insert(&mut container, format!("{name}.a"), matrix_tensor(&f.a, dtype))?;
                insert(&mut container, format!("{name}.b"), matrix_tensor(&f.b, dtype))?;
                Some(f.rank())
            }
        };
        if let Some(b) = layer.bias() {
            insert(&mut container, format!("{name}.bias"), vector_tensor(b, dtype))?;
        }
        layers.push(LayerEntry {
            name: name.to_string(),
            kind: if rank.is_some() { "factorized" } else { "dense" }.to_string(),
            activation: stage.activation.name().to_string(),
            in_dim: layer.in_dim(),
            out_dim: layer.out_dim(),
            rank,
            bias: layer.bias().is_some(),
        });
    }
    let manifest = ModelManifest {
        format: MODEL_FORMAT.into(),
        version: MANIFEST_VERSION,
        loss: model.loss_head().name().into(),
        layers,
        provenance: model.provenance.clone(),
    };
    write_pair(path, &manifest, &container)
}

pub fn load_model(path: &Path) -> Result<NetModel> {
    let (manifest, container): (ModelManifest, _) = read_pair(path, MODEL_FORMAT)?;
    let fe = format_err(path);
    let bad = |msg: String| Error::Format {
        path: manifest_path(path),
        source: FormatError::Manifest(msg),
    };

    let mut expected = BTreeSet::new();
    for l in &manifest.layers {
        match l.kind.as_str() {
            "dense" => {
                expected.insert(format!("{}.weight", l.name));
            }
            "factorized" => {
                expected.insert(format!("{}.a", l.name));
                expected.insert(format!("{}.b", l.name));
            }
            other => return Err(bad(format!("layer '{}' has unknown kind '{other}'", l.name))),
        }
        if l.bias {
            expected.insert(format!("{}.bias", l.name));
        }
    }
    check_names(&container, &expected).map_err(&fe)?;

    let loss = LossHead::from_name(&manifest.loss).ok_or_else(|| bad(format!("unknown loss head '{}'", manifest.loss)))?;
    let mut stages = Vec::with_capacity(manifest.layers.len());
    for l in &manifest.layers {
        let activation = Activation::from_name(&l.activation)
            .ok_or_else(|| bad(format!("layer '{}' has unknown activation '{}'", l.name, l.activation)))?;
        let bias = if l.bias {
            Some(take_vector(&container, &format!("{}.bias", l.name), l.out_dim).map_err(&fe)?)
        } else {
            None
        };
        let layer = if l.kind == "dense" {
            let w = take_matrix(&container, &format!("{}.weight", l.name), (l.in_dim, l.out_dim)).map_err(&fe)?;
            Layer::Dense(LinearLayer::new(l.name.clone(), w, bias)?)
        } else {
            let r = l
                .rank
                .ok_or_else(|| bad(format!("factorized layer '{}' has no rank", l.name)))?;
            let a = take_matrix(&container, &format!("{}.a", l.name), (l.in_dim, r)).map_err(&fe)?;
            let b = take_matrix(&container, &format!("{}.b", l.name), (r, l.out_dim)).map_err(&fe)?;
            Layer::Factorized(FactorizedLinear::new(l.name.clone(), a, b, bias)?)
        };
        stages.push(Stage { layer, activation });
    }
    let mut model = NetModel::new(stages, loss)?;
    model.provenance = manifest.provenance;
    Ok(model)
}

pub fn save_fisher(fisher: &FisherMap, path: &Path) -> Result<()> {
    fisher.validate()?;
    let mut container = TensorContainer::new();
    let mut layers = Vec::new();
    for (name, m) in &fisher.weights {
        container
            .insert(format!("{name}.fisher"), matrix_tensor(m, DType::F64))
            .map_err(format_err(path))?;
        let bias = fisher.biases.get(name);
        if let Some(b) = bias {
            container
                .insert(format!("{name}.bias_fisher"), vector_tensor(b, DType::F64))
                .map_err(format_err(path))?;
        }
        layers.push(FisherEntry {
            name: name.clone(),
            rows: m.rows(),
            cols: m.cols(),
            bias: bias.is_some(),
        });
    }
    let manifest = FisherManifest {
        format: FISHER_FORMAT.into(),
        version: MANIFEST_VERSION,
        example_count: fisher.example_count,
        layers,
    };
    write_pair(path, &manifest, &container)
}

/// Loads a sidecar and rejects negative or non-finite entries.
pub fn load_fisher(path: &Path) -> Result<FisherMap> {
    let (manifest, container): (FisherManifest, _) = read_pair(path, FISHER_FORMAT)?;
    let fe = format_err(path);
    let mut expected = BTreeSet::new();
    for l in &manifest.layers {
        expected.insert(format!("{}.fisher", l.name));
        if l.bias {
            expected.insert(format!("{}.bias_fisher", l.name));
        }
    }
    check_names(&container, &expected).map_err(&fe)?;

    let mut weights = BTreeMap::new();
    let mut biases = BTreeMap::new();
    for l in &manifest.layers {
        let m = take_matrix(&container, &format!("{}.fisher", l.name), (l.rows, l.cols)).map_err(&fe)?;
        weights.insert(l.name.clone(), m);
        if l.bias {
            let b = take_vector(&container, &format!("{}.bias_fisher", l.name), l.cols).map_err(&fe)?;
            if let Some(v) = b.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                return Err(Error::InvalidArgument(format!(
                    "{}.bias_fisher holds {v}, entries must be nonnegative",
                    l.name
                )));
            }
            biases.insert(l.name.clone(), b);
        }
    }
    let fisher = FisherMap {
        weights,
        biases,
        example_count: manifest.example_count,
    };
    fisher.validate()?;
    Ok(fisher)
}

/// [`load_fisher`], then checks the sidecar covers exactly `model`'s layers.
pub fn load_fisher_for(path: &Path, model: &NetModel) -> Result<FisherMap> {
    let fisher = load_fisher(path)?;
    fisher.check_covers(model)?;
    Ok(fisher)
}

/// Saves one or more splits into a single container.
pub fn save_datasets(splits: &[&Dataset], path: &Path) -> Result<()> {
    let mut container = TensorContainer::new();
    let mut entries = Vec::new();
    for d in splits {
        let split = d.split.name();
        let insert = |c: &mut TensorContainer, key: String, t: Tensor| c.insert(key, t).map_err(format_err(path));
        insert(&mut container, format!("{split}.inputs"), matrix_tensor(&d.inputs, DType::F64))?;
        let (kind, target_dim) = match &d.targets {
            Targets::Regression(y) => {
                insert(&mut container, format!("{split}.targets"), matrix_tensor(y, DType::F64))?;
                ("regression", Some(y.cols()))
            }
            Targets::Classes(c) => {
                let v: Vec<f64> = c.iter().map(|&k| k as f64).collect();
                insert(&mut container, format!("{split}.labels"), vector_tensor(&v, DType::F64))?;
                ("classes", None)
            }
        };
        entries.push(SplitEntry {
            name: split.to_string(),
            examples: d.len(),
            input_dim: d.input_dim(),
            targets: kind.to_string(),
            target_dim,
        });
    }
    let manifest = DatasetManifest {
        format: DATASET_FORMAT.into(),
        version: MANIFEST_VERSION,
        splits: entries,
    };
    write_pair(path, &manifest, &container)
}

pub fn load_datasets(path: &Path) -> Result<Vec<Dataset>> {
    let (manifest, container): (DatasetManifest, _) = read_pair(path, DATASET_FORMAT)?;
    let fe = format_err(path);
    let bad = |msg: String| Error::Format {
        path: manifest_path(path),
        source: FormatError::Manifest(msg),
    };
    let mut expected = BTreeSet::new();
    for s in &manifest.splits {
        expected.insert(format!("{}.inputs", s.name));
        match s.targets.as_str() {
            "regression" => expected.insert(format!("{}.targets", s.name)),
            "classes" => expected.insert(format!("{}.labels", s.name)),
            other => return Err(bad(format!("split '{}' has unknown target kind '{other}'", s.name))),
        };
    }
    check_names(&container, &expected).map_err(&fe)?;

    let mut out = Vec::with_capacity(manifest.splits.len());
    for s in &manifest.splits {
        let split = Split::from_name(&s.name).ok_or_else(|| bad(format!("unknown split '{}'", s.name)))?;
        let inputs = take_matrix(&container, &format!("{}.inputs", s.name), (s.examples, s.input_dim)).map_err(&fe)?;
        let targets = if s.targets == "regression" {
            let dim = s
                .target_dim
                .ok_or_else(|| bad(format!("split '{}' has no target_dim", s.name)))?;
            Targets::Regression(take_matrix(&container, &format!("{}.targets", s.name), (s.examples, dim)).map_err(&fe)?)
        } else {
            let raw = take_vector(&container, &format!("{}.labels", s.name), s.examples).map_err(&fe)?;
            let mut labels = Vec::with_capacity(raw.len());
            for v in raw {
                if !(v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64) {
                    return Err(fe(FormatError::InvalidValue {
                        name: format!("{}.labels", s.name),
                        reason: format!("{v} is not a class index"),
                    }));
                }
                labels.push(v as usize);
            }
            Targets::Classes(labels)
        };
        out.push(Dataset::new(inputs, targets, split)?);
    }
    Ok(out)
}

/// The split named `split` from the container at `path`.
pub fn load_split(path: &Path, split: Split) -> Result<Dataset> {
    load_datasets(path)?
        .into_iter()
        .find(|d| d.split == split)
        .ok_or_else(|| Error::InvalidArgument(format!("{} holds no '{}' split", path.display(), split.name())))
}
