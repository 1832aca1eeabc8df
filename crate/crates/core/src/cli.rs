//! The `fwsvd` command line: train the demo student, estimate Fisher
//! information, compress, and run the two analyses.
//!
//! Progress goes to standard error; results go only to files.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analyzer::{make_demo_task, run_group_truncation, run_rank_sweep};
use crate::error::{Error, ErrorKind};
use crate::factorize::{compress_model, registry, CompressionSpec};
use crate::fisher::accumulate_fisher;
use crate::io::{load_fisher_for, load_model, load_split, save_datasets, save_fisher, save_model, write_csv};
use crate::nn::{train, Metric, NetModel, Split, TrainConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;
pub const EXIT_IO: u8 = 5;

pub const MODEL_FILE: &str = "model.fwsv";
pub const DATA_FILE: &str = "data.fwsv";
pub const COMPRESSION_REPORT_FILE: &str = "compression.csv";

#[derive(Debug, Parser)]
#[command(name = "fwsvd", version, about = "SVD and Fisher-weighted SVD compression of linear layers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the demo student and save it with its train/eval data.
    TrainDemo(TrainDemoArgs),
    /// Estimate empirical Fisher information on the train split.
    Fisher(FisherArgs),
    /// Factorize every dense layer and save the model with a CSV report.
    Compress(CompressArgs),
    /// Zero each singular-value group in turn and report the damage.
    GroupTruncation(GroupArgs),
    /// Compress at each rank ratio with every method and report the metric.
    RankSweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct TrainDemoArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FisherArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Sidecar container path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Required by methods that use Fisher information.
    #[arg(long)]
    pub fisher: Option<PathBuf>,
    #[arg(long, default_value = "fwsvd")]
    pub method: String,
    #[arg(long)]
    pub ratio: f64,
    /// Fine-tune the compressed model for this many epochs on the train split.
    #[arg(long)]
    pub finetune_epochs: Option<usize>,
    /// Dataset container, needed for fine-tuning.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output directory for the model and report.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GroupArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub fisher: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub groups: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub fisher: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0"
    )]
    pub ratios: Vec<f64>,
    #[arg(long)]
    pub finetune_epochs: Option<usize>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Run(e) => match e.kind() {
                ErrorKind::Validation => EXIT_VALIDATION,
                ErrorKind::Numerical => EXIT_NUMERICAL,
                ErrorKind::Io => EXIT_IO,
            },
        }
    }
}

type CliResult = std::result::Result<(), CliError>;

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::TrainDemo(a) => cmd_train_demo(&a),
        Command::Fisher(a) => cmd_fisher(&a),
        Command::Compress(a) => cmd_compress(&a),
        Command::GroupTruncation(a) => cmd_group_truncation(&a),
        Command::RankSweep(a) => cmd_rank_sweep(&a),
    }
}

fn progress(msg: impl AsRef<str>) {
    eprintln!("fwsvd: {}", msg.as_ref());
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn finetune_config(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        seed,
        ..TrainConfig::default()
    }
}

pub fn cmd_train_demo(a: &TrainDemoArgs) -> CliResult {
    let task = make_demo_task(a.seed)?;
    let config = TrainConfig {
        seed: task.train_seed,
        ..TrainConfig::default()
    };
    progress(format!(
        "training demo student (seed {}, {} epochs, {} examples)",
        a.seed,
        config.epochs,
        task.train.len()
    ));
    let mut student = train(&task.student, &task.train, &config)?;
    student.provenance.insert("demo.seed".into(), a.seed.to_string());
    let eval_loss = student.evaluate(&task.eval, Metric::Loss)?;
    progress(format!("eval loss {eval_loss}"));

    create_dir(&a.out)?;
    save_model(&student, &a.out.join(MODEL_FILE))?;
    save_datasets(&[&task.train, &task.eval], &a.out.join(DATA_FILE))?;
    progress(format!("wrote {}", a.out.display()));
    Ok(())
}

pub fn cmd_fisher(a: &FisherArgs) -> CliResult {
    let model = load_model(&a.model)?;
    let data = load_split(&a.data, Split::Train)?;
    progress(format!("accumulating Fisher information over {} examples", data.len()));
    let fisher = accumulate_fisher(&model, &data)?;
    save_fisher(&fisher, &a.out)?;
    progress(format!("wrote {}", a.out.display()));
    Ok(())
}

pub fn cmd_compress(a: &CompressArgs) -> CliResult {
    let method = registry::get(&a.method).map_err(|e| CliError::Usage(e.to_string()))?;
    if method.needs_importance() && a.fisher.is_none() {
        return Err(CliError::Usage(format!("--method {} requires --fisher", a.method)));
    }
    if a.finetune_epochs.is_some() && a.data.is_none() {
        return Err(CliError::Usage("--finetune-epochs requires --data".into()));
    }

    let model = load_model(&a.model)?;
    let fisher = a.fisher.as_deref().map(|p| load_fisher_for(p, &model)).transpose()?;
    let spec = CompressionSpec::new(a.method.clone(), a.ratio);
    progress(format!("compressing with {} at ratio {}", a.method, a.ratio));
    let (mut compressed, report) = compress_model(&model, fisher.as_ref(), &spec)?;
    if let (Some(epochs), Some(data)) = (a.finetune_epochs, a.data.as_deref()) {
        let train_data = load_split(data, Split::Train)?;
        let config = finetune_config(epochs, a.seed);
        progress(format!("fine-tuning for {epochs} epochs"));
        let before = std::mem::take(&mut compressed.provenance);
        compressed = train(&compressed, &train_data, &config)?;
        for (k, v) in config.provenance() {
            compressed.provenance.insert(format!("finetune.{k}"), v);
        }
        compressed.provenance.extend(before);
    }
    progress(format!("removed {} weight parameters", report.params_removed()));

    create_dir(&a.out)?;
    save_model(&compressed, &a.out.join(MODEL_FILE))?;
    write_csv(&report, &a.out.join(COMPRESSION_REPORT_FILE))?;
    progress(format!("wrote {}", a.out.display()));
    Ok(())
}

fn load_inputs(model: &Path, fisher: &Path, data: &Path, split: Split) -> Result<(NetModel, crate::fisher::FisherMap, crate::nn::Dataset), Error> {
    let model = load_model(model)?;
    let fisher = load_fisher_for(fisher, &model)?;
    let data = load_split(data, split)?;
    Ok((model, fisher, data))
}

fn ensure_parent(path: &Path) -> Result<(), Error> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => create_dir(p),
        _ => Ok(()),
    }
}

pub fn cmd_group_truncation(a: &GroupArgs) -> CliResult {
    if a.groups < 2 {
        return Err(CliError::Usage(format!("--groups must be at least 2, got {}", a.groups)));
    }
    let (model, fisher, eval) = load_inputs(&a.model, &a.fisher, &a.data, Split::Eval)?;
    progress(format!("group truncation with {} groups", a.groups));
    let mut report = run_group_truncation(&model, &fisher, &eval, a.groups)?;
    report.seed = Some(a.seed);
    ensure_parent(&a.out)?;
    write_csv(&report, &a.out)?;
    progress(format!("wrote {}", a.out.display()));
    Ok(())
}

pub fn cmd_rank_sweep(a: &SweepArgs) -> CliResult {
    let (model, fisher, eval) = load_inputs(&a.model, &a.fisher, &a.data, Split::Eval)?;
    let finetune = a.finetune_epochs.map(|e| finetune_config(e, a.seed));
    let train_data = match finetune {
        Some(_) => load_split(&a.data, Split::Train)?,
        None => eval.clone(),
    };
    progress(format!("rank sweep over {} ratios", a.ratios.len()));
    let mut report = run_rank_sweep(&model, &fisher, &train_data, &eval, &a.ratios, finetune.as_ref())?;
    report.seed = Some(a.seed);
    ensure_parent(&a.out)?;
    write_csv(&report, &a.out)?;
    progress(format!("wrote {}", a.out.display()));
    Ok(())
}
