//! CSV rendering of compression and analysis reports.
//!
//! Numbers use the shortest representation that round-trips (at most 17
//! significant digits); missing values are empty fields. A `#` line above
//! the column header records the run parameters.

use std::path::Path;

use super::checkpoint::write_atomically;
use crate::analyzer::{GroupTruncationReport, RankSweepReport};
use crate::error::Result;
use crate::factorize::CompressionReport;

pub const COMPRESSION_COLUMNS: [&str; 8] = [
    "layer",
    "N",
    "M",
    "r",
    "params_before",
    "params_after",
    "err_unweighted",
    "err_weighted",
];
pub const GROUP_COLUMNS: [&str; 4] = ["method", "group", "drop", "recon_err_mean"];
pub const SWEEP_COLUMNS: [&str; 4] = ["method", "ratio", "metric_raw", "metric_finetuned"];

pub trait CsvReport {
    /// The `#` parameter line, without the leading `# `.
    fn parameters(&self) -> String;
    fn columns(&self) -> &'static [&'static str];
    fn records(&self) -> Vec<Vec<String>>;

    fn to_csv(&self) -> String {
        let mut out = format!("# {}\n", self.parameters()).into_bytes();
        {
            let mut w = ::csv::WriterBuilder::new()
                .terminator(::csv::Terminator::Any(b'\n'))
                .from_writer(&mut out);
            w.write_record(self.columns()).expect("writing to memory");
            for r in self.records() {
                w.write_record(&r).expect("writing to memory");
            }
            w.flush().expect("writing to memory");
        }
        String::from_utf8(out).expect("CSV fields are UTF-8")
    }
}

/// Shortest round-trip decimal, switching to exponent form outside
/// `[1e-5, 1e16)`. NaN renders empty.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v == 0.0 || (v.abs() >= 1e-5 && v.abs() < 1e16) || v.is_infinite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn format_optional(v: Option<f64>) -> String {
    v.map_or_else(String::new, format_number)
}

fn seed_field(seed: Option<u64>) -> String {
    seed.map_or_else(|| "none".to_string(), |s| s.to_string())
}

fn drop_convention(report_metric_higher_is_better: bool) -> &'static str {
    if report_metric_higher_is_better {
        "baseline-metric"
    } else {
        "metric-baseline"
    }
}

impl CsvReport for CompressionReport {
    fn parameters(&self) -> String {
        format!("method={} ratio={}", self.method, format_number(self.ratio))
    }

    fn columns(&self) -> &'static [&'static str] {
        &COMPRESSION_COLUMNS
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.layers
            .iter()
            .map(|l| {
                vec![
                    l.layer.clone(),
                    l.n.to_string(),
                    l.m.to_string(),
                    l.r.to_string(),
                    l.params_before.to_string(),
                    l.params_after.to_string(),
                    format_number(l.err_unweighted),
                    format_number(l.err_weighted),
                ]
            })
            .collect()
    }
}

impl CsvReport for GroupTruncationReport {
    fn parameters(&self) -> String {
        format!(
            "seed={} groups={} layers={} metric={} baseline={} drop={}",
            seed_field(self.seed),
            self.groups,
            self.layers.join(";"),
            self.metric.name(),
            format_number(self.baseline),
            drop_convention(self.metric.higher_is_better()),
        )
    }

    fn columns(&self) -> &'static [&'static str] {
        &GROUP_COLUMNS
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.cells
            .iter()
            .map(|c| {
                vec![
                    c.method.clone(),
                    c.group.to_string(),
                    format_number(c.drop),
                    format_number(c.recon_err_mean),
                ]
            })
            .collect()
    }
}

impl CsvReport for RankSweepReport {
    fn parameters(&self) -> String {
        let ratios: Vec<String> = self.ratios.iter().map(|r| format_number(*r)).collect();
        format!(
            "seed={} ratios={} metric={} baseline={} drop={}",
            seed_field(self.seed),
            ratios.join(";"),
            self.metric.name(),
            format_number(self.baseline),
            drop_convention(self.metric.higher_is_better()),
        )
    }

    fn columns(&self) -> &'static [&'static str] {
        &SWEEP_COLUMNS
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.method.clone(),
                    format_number(r.ratio),
                    format_number(r.metric_raw),
                    format_optional(r.metric_finetuned),
                ]
            })
            .collect()
    }
}

pub fn write_csv(report: &impl CsvReport, path: &Path) -> Result<()> {
    write_atomically(&[(path, report.to_csv().as_bytes())])
}
