//! The metrics CSV consumed by the plotting script.
//!
//! Layout: an optional `# cmdline: ...` comment line, then the fixed header
//! [`METRICS_HEADER`], then rows sorted by `(algo, threads, eta, row)`.
//! Floats carry 17 significant digits so values round-trip exactly.

use std::cmp::Ordering;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::optim::{MetricsRow, RunConfig, RunMetrics};

pub const METRICS_HEADER: [&str; 10] = [
    "algo",
    "threads",
    "seed",
    "eta",
    "row",
    "elapsed_units",
    "wall_seconds",
    "grad_evals",
    "train_loss",
    "grad_norm_sq",
];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub algo: String,
    pub threads: usize,
    pub seed: u64,
    pub eta: f64,
    pub row: usize,
    pub elapsed_units: f64,
    pub wall_seconds: f64,
    pub grad_evals: u64,
    pub train_loss: f64,
    pub grad_norm_sq: f64,
}

impl MetricsRecord {
    pub fn from_run(config: &RunConfig, metrics: &RunMetrics) -> Vec<MetricsRecord> {
        metrics
            .rows
            .iter()
            .enumerate()
            .map(|(row, r)| MetricsRecord::new(config, row, r))
            .collect()
    }

    fn new(config: &RunConfig, row: usize, r: &MetricsRow) -> Self {
        MetricsRecord {
            algo: config.algo.name().to_owned(),
            threads: config.threads,
            seed: config.seed,
            eta: config.eta,
            row,
            elapsed_units: r.elapsed_units,
            wall_seconds: r.wall_seconds,
            grad_evals: r.grad_evals,
            train_loss: r.train_loss,
            grad_norm_sq: r.grad_norm_sq,
        }
    }

    fn sort_key_cmp(&self, other: &Self) -> Ordering {
        self.algo
            .cmp(&other.algo)
            .then(self.threads.cmp(&other.threads))
            .then(self.eta.total_cmp(&other.eta))
            .then(self.row.cmp(&other.row))
    }

    fn fields(&self) -> [String; 10] {
        [
            self.algo.clone(),
            self.threads.to_string(),
            self.seed.to_string(),
            format_float(self.eta),
            self.row.to_string(),
            format_float(self.elapsed_units),
            format_float(self.wall_seconds),
            self.grad_evals.to_string(),
            format_float(self.train_loss),
            format_float(self.grad_norm_sq),
        ]
    }
}

/// Scientific notation with 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sort_records(records: &mut [MetricsRecord]) {
    records.sort_by(MetricsRecord::sort_key_cmp);
}

/// Sorts `records` and writes the whole file.
pub fn write_metrics<W: Write>(mut out: W, cmdline: Option<&str>, records: &mut [MetricsRecord]) -> Result<()> {
    if let Some(line) = cmdline {
        writeln!(out, "# cmdline: {}", line.replace('\n', " ")).map_err(|e| Error::io("<metrics>", e))?;
    }
    sort_records(records);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for r in records.iter() {
        w.write_record(r.fields())?;
    }
    w.flush().map_err(|e| Error::io("<metrics>", e))?;
    Ok(())
}

/// Parses a metrics file, skipping `#` comment lines. The header must
/// match [`METRICS_HEADER`] exactly.
pub fn read_metrics<R: Read>(input: R) -> Result<Vec<MetricsRecord>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(METRICS_HEADER) {
        return Err(Error::Schema(format!(
            "header mismatch: expected `{}`, got `{}`",
            METRICS_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |k: usize| rec.get(k).unwrap_or_default();
        let bad = |k: usize| {
            Error::Schema(format!(
                "record {}: bad `{}` value `{}`",
                line + 1,
                METRICS_HEADER[k],
                field(k)
            ))
        };
        macro_rules! parse {
            ($k:expr) => {
                field($k).parse().map_err(|_| bad($k))?
            };
        }
        out.push(MetricsRecord {
            algo: field(0).to_owned(),
            threads: parse!(1),
            seed: parse!(2),
            eta: parse!(3),
            row: parse!(4),
            elapsed_units: parse!(5),
            wall_seconds: parse!(6),
            grad_evals: parse!(7),
            train_loss: parse!(8),
            grad_norm_sq: parse!(9),
        });
    }
    Ok(out)
}
