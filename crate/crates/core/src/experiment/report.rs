use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::Result;

use super::{fit_power_law, Command, ExperimentConfig, Format, Row, ScalingFit};

/// Bumped whenever a CSV header changes.
pub const SCHEMA_VERSION: u32 = 1;

const PROVENANCE: [&str; 5] = ["family", "param", "seed", "lambda", "resolution"];

/// Column order of each scan's CSV.
pub fn csv_header(cmd: Command) -> Vec<&'static str> {
    let tail: &[&str] = match cmd {
        Command::ScanW1 => &[
            "engine",
            "w1",
            "l1_norm",
            "w1_scaled",
            "witness",
            "witness_scaled",
            "weak_duality",
            "oracle",
            "imbalance",
            "status",
        ],
        Command::ScanTubeMass => {
            &["p", "delta_sqrtlambda", "ratio_total", "ratio_pos", "ratio_neg", "status"]
        }
        Command::ScanDoubling => &[
            "max_n",
            "max_n_over_sqrt_lambda",
            "d",
            "good_fraction",
            "good",
            "bad",
            "multiplicity",
            "bound_ok",
            "status",
        ],
        Command::ScanUncertainty => &["engine", "w1_normalized", "nodal_length", "product", "status"],
    };
    PROVENANCE.iter().chain(tail).copied().collect()
}

/// Hex SHA-256 of `blob <len>\0<bytes>`.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub input_hash: String,
    pub fits: BTreeMap<String, ScalingFit>,
    pub errors: usize,
    pub rows: Vec<Row>,
}

fn pairs(rows: &[Row], pick: impl Fn(&Row) -> Option<(f64, f64)>) -> (Vec<f64>, Vec<f64>) {
    rows.iter().filter(|r| r.is_ok()).filter_map(pick).unzip()
}

impl Report {
    pub fn new(cmd: Command, cfg: &ExperimentConfig, rows: Vec<Row>) -> Self {
        let mut fits = BTreeMap::new();
        let mut fit = |name: &str, (xs, ys): (Vec<f64>, Vec<f64>)| {
            if let Ok(f) = fit_power_law(&xs, &ys) {
                fits.insert(name.to_string(), f);
            }
        };
        match cmd {
            Command::ScanW1 => {
                fit("w1_vs_lambda", pairs(&rows, |r| match r {
                    Row::W1(r) => Some((r.at.lambda, r.w1?)),
                    _ => None,
                }));
                fit("witness_vs_lambda", pairs(&rows, |r| match r {
                    Row::W1(r) => Some((r.at.lambda, r.witness?)),
                    _ => None,
                }));
            }
            Command::ScanDoubling => {
                let first_d = cfg.d.first().copied();
                fit("max_n_vs_lambda", pairs(&rows, |r| match r {
                    Row::Doubling(r) if r.d == first_d => Some((r.at.lambda, r.max_n?)),
                    _ => None,
                }));
            }
            Command::ScanUncertainty => {
                fit("product_vs_lambda", pairs(&rows, |r| match r {
                    Row::Uncertainty(r) => Some((r.at.lambda, r.product?)),
                    _ => None,
                }));
            }
            Command::ScanTubeMass => {}
        }
        let config_bytes = serde_json::to_vec(cfg).expect("config serializes");
        Self {
            command: cmd.name().into(),
            schema_version: SCHEMA_VERSION,
            config: cfg.clone(),
            input_hash: content_hash(&config_bytes),
            errors: rows.iter().filter(|r| !r.is_ok()).count(),
            fits,
            rows,
        }
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Write `row` under `header`; keys outside the header are an error so the
/// schema cannot drift silently.
pub(super) fn row_cells(header: &[&str], row: &Row) -> Result<Vec<String>> {
    let v = serde_json::to_value(row)?;
    let obj = v.as_object().expect("rows serialize to objects");
    if obj.len() != header.len() || header.iter().any(|k| !obj.contains_key(*k)) {
        let mut keys: Vec<&String> = obj.keys().collect();
        keys.sort();
        return Err(crate::error::Error::InvalidArgument(format!("row keys {keys:?} drift from the header")));
    }
    Ok(header.iter().map(|k| cell(&obj[*k])).collect())
}

/// Streaming CSV sink for one scan.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
    header: Vec<&'static str>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(inner: W, cmd: Command) -> Result<Self> {
        let header = csv_header(cmd);
        let mut writer = csv::Writer::from_writer(inner);
        writer.write_record(&header)?;
        Ok(Self { writer, header })
    }

    pub fn push(&mut self, row: &Row) -> Result<()> {
        self.writer.write_record(row_cells(&self.header, row)?)?;
        self.writer.flush()?;
        Ok(())
    }
}

/// `<dir>/<command>.v<schema>.csv`.
pub fn csv_path(dir: &Path, cmd: Command) -> PathBuf {
    dir.join(format!("{}.v{}.csv", cmd.name(), SCHEMA_VERSION))
}

/// The report without its rows, as `<dir>/<command>.summary.json`.
pub fn write_summary(report: &Report, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}.summary.json", report.command));
    let mut summary = serde_json::to_value(report)?;
    summary.as_object_mut().expect("object").remove("rows");
    std::fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(path)
}

/// Write the report into `dir`: the versioned CSV plus the summary, or one
/// `<command>.json`. Returns the files written.
pub fn write_report(report: &Report, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    match format {
        Format::Csv => {
            let path = csv_path(dir, report.config_command());
            let mut sink = CsvSink::new(std::fs::File::create(&path)?, report.config_command())?;
            for r in &report.rows {
                sink.push(r)?;
            }
            Ok(vec![path, write_summary(report, dir)?])
        }
        Format::Json => {
            let path = dir.join(format!("{}.json", report.command));
            std::fs::write(&path, serde_json::to_string_pretty(report)? + "\n")?;
            Ok(vec![path])
        }
    }
}

impl Report {
    fn config_command(&self) -> Command {
        [Command::ScanW1, Command::ScanTubeMass, Command::ScanDoubling, Command::ScanUncertainty]
            .into_iter()
            .find(|c| c.name() == self.command)
            .expect("report command is a scan")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_matches_git_blob_convention() {
        // `printf 'hello\n' | git hash-object --stdin` uses SHA-1; the same
        // framing under SHA-256 must be stable and length-sensitive
        let a = content_hash(b"hello\n");
        assert_eq!(a.len(), 64);
        assert_ne!(a, content_hash(b"hello"));
        assert_eq!(a, content_hash(b"hello\n"));
    }
}
