//! Experiment results, CSV emission and sidecar metadata.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Hex-encoded SHA-256 digest.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Declarative plot description written next to each CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub kind: &'static str,
    pub title: String,
    pub x: &'static str,
    pub y: Vec<&'static str>,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
}

impl PlotSpec {
    pub fn line(title: &str, x: &'static str, y: &[&'static str], x_label: &str, y_label: &str) -> Self {
        Self {
            kind: "line",
            title: title.into(),
            x,
            y: y.to_vec(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_x: false,
            log_y: false,
        }
    }

    pub fn with_kind(mut self, kind: &'static str) -> Self {
        self.kind = kind;
        self
    }

    pub fn log_x(mut self) -> Self {
        self.log_x = true;
        self
    }

    pub fn log_y(mut self) -> Self {
        self.log_y = true;
        self
    }

    fn to_json(&self, csv_name: &str) -> Value {
        json!({
            "kind": self.kind,
            "title": self.title,
            "data": csv_name,
            "x": { "column": self.x, "label": self.x_label, "log": self.log_x },
            "y": { "columns": self.y, "label": self.y_label, "log": self.log_y },
        })
    }
}

/// One CSV artifact: header plus preformatted rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub plot: Option<PlotSpec>,
}

impl CsvTable {
    pub fn new(name: &str, columns: &[&'static str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.to_vec(),
            rows: Vec::new(),
            plot: None,
        }
    }

    pub fn with_plot(mut self, plot: PlotSpec) -> Self {
        self.plot = Some(plot);
        self
    }

    /// Appends a row; panics if the width differs from the header.
    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width for {}", self.name);
        self.rows.push(row);
    }

    /// CSV bytes with a header row.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.columns).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.to_string()))
    }

    /// Index of a column by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    /// Parsed numeric column.
    pub fn f64_column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column(name)?;
        self.rows.iter().map(|r| r[i].parse().ok()).collect()
    }
}

/// Formats a float with the shortest round-trip representation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// One summary statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    /// Sweep coordinate, for example `snr_db=20`; empty for scalars.
    pub sweep: String,
    pub metric: String,
    pub value: f64,
    /// Number of trials aggregated into `value`.
    pub trials: usize,
}

/// Everything an experiment produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub experiment: String,
    pub seed: u64,
    pub config_sha256: String,
    pub tables: Vec<CsvTable>,
    pub records: Vec<Record>,
    pub warnings: Vec<String>,
}

impl ExperimentResult {
    pub fn table(&self, name: &str) -> Option<&CsvTable> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Value of a summary record.
    pub fn metric(&self, sweep: &str, metric: &str) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.sweep == sweep && r.metric == metric)
            .map(|r| r.value)
    }

    fn summary_table(&self) -> CsvTable {
        let mut t = CsvTable::new("summary", &["sweep", "metric", "value", "trials"]);
        for r in &self.records {
            t.push(vec![r.sweep.clone(), r.metric.clone(), fmt_f64(r.value), r.trials.to_string()]);
        }
        t
    }

    fn meta(&self, table: &CsvTable) -> Value {
        json!({
            "experiment": self.experiment,
            "seed": self.seed,
            "config_sha256": self.config_sha256,
            "version": env!("CARGO_PKG_VERSION"),
            "columns": table.columns,
            "rows": table.rows.len(),
        })
    }

    /// Writes every table as `<name>.csv` with `<name>.meta.json` and, when
    /// present, `<name>.plot.json`, plus `summary.csv`. Returns the CSV paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let summary = self.summary_table();
        let mut paths = Vec::new();
        for t in self.tables.iter().chain(std::iter::once(&summary)) {
            let csv_name = format!("{}.csv", t.name);
            let path = dir.join(&csv_name);
            fs::write(&path, t.to_csv()?)?;
            let meta = serde_json::to_string_pretty(&self.meta(t)).map_err(|e| Error::Io(e.to_string()))?;
            fs::write(dir.join(format!("{}.meta.json", t.name)), meta + "\n")?;
            if let Some(plot) = &t.plot {
                let p = serde_json::to_string_pretty(&plot.to_json(&csv_name)).map_err(|e| Error::Io(e.to_string()))?;
                fs::write(dir.join(format!("{}.plot.json", t.name)), p + "\n")?;
            }
            paths.push(path);
        }
        Ok(paths)
    }
}
