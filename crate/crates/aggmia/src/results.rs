//! The result table: one row per target, configuration and classifier.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Classifier name used for the per-target maximum-AUC row.
pub const BEST: &str = "BEST";
/// Mechanism and mode name of rows measured on raw aggregates.
pub const NONE: &str = "none";

/// One measured cell of an experiment. CSV columns follow field order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub panel: String,
    pub repetition: usize,
    pub target: u32,
    pub tier: String,
    pub classifier: String,
    pub m: usize,
    pub ti_len: usize,
    pub window: String,
    pub prior: String,
    pub mechanism: String,
    pub epsilon: Option<f64>,
    pub mode: String,
    pub auc: f64,
    pub pl: f64,
    pub pg: Option<f64>,
    pub mre: Option<f64>,
}

impl ResultRow {
    pub fn is_raw(&self) -> bool {
        self.mechanism == NONE
    }

    pub fn is_best(&self) -> bool {
        self.classifier == BEST
    }

    fn check_finite(&self) -> bool {
        [Some(self.auc), Some(self.pl), self.pg, self.mre, self.epsilon]
            .into_iter()
            .flatten()
            .all(f64::is_finite)
    }
}

pub const CSV_HEADER: [&str; 17] = [
    "experiment", "panel", "repetition", "target", "tier", "classifier", "m", "ti_len", "window", "prior",
    "mechanism", "epsilon", "mode", "auc", "pl", "pg", "mre",
];

pub fn write_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file));
    // Written by hand so that an empty table still gets its header.
    w.write_record(CSV_HEADER).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header = r.headers().map_err(|e| Error::csv(path, e))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::format(path, 1, "unexpected result header"));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.deserialize().enumerate() {
        let row: ResultRow = rec.map_err(|e| Error::csv(path, e))?;
        if !row.check_finite() {
            return Err(Error::format(path, i + 2, "non-finite value"));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_json(rows: &[ResultRow], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, rows).map_err(|e| Error::json(path, e))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_json(path: &Path) -> Result<Vec<ResultRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::json(path, e))
}
