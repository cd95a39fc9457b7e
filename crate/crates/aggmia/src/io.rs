//! File formats: panels, noisy series, feature matrices and saved models.
//!
//! A panel file starts with one header line
//! `#panel v1 users=<n> rois=<n> slots=<n> slot_minutes=<n> epoch_weekday=<n>`
//! followed by a `user,roi,slot` CSV listing every cell, null cells included.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use aggmia_core::data::{AggregateSeries, LocationMatrix, RoiSet, SlotRange, TimeGrid, UserId, UserPanel};
use aggmia_core::experiment::Pipeline;
use aggmia_core::features::FeatureMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PANEL_MAGIC: &str = "#panel";
const PANEL_VERSION: &str = "v1";
pub const MODEL_FORMAT: &str = "aggmia-model";
pub const MODEL_VERSION: u32 = 1;

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?))
}

pub fn write_panel(panel: &UserPanel, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let g = panel.grid();
    writeln!(
        w,
        "{PANEL_MAGIC} {PANEL_VERSION} users={} rois={} slots={} slot_minutes={} epoch_weekday={}",
        panel.len(),
        panel.rois().roi_count(),
        g.slot_count(),
        g.slot_minutes(),
        g.epoch_weekday()
    )
    .map_err(|e| Error::io(path, e))?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["user", "roi", "slot"]).map_err(|e| Error::csv(path, e))?;
    for m in panel.matrices() {
        for c in m.cells() {
            csv.serialize((m.user(), c.roi, c.slot)).map_err(|e| Error::csv(path, e))?;
        }
    }
    csv.flush().map_err(|e| Error::io(path, e))
}

fn parse_header(path: &Path, line: &str) -> Result<BTreeMap<String, usize>> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(PANEL_MAGIC) {
        return Err(Error::format(path, 1, "missing #panel header"));
    }
    match parts.next() {
        Some(PANEL_VERSION) => {}
        Some(v) => return Err(Error::format(path, 1, format!("unsupported panel version {v}"))),
        None => return Err(Error::format(path, 1, "missing panel version")),
    }
    let mut fields = BTreeMap::new();
    for kv in parts {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::format(path, 1, format!("malformed header field '{kv}'")))?;
        let v = v
            .parse()
            .map_err(|_| Error::format(path, 1, format!("header field {k} is not a number")))?;
        fields.insert(k.to_string(), v);
    }
    Ok(fields)
}

pub fn read_panel(path: &Path) -> Result<UserPanel> {
    let mut reader = open(path)?;
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| Error::io(path, e))?;
    let h = parse_header(path, first.trim_end())?;
    let field = |k: &str| h.get(k).copied().ok_or_else(|| Error::format(path, 1, format!("header lacks {k}")));
    let users = field("users")?;
    let grid = TimeGrid::new(
        field("slots")?,
        h.get("slot_minutes").copied().unwrap_or(60) as u32,
        h.get("epoch_weekday").copied().unwrap_or(0) as u8,
    )?;
    let rois = RoiSet::new(field("rois")?)?;

    let mut order: Vec<UserId> = Vec::new();
    let mut cells: BTreeMap<UserId, Vec<(usize, usize)>> = BTreeMap::new();
    let mut csv = csv::Reader::from_reader(reader);
    for (i, rec) in csv.deserialize().enumerate() {
        let (user, roi, slot): (UserId, usize, usize) =
            rec.map_err(|e| Error::format(path, i + 3, e.to_string()))?;
        cells
            .entry(user)
            .or_insert_with(|| {
                order.push(user);
                Vec::new()
            })
            .push((roi, slot));
    }
    if order.len() != users {
        return Err(Error::format(path, 1, format!("header says {users} users, file has {}", order.len())));
    }
    let matrices = order
        .iter()
        .map(|u| LocationMatrix::new(*u, cells.remove(u).unwrap_or_default(), &grid, &rois))
        .collect::<aggmia_core::Result<Vec<_>>>()?;
    Ok(UserPanel::new(grid, rois, matrices)?)
}

/// Writes a series as `roi,slot,value` rows with absolute slot indices.
pub fn write_series_csv(series: &AggregateSeries, path: &Path) -> Result<()> {
    let mut csv = csv::Writer::from_writer(create(path)?);
    csv.write_record(["roi", "slot", "value"]).map_err(|e| Error::csv(path, e))?;
    let w = series.window();
    for r in 0..series.roi_count() {
        for (t, v) in series.row(r).iter().enumerate() {
            csv.serialize((r, w.start + t, v)).map_err(|e| Error::csv(path, e))?;
        }
    }
    csv.flush().map_err(|e| Error::io(path, e))
}

/// Reads a series written by [`write_series_csv`]. Every `(roi, slot)`
/// pair of the covered rectangle must appear exactly once.
pub fn read_series_csv(path: &Path, group_size: usize, perturbed: bool) -> Result<AggregateSeries> {
    let mut csv = csv::Reader::from_reader(open(path)?);
    let mut entries = Vec::new();
    for (i, rec) in csv.deserialize().enumerate() {
        let e: (usize, usize, f64) = rec.map_err(|e| Error::format(path, i + 2, e.to_string()))?;
        if !e.2.is_finite() {
            return Err(Error::format(path, i + 2, "non-finite value"));
        }
        entries.push(e);
    }
    if entries.is_empty() {
        return Err(Error::format(path, 1, "no values"));
    }
    let rois = entries.iter().map(|e| e.0).max().unwrap_or(0) + 1;
    let start = entries.iter().map(|e| e.1).min().unwrap_or(0);
    let end = entries.iter().map(|e| e.1).max().unwrap_or(0) + 1;
    let n = end - start;
    if entries.len() != rois * n {
        return Err(Error::format(path, 1, "values do not cover a full roi x slot rectangle"));
    }
    let mut values = vec![f64::NAN; rois * n];
    for (i, (r, t, v)) in entries.into_iter().enumerate() {
        let slot = &mut values[r * n + t - start];
        if !slot.is_nan() {
            return Err(Error::format(path, i + 2, format!("duplicate cell ({r}, {t})")));
        }
        *slot = v;
    }
    Ok(AggregateSeries::from_values(values, rois, SlotRange::new(start, end), group_size, perturbed)?)
}

/// Writes a feature matrix with the label (1 = in, 0 = out) as the first
/// column.
pub fn write_features_csv(fm: &FeatureMatrix, path: &Path) -> Result<()> {
    let mut csv = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["label".to_string()];
    header.extend(fm.columns.iter().cloned());
    csv.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for (i, row) in fm.data.iter_rows().enumerate() {
        let mut rec = vec![if fm.labels[i] { "1".to_string() } else { "0".to_string() }];
        rec.extend(row.iter().map(f64::to_string));
        csv.write_record(&rec).map_err(|e| Error::csv(path, e))?;
    }
    csv.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    pipeline: Pipeline,
}

/// Saves a fitted pipeline as versioned JSON.
pub fn save_model(pipeline: &Pipeline, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let file = ModelFile { format: MODEL_FORMAT.into(), version: MODEL_VERSION, pipeline: pipeline.clone() };
    serde_json::to_writer(&mut w, &file).map_err(|e| Error::json(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Pipeline> {
    let file: ModelFile = serde_json::from_reader(open(path)?).map_err(|e| Error::json(path, e))?;
    if file.format != MODEL_FORMAT {
        return Err(Error::format(path, 1, format!("not a model file (format '{}')", file.format)));
    }
    if file.version != MODEL_VERSION {
        return Err(Error::format(path, 1, format!("unsupported model version {}", file.version)));
    }
    Ok(file.pipeline)
}
