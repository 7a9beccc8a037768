//! Files written for a list of [`RunRecord`]s.
//!
//! Per record `<name>`:
//! - `<name>.series.csv`: `abscissa,value,series,replica_pool`
//! - `<name>.hist.csv` (only when the record has histograms):
//!   `bin_center,count,checkpoint`
//! - `<name>.json`: the record itself, config included
//! - `<name>.dat` with `--plot-data`: gnuplot blocks, one per series, then
//!   one per histogram, separated by two blank lines
//!
//! plus `manifest.csv` (`file,record,config_hash`). Reals are printed with
//! Rust's shortest round-trip formatting.

use std::fmt::Write as _;
use std::fs;
use std::hash::Hasher;
use std::io;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use spinprice_core::{RunRecord, SimConfig};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub format: Format,
    pub emit_plot_data: bool,
    pub force: bool,
}

pub const MANIFEST: &str = "manifest.csv";

#[derive(Debug, Error)]
pub enum WriteError {
    #[error("nothing to write")]
    NoRecords,
    #[error("{0} already exists (use --force to overwrite)")]
    Exists(PathBuf),
    #[error("two records would write {0}")]
    DuplicateName(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// FNV-1a (64-bit) of the config's compact JSON serialization.
pub fn config_hash(config: &SimConfig) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    let mut h = fnv::FnvHasher::default();
    h.write(json.as_bytes());
    format!("{:016x}", h.finish())
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

pub fn series_csv(record: &RunRecord) -> Result<Vec<u8>, csv::Error> {
    let rows = record.series.iter().flat_map(|s| {
        s.points.iter().map(move |(x, y)| {
            vec![
                x.to_string(),
                y.to_string(),
                s.label.clone(),
                s.replica_pool.to_string(),
            ]
        })
    });
    csv_bytes(&["abscissa", "value", "series", "replica_pool"], rows)
}

pub fn histogram_csv(record: &RunRecord) -> Result<Vec<u8>, csv::Error> {
    let rows = record.histograms.iter().flat_map(|ch| {
        let h = &ch.histogram;
        h.counts
            .iter()
            .enumerate()
            .map(move |(k, c)| vec![h.bin_center(k).to_string(), c.to_string(), ch.sweep.to_string()])
    });
    csv_bytes(&["bin_center", "count", "checkpoint"], rows)
}

pub fn plot_data(record: &RunRecord) -> String {
    let mut out = String::new();
    let mut first = true;
    let mut block = |title: String, out: &mut String| {
        if !first {
            out.push_str("\n\n");
        }
        first = false;
        let _ = writeln!(out, "# {title}");
    };
    for s in &record.series {
        block(format!("{} (replicas: {})", s.label, s.replica_pool), &mut out);
        for (x, y) in &s.points {
            let _ = writeln!(out, "{x} {y}");
        }
    }
    for ch in &record.histograms {
        block(format!("histogram at sweep {}", ch.sweep), &mut out);
        for (k, c) in ch.histogram.counts.iter().enumerate() {
            let _ = writeln!(out, "{} {c}", ch.histogram.bin_center(k));
        }
    }
    out
}

/// `(file name, record name, config hash, bytes)`
type Rendered = (String, String, String, Vec<u8>);

fn render(records: &[RunRecord], spec: &OutputSpec) -> Result<Vec<Rendered>, WriteError> {
    let mut files = Vec::new();
    for r in records {
        let hash = config_hash(&r.config);
        let mut push = |suffix: &str, bytes: Vec<u8>| {
            files.push((format!("{}.{suffix}", r.name), r.name.clone(), hash.clone(), bytes));
        };
        if matches!(spec.format, Format::Csv | Format::Both) {
            push("series.csv", series_csv(r)?);
            if !r.histograms.is_empty() {
                push("hist.csv", histogram_csv(r)?);
            }
        }
        if matches!(spec.format, Format::Json | Format::Both) {
            let mut json = serde_json::to_vec_pretty(r)?;
            json.push(b'\n');
            push("json", json);
        }
        if spec.emit_plot_data {
            push("dat", plot_data(r).into_bytes());
        }
    }
    let mut seen = std::collections::HashSet::new();
    for (name, ..) in &files {
        if !seen.insert(name.as_str()) {
            return Err(WriteError::DuplicateName(name.clone()));
        }
    }
    Ok(files)
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> WriteError + '_ {
    move |source| WriteError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes all records and the manifest; returns the written paths, manifest
/// last. Without `force`, nothing is written if any target already exists.
pub fn write_records(records: &[RunRecord], spec: &OutputSpec) -> Result<Vec<PathBuf>, WriteError> {
    if records.is_empty() {
        return Err(WriteError::NoRecords);
    }
    let files = render(records, spec)?;
    let manifest_path = spec.dir.join(MANIFEST);
    if !spec.force {
        let targets = files.iter().map(|f| spec.dir.join(&f.0)).chain([manifest_path.clone()]);
        if let Some(existing) = targets.into_iter().find(|p| p.exists()) {
            return Err(WriteError::Exists(existing));
        }
    }
    fs::create_dir_all(&spec.dir).map_err(io_err(&spec.dir))?;

    let mut written = Vec::new();
    let mut manifest = Vec::new();
    for (name, record, hash, bytes) in &files {
        let path = spec.dir.join(name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
        manifest.push(vec![name.clone(), record.clone(), hash.clone()]);
        written.push(path);
    }
    let bytes = csv_bytes(&["file", "record", "config_hash"], manifest.into_iter())?;
    fs::write(&manifest_path, bytes).map_err(io_err(&manifest_path))?;
    written.push(manifest_path);
    Ok(written)
}
