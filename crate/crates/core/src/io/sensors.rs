//! Sensor and mean-depth CSV files.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::diagnostics::entropy::csv_error;
use crate::error::{Error, Result};
use crate::model::MtRecord;

/// Gravity (mGal) or magnetic (nT) reading; z positive down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialRow {
    pub x_m: f64,
    pub y_m: f64,
    pub z_m: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtRow {
    pub x_m: f64,
    pub y_m: f64,
    pub freq_hz: f64,
    pub app_res_ohmm: f64,
    pub phase_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthRow {
    pub x_m: f64,
    pub y_m: f64,
    pub depth_m: f64,
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads typed rows, rejecting any row with a non-finite field.
fn read_rows<T: DeserializeOwned>(path: &Path, finite: impl Fn(&T) -> bool) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    let mut record = csv::StringRecord::new();
    let headers = r.headers().map_err(|e| csv_error(path, e))?.clone();
    while r.read_record(&mut record).map_err(|e| csv_error(path, e))? {
        let line = record.position().map_or(0, |p| p.line());
        let row: T = record
            .deserialize(Some(&headers))
            .map_err(|e| parse_error(path, line, e.to_string()))?;
        if !finite(&row) {
            return Err(parse_error(path, line, "non-finite value"));
        }
        out.push(row);
    }
    if out.is_empty() {
        return Err(parse_error(path, 1, "no data rows"));
    }
    Ok(out)
}

pub fn read_potential_csv(path: &Path) -> Result<Vec<PotentialRow>> {
    read_rows(path, |r: &PotentialRow| {
        [r.x_m, r.y_m, r.z_m, r.value].iter().all(|v| v.is_finite())
    })
}

/// Station points and values of a gravity or magnetic file.
pub fn load_potential_csv(path: &Path) -> Result<(Vec<[f64; 3]>, Vec<f64>)> {
    let rows = read_potential_csv(path)?;
    Ok(rows.iter().map(|r| ([r.x_m, r.y_m, r.z_m], r.value)).unzip())
}

/// MT rows in file order.
pub fn read_mt_rows(path: &Path) -> Result<Vec<MtRow>> {
    read_rows(path, |r: &MtRow| {
        [r.x_m, r.y_m, r.freq_hz, r.app_res_ohmm, r.phase_deg]
            .iter()
            .all(|v| v.is_finite())
    })
}

/// MT records sorted by site, then by descending frequency.
pub fn load_mt_csv(path: &Path) -> Result<Vec<MtRecord>> {
    let rows = read_mt_rows(path)?;
    if let Some(r) = rows.iter().find(|r| r.freq_hz <= 0.0 || r.app_res_ohmm <= 0.0) {
        return Err(Error::InvalidInput(format!(
            "{}: frequency and apparent resistivity must be positive at ({}, {})",
            path.display(),
            r.x_m,
            r.y_m
        )));
    }
    let mut out: Vec<MtRecord> = rows
        .into_iter()
        .map(|r| MtRecord {
            x: r.x_m,
            y: r.y_m,
            freq_hz: r.freq_hz,
            app_res_ohmm: r.app_res_ohmm,
            phase_deg: r.phase_deg,
        })
        .collect();
    out.sort_by(|a, b| {
        a.x.total_cmp(&b.x)
            .then(a.y.total_cmp(&b.y))
            .then(b.freq_hz.total_cmp(&a.freq_hz))
    });
    Ok(out)
}

pub fn read_depth_csv(path: &Path) -> Result<Vec<(f64, f64, f64)>> {
    let rows = read_rows(path, |r: &DepthRow| {
        [r.x_m, r.y_m, r.depth_m].iter().all(|v| v.is_finite())
    })?;
    Ok(rows.iter().map(|r| (r.x_m, r.y_m, r.depth_m)).collect())
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_potential_csv(path: &Path, points: &[[f64; 3]], values: &[f64]) -> Result<()> {
    let rows: Vec<PotentialRow> = points
        .iter()
        .zip(values)
        .map(|(p, &value)| PotentialRow {
            x_m: p[0],
            y_m: p[1],
            z_m: p[2],
            value,
        })
        .collect();
    write_rows(path, &rows)
}

pub fn write_mt_csv(path: &Path, records: &[MtRecord]) -> Result<()> {
    let rows: Vec<MtRow> = records
        .iter()
        .map(|r| MtRow {
            x_m: r.x,
            y_m: r.y,
            freq_hz: r.freq_hz,
            app_res_ohmm: r.app_res_ohmm,
            phase_deg: r.phase_deg,
        })
        .collect();
    write_rows(path, &rows)
}
