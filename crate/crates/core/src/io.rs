//! Bulk data as raw little-endian `f64` with a JSON sidecar, reports as JSON,
//! tables as CSV.
//!
//! A bulk file `<stem>.f64` holds `count` records back to back. Each record is
//! `len` complex values stored as interleaved `(re, im)` pairs. Field records
//! run over modes `−N..=N`; path records over nodes `0..=n`. The sidecar
//! `<stem>.json` carries the layout and the run provenance.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectralField;

pub const FORMAT_VERSION: u32 = 1;
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    /// Fourier coefficients of fields, `2N+1` per record.
    Field,
    /// Path values on `[0, 2π]`, `n+1` per record.
    Path,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format_version: u32,
    pub code_version: String,
    pub kind: RecordKind,
    /// Mode cutoff `N` for fields, step count `n` for paths.
    #[serde(rename = "N")]
    pub size: usize,
    pub count: usize,
    pub seed: u64,
    pub config: serde_json::Value,
    pub layout: String,
    /// Log-weights; `null` stands for `−∞`.
    #[serde(default)]
    pub log_weights: Option<Vec<Option<f64>>>,
}

impl Sidecar {
    pub fn new(kind: RecordKind, size: usize, count: usize, seed: u64, config: serde_json::Value) -> Self {
        let unit = match kind {
            RecordKind::Field => "modes -N..=N",
            RecordKind::Path => "nodes 0..=n",
        };
        Self {
            format_version: FORMAT_VERSION,
            code_version: CODE_VERSION.to_string(),
            kind,
            size,
            count,
            seed,
            config,
            layout: format!("little-endian f64, record-major, {unit} within a record, re/im interleaved"),
            log_weights: None,
        }
    }

    pub fn record_len(&self) -> usize {
        match self.kind {
            RecordKind::Field => 2 * self.size + 1,
            RecordKind::Path => self.size + 1,
        }
    }

    pub fn with_log_weights(mut self, log_weights: &[f64]) -> Self {
        self.log_weights = Some(log_weights.iter().map(|l| l.is_finite().then_some(*l)).collect());
        self
    }

    /// Log-weights with `null` restored to `−∞`.
    pub fn weights(&self) -> Option<Vec<f64>> {
        self.log_weights
            .as_ref()
            .map(|v| v.iter().map(|l| l.unwrap_or(f64::NEG_INFINITY)).collect())
    }
}

/// `<stem>.f64` and `<stem>.json`.
pub fn bulk_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("f64"), stem.with_extension("json"))
}

/// Writes `records` (each of the sidecar's record length) and the sidecar.
pub fn write_bulk<'a>(stem: &Path, sidecar: &Sidecar, records: impl IntoIterator<Item = &'a [Complex64]>) -> Result<()> {
    let (data, meta) = bulk_paths(stem);
    let mut w = BufWriter::new(File::create(&data)?);
    let mut written = 0usize;
    for rec in records {
        if rec.len() != sidecar.record_len() {
            return Err(Error::Size(format!(
                "record of {} values, sidecar expects {}",
                rec.len(),
                sidecar.record_len()
            )));
        }
        for c in rec {
            w.write_all(&c.re.to_le_bytes())?;
            w.write_all(&c.im.to_le_bytes())?;
        }
        written += 1;
    }
    w.flush()?;
    if written != sidecar.count {
        return Err(Error::Size(format!("wrote {written} records, sidecar says {}", sidecar.count)));
    }
    write_json(&meta, sidecar)
}

/// Reads a bulk file and its sidecar.
pub fn read_bulk(stem: &Path) -> Result<(Sidecar, Vec<Vec<Complex64>>)> {
    let (data, meta) = bulk_paths(stem);
    let sidecar: Sidecar = read_json(&meta)?;
    if sidecar.format_version != FORMAT_VERSION {
        return Err(Error::Config(format!(
            "unsupported format version {} in {}",
            sidecar.format_version,
            meta.display()
        )));
    }
    let mut bytes = Vec::new();
    BufReader::new(File::open(&data)?).read_to_end(&mut bytes)?;
    let len = sidecar.record_len();
    let expected = sidecar.count * len * 16;
    if bytes.len() != expected {
        return Err(Error::Size(format!(
            "{} holds {} bytes, sidecar implies {expected}",
            data.display(),
            bytes.len()
        )));
    }
    let values: Vec<Complex64> = bytes
        .chunks_exact(16)
        .map(|b| {
            let re = f64::from_le_bytes(b[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(b[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    let records = values.chunks(len.max(1)).map(|c| c.to_vec()).collect();
    Ok((sidecar, records))
}

pub fn write_fields(stem: &Path, sidecar: &Sidecar, fields: &[SpectralField]) -> Result<()> {
    if let Some(f) = fields.iter().find(|f| f.modes() != sidecar.size) {
        return Err(Error::Size(format!("field with cutoff {} in an N = {} file", f.modes(), sidecar.size)));
    }
    write_bulk(stem, sidecar, fields.iter().map(|f| f.coeffs()))
}

pub fn read_fields(stem: &Path) -> Result<(Sidecar, Vec<SpectralField>)> {
    let (sidecar, records) = read_bulk(stem)?;
    if sidecar.kind != RecordKind::Field {
        return Err(Error::Config(format!("{} does not hold fields", stem.display())));
    }
    let fields = records
        .into_iter()
        .map(|r| SpectralField::new(sidecar.size, r))
        .collect::<Result<Vec<_>>>()?;
    Ok((sidecar, fields))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Writes a header row and records to a CSV file.
pub fn write_csv<S: AsRef<str>>(path: &Path, header: &[&str], rows: &[Vec<S>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|s| s.as_ref()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip_keeps_bits_and_weights() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("ens");
        let fields: Vec<SpectralField> = (0..3)
            .map(|k| SpectralField::from_fn(2, |n| Complex64::new(n as f64 + 0.1 * k as f64, -1.0 / 3.0)))
            .collect();
        let lw = [0.5, f64::NEG_INFINITY, -2.0];
        let side = Sidecar::new(RecordKind::Field, 2, 3, 42, serde_json::json!({"B": 2.0})).with_log_weights(&lw);
        write_fields(&stem, &side, &fields).unwrap();
        let (back_side, back) = read_fields(&stem).unwrap();
        assert_eq!(back, fields);
        assert_eq!(back_side, side);
        assert_eq!(back_side.weights().unwrap()[1], f64::NEG_INFINITY);
        let raw = std::fs::metadata(stem.with_extension("f64")).unwrap().len();
        assert_eq!(raw, 3 * 5 * 16);
    }

    #[test]
    fn truncated_data_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("p");
        let side = Sidecar::new(RecordKind::Path, 4, 1, 0, serde_json::Value::Null);
        let rec = vec![Complex64::new(0.0, 0.0); 5];
        write_bulk(&stem, &side, [rec.as_slice()]).unwrap();
        std::fs::write(stem.with_extension("f64"), [0u8; 10]).unwrap();
        assert!(matches!(read_bulk(&stem), Err(Error::Size(_))));
        assert!(write_bulk(&stem, &side, [&rec[..3]]).is_err());
    }
}
