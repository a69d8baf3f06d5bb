//! On-disk formats: binary field files, CSV grids, detection records and
//! curve tables.
//!
//! A field file is the 8-byte magic `STEMFLD1`, a little-endian `u32`
//! dimension count (always 2), two `u64` sizes `(height, width)`, an `f64`
//! grid spacing, then `height·width` row-major `f64` values.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, StemError};
use crate::experiment::ExperimentResult;
use crate::field_model::{GridField, GridGeometry};
use crate::maxima::CandidatePeak;

pub const FIELD_MAGIC: &[u8; 8] = b"STEMFLD1";

/// Column names of a curve table, in order.
pub const CURVE_HEADER: &str =
    "sweep_value,realized_fdr,fdr_stderr,realized_power,power_stderr,theoretical_fdr,theoretical_power";

fn corrupt(msg: impl Into<String>) -> StemError {
    StemError::Io(io::Error::new(io::ErrorKind::InvalidData, msg.into()))
}

pub fn write_field(mut w: impl Write, field: &GridField) -> Result<()> {
    w.write_all(FIELD_MAGIC)?;
    w.write_all(&2u32.to_le_bytes())?;
    w.write_all(&(field.height() as u64).to_le_bytes())?;
    w.write_all(&(field.width() as u64).to_le_bytes())?;
    w.write_all(&field.spacing().to_le_bytes())?;
    let mut buf = Vec::with_capacity(field.values().len() * 8);
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_field(mut r: impl Read) -> Result<GridField> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != FIELD_MAGIC {
        return Err(corrupt("not a field file (bad magic)"));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let ndim = u32::from_le_bytes(b4);
    if ndim != 2 {
        return Err(corrupt(format!("expected 2 dimensions, found {ndim}")));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let height = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let width = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let spacing = f64::from_le_bytes(b8);
    let n = height
        .checked_mul(width)
        .filter(|&n| n <= (1 << 32))
        .ok_or_else(|| corrupt(format!("implausible size {height}x{width}")))?;
    let mut payload = vec![0u8; n * 8];
    r.read_exact(&mut payload)?;
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    GridField::from_values(GridGeometry::new(height, width, spacing)?, values)
}

pub fn save_field(path: impl AsRef<Path>, field: &GridField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn load_field(path: impl AsRef<Path>) -> Result<GridField> {
    read_field(BufReader::new(File::open(path)?))
}

/// Reads a grid stored one row per line, values separated by commas or
/// whitespace. Blank lines and lines starting with `#` are skipped.
pub fn read_csv_field(r: impl BufRead, spacing: f64) -> Result<GridField> {
    let mut values = Vec::new();
    let mut width = None;
    let mut height = 0;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let row = t
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| StemError::Invalid(format!("line {}: cannot parse '{s}'", lineno + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(StemError::Invalid(format!(
                    "line {}: {} values, expected {w}",
                    lineno + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        values.extend(row);
        height += 1;
    }
    let width = width.ok_or_else(|| StemError::Invalid("CSV grid is empty".into()))?;
    GridField::from_values(GridGeometry::new(height, width, spacing)?, values)
}

pub fn load_csv_field(path: impl AsRef<Path>, spacing: f64) -> Result<GridField> {
    read_csv_field(BufReader::new(File::open(path)?), spacing)
}

/// One line of detection output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub row: usize,
    pub col: usize,
    pub x: f64,
    pub y: f64,
    pub height: f64,
    pub pvalue: f64,
    /// `signal`, `transition`, `null`, or `unknown` without a ground truth.
    pub region: String,
    pub significant: bool,
}

impl From<&CandidatePeak> for DetectionRecord {
    fn from(p: &CandidatePeak) -> Self {
        Self {
            row: p.location.0,
            col: p.location.1,
            x: p.model_coords.0,
            y: p.model_coords.1,
            height: p.height,
            pvalue: p.pvalue.unwrap_or(f64::NAN),
            region: p.region.map_or("unknown", |r| r.as_str()).to_string(),
            significant: p.significant,
        }
    }
}

/// Writes one JSON object per line.
pub fn write_detections<'a>(mut w: impl Write, records: impl IntoIterator<Item = &'a DetectionRecord>) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(io::Error::from)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_detections(r: impl BufRead) -> Result<Vec<DetectionRecord>> {
    r.lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| serde_json::from_str(&l?).map_err(|e| StemError::Invalid(format!("detection record: {e}"))))
        .collect()
}

/// Writes a curve table with [`CURVE_HEADER`]. Values use the shortest
/// round-trip representation; a missing sweep value is written as `nan`.
pub fn write_curve_table<'a>(mut w: impl Write, rows: impl IntoIterator<Item = &'a ExperimentResult>) -> Result<()> {
    writeln!(w, "{CURVE_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            fmt(r.sweep_value.unwrap_or(f64::NAN)),
            fmt(r.realized_fdr),
            fmt(r.fdr_stderr),
            fmt(r.realized_power),
            fmt(r.power_stderr),
            fmt(r.theoretical_fdr),
            fmt(r.theoretical_power)
        )?;
    }
    Ok(())
}

/// Parses a curve table back into `(sweep_value, [six columns])` rows.
pub fn read_curve_table(r: impl BufRead) -> Result<Vec<[f64; 7]>> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != CURVE_HEADER {
        return Err(StemError::Invalid(format!("unexpected curve header '{header}'")));
    }
    lines
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| {
            let l = l?;
            let cols: Vec<f64> = l
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| StemError::Invalid(format!("bad value '{s}'"))))
                .collect::<Result<_>>()?;
            cols.try_into()
                .map_err(|_| StemError::Invalid(format!("expected 7 columns in '{l}'")))
        })
        .collect()
}

fn fmt(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x}")
    }
}
