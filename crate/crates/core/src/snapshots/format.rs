//! On-disk snapshot formats.
//!
//! CSV layout:
//! ```text
//! # n_cases=62 steps_per_case=1
//! node_id,x,snap_0,snap_1,...
//! 0,-10,0.000123,...
//! ```
//! Coordinate columns `x[,y[,z]]` are optional and detected from the header.
//!
//! Packed binary layout (all little-endian): magic `SPSNAP01`, then the five
//! u64 dims `n, m, n_cases, steps_per_case, coord_dim`, then `n*m` f64 values
//! in column-major order, then `n*coord_dim` f64 coordinates node-major.
//! Round trips are bit-exact.
//!
//! Coordinate sidecar: CSV `node_id,x[,y[,z]]`, conventionally stored next to
//! the data file as `<stem>.coords.csv` and picked up automatically on load.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use super::{Coordinates, SnapshotMatrix};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SPSNAP01";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotFormat {
    Csv,
    PackedBinary,
}

/// Sidecar path convention: `demo.snap` -> `demo.coords.csv`.
pub fn sidecar_path(data_path: &Path) -> PathBuf {
    data_path.with_extension("coords.csv")
}

pub fn load_snapshots(path: impl AsRef<Path>, format: SnapshotFormat) -> Result<SnapshotMatrix> {
    let path = path.as_ref();
    let mut m = match format {
        SnapshotFormat::Csv => load_csv(path)?,
        SnapshotFormat::PackedBinary => load_binary(path)?,
    };
    if m.coords().is_none() {
        let sidecar = sidecar_path(path);
        if sidecar.exists() {
            let (coords, ids) = load_coords_sidecar(&sidecar)?;
            m = m.with_coords(coords)?;
            if m.node_ids().is_none() {
                m = m.with_node_ids(ids)?;
            }
        }
    }
    Ok(m)
}

pub fn save_snapshots(
    m: &SnapshotMatrix,
    path: impl AsRef<Path>,
    format: SnapshotFormat,
) -> Result<()> {
    let path = path.as_ref();
    match format {
        SnapshotFormat::Csv => save_csv(m, path),
        SnapshotFormat::PackedBinary => save_binary(m, path),
    }
}

fn load_csv(path: &Path) -> Result<SnapshotMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut n_cases: Option<usize> = None;
    let mut steps_per_case: Option<usize> = None;

    let mut lines = text.lines().enumerate().peekable();
    while let Some((_, line)) = lines.peek() {
        let trimmed = line.trim();
        if let Some(meta) = trimmed.strip_prefix('#') {
            for token in meta.split_whitespace() {
                if let Some((key, value)) = token.split_once('=') {
                    let parsed = value.parse::<usize>().ok();
                    match key {
                        "n_cases" => n_cases = parsed,
                        "steps_per_case" => steps_per_case = parsed,
                        _ => {}
                    }
                }
            }
            lines.next();
        } else if trimmed.is_empty() {
            lines.next();
        } else {
            break;
        }
    }

    let (header_line_no, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 0, "missing header row"))?;
    let fields: Vec<&str> = header.trim().split(',').collect();
    if fields.first() != Some(&"node_id") {
        return Err(Error::parse(
            path,
            header_line_no + 1,
            format!("header must start with node_id, got {:?}", fields.first()),
        ));
    }
    let mut coord_dim = 0;
    for (expect, axis) in ["x", "y", "z"].iter().enumerate() {
        if fields.get(1 + expect) == Some(axis) {
            coord_dim += 1;
        } else {
            break;
        }
    }
    let m_cols = fields.len() - 1 - coord_dim;
    if m_cols == 0 {
        return Err(Error::parse(
            path,
            header_line_no + 1,
            "no snapshot columns in header",
        ));
    }

    let mut ids = Vec::new();
    let mut coord_data = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in lines {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let parts: Vec<&str> = trimmed.split(',').collect();
        if parts.len() != fields.len() {
            return Err(Error::parse(
                path,
                line_no + 1,
                format!(
                    "row has {} fields, header declares {}",
                    parts.len(),
                    fields.len()
                ),
            ));
        }
        ids.push(parts[0].to_string());
        for d in 0..coord_dim {
            let v: f64 = parts[1 + d].parse().map_err(|_| {
                Error::parse(
                    path,
                    line_no + 1,
                    format!("bad coordinate in column {}", 2 + d),
                )
            })?;
            coord_data.push(v);
        }
        let mut row = Vec::with_capacity(m_cols);
        for (j, raw) in parts[1 + coord_dim..].iter().enumerate() {
            let v: f64 = raw.parse().map_err(|_| {
                Error::parse(
                    path,
                    line_no + 1,
                    format!("bad value in column {}", 2 + coord_dim + j),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::parse(
                    path,
                    line_no + 1,
                    format!("non-finite value in column {}", 2 + coord_dim + j),
                ));
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::parse(path, 0, "no data rows"));
    }
    let n = rows.len();
    let values = DMatrix::from_fn(n, m_cols, |r, c| rows[r][c]);
    let n_cases = n_cases.unwrap_or(m_cols);
    let steps = steps_per_case.unwrap_or(1);
    let mut out = SnapshotMatrix::new(values, n_cases, steps)?.with_node_ids(ids)?;
    if coord_dim > 0 {
        out = out.with_coords(Coordinates::new(coord_dim, coord_data)?)?;
    }
    Ok(out)
}

fn save_csv(m: &SnapshotMatrix, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!(
        "# n_cases={} steps_per_case={}\n",
        m.n_cases(),
        m.steps_per_case()
    ));
    out.push_str("node_id");
    let coord_dim = m.coords().map_or(0, Coordinates::dim);
    for axis in ["x", "y", "z"].iter().take(coord_dim) {
        out.push(',');
        out.push_str(axis);
    }
    for j in 0..m.n_snapshots() {
        out.push_str(&format!(",snap_{j}"));
    }
    out.push('\n');
    for i in 0..m.n_nodes() {
        match m.node_ids() {
            Some(ids) => out.push_str(&ids[i]),
            None => out.push_str(&i.to_string()),
        }
        if let Some(coords) = m.coords() {
            for v in coords.point(i) {
                out.push_str(&format!(",{v}"));
            }
        }
        for j in 0..m.n_snapshots() {
            out.push_str(&format!(",{}", m.values()[(i, j)]));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn load_binary(path: &Path) -> Result<SnapshotMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cursor = Cursor::new(path, &bytes);
    let magic = cursor.take(8)?;
    if magic != MAGIC {
        return Err(Error::parse(path, 0, "bad magic, not a packed snapshot"));
    }
    let n = cursor.u64()? as usize;
    let m = cursor.u64()? as usize;
    let n_cases = cursor.u64()? as usize;
    let steps = cursor.u64()? as usize;
    let coord_dim = cursor.u64()? as usize;

    let mut values = DMatrix::zeros(n.max(1), m.max(1));
    if n == 0 || m == 0 {
        return Err(Error::parse(path, 0, "empty matrix dims in header"));
    }
    // column-major payload matches the in-memory layout
    for col in 0..m {
        for row in 0..n {
            values[(row, col)] = cursor.f64(row, col)?;
        }
    }
    let mut out = SnapshotMatrix::new(values, n_cases, steps)?;
    if coord_dim > 0 {
        let mut data = Vec::with_capacity(n * coord_dim);
        for node in 0..n {
            for d in 0..coord_dim {
                data.push(cursor.f64(node, d)?);
            }
        }
        out = out.with_coords(Coordinates::new(coord_dim, data)?)?;
    }
    if !cursor.at_end() {
        return Err(Error::DimensionMismatch(format!(
            "{} trailing bytes after declared payload of {path:?}",
            cursor.remaining()
        )));
    }
    Ok(out)
}

fn save_binary(m: &SnapshotMatrix, path: &Path) -> Result<()> {
    let coord_dim = m.coords().map_or(0, Coordinates::dim);
    let mut bytes = Vec::with_capacity(8 + 40 + 8 * m.n_nodes() * (m.n_snapshots() + coord_dim));
    bytes.extend_from_slice(MAGIC);
    for dim in [
        m.n_nodes() as u64,
        m.n_snapshots() as u64,
        m.n_cases() as u64,
        m.steps_per_case() as u64,
        coord_dim as u64,
    ] {
        bytes.extend_from_slice(&dim.to_le_bytes());
    }
    for v in m.values().as_slice() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(coords) = m.coords() {
        for node in 0..m.n_nodes() {
            for v in coords.point(node) {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_coords_sidecar(path: impl AsRef<Path>) -> Result<(Coordinates, Vec<String>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (header_no, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 0, "empty sidecar"))?;
    let fields: Vec<&str> = header.trim().split(',').collect();
    if fields.first() != Some(&"node_id") {
        return Err(Error::parse(
            path,
            header_no + 1,
            "header must start with node_id",
        ));
    }
    let dim = fields.len() - 1;
    if !(1..=3).contains(&dim) {
        return Err(Error::parse(
            path,
            header_no + 1,
            format!("expected 1..=3 coordinate columns, got {dim}"),
        ));
    }
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for (line_no, line) in lines {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = trimmed.split(',').collect();
        if parts.len() != dim + 1 {
            return Err(Error::parse(
                path,
                line_no + 1,
                format!("row has {} fields, expected {}", parts.len(), dim + 1),
            ));
        }
        ids.push(parts[0].to_string());
        for (d, raw) in parts[1..].iter().enumerate() {
            let v: f64 = raw.parse().map_err(|_| {
                Error::parse(
                    path,
                    line_no + 1,
                    format!("bad coordinate in column {}", d + 2),
                )
            })?;
            data.push(v);
        }
    }
    Ok((Coordinates::new(dim, data)?, ids))
}

pub fn save_coords_sidecar(
    coords: &Coordinates,
    node_ids: Option<&[String]>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("node_id");
    for axis in ["x", "y", "z"].iter().take(coords.dim()) {
        out.push(',');
        out.push_str(axis);
    }
    out.push('\n');
    for i in 0..coords.len() {
        match node_ids {
            Some(ids) => out.push_str(&ids[i]),
            None => out.push_str(&i.to_string()),
        }
        for v in coords.point(i) {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Cursor<'a> {
    fn new(path: &'a Path, bytes: &'a [u8]) -> Self {
        Self {
            path,
            bytes,
            offset: 0,
        }
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.offset + len > self.bytes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{:?}: payload truncated at byte {} (need {} more)",
                self.path,
                self.bytes.len(),
                self.offset + len - self.bytes.len()
            )));
        }
        let slice = &self.bytes[self.offset..self.offset + len];
        self.offset += len;
        Ok(slice)
    }

    fn u64(&mut self) -> Result<u64> {
        let s = self.take(8)?;
        Ok(u64::from_le_bytes(s.try_into().unwrap()))
    }

    fn f64(&mut self, row: usize, col: usize) -> Result<f64> {
        let s = self.take(8).map_err(|_| {
            Error::DimensionMismatch(format!(
                "{:?}: payload ends before value at row {row}, column {col}",
                self.path
            ))
        })?;
        Ok(f64::from_le_bytes(s.try_into().unwrap()))
    }

    fn at_end(&self) -> bool {
        self.offset == self.bytes.len()
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.offset
    }
}
