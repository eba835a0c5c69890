//! Constraint and sensor-set files.
//!
//! Constraint files are key-value text. `forbidden_nodes` lists explicit
//! indices, `forbidden_box` gives an inclusive coordinate box (two numbers
//! per coordinate dimension) resolved against the node coordinates at load
//! time; both keys may repeat and the results merge.
//!
//! ```text
//! # example
//! min_distance = 0.25
//! forbidden_nodes = 3, 4, 5
//! forbidden_box = -0.5 0.5 -0.5 0.5
//! ```
//!
//! Sensor-set files are CSV with a rank column (1-based importance) plus
//! optional coordinates, preceded by `#` metadata lines.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use super::{ConstraintSpec, SensorSet};
use crate::error::{Error, Result};
use crate::snapshots::Coordinates;

/// Parse a constraint file, resolving coordinate boxes against `coords`.
pub fn load_constraint_spec(
    path: impl AsRef<Path>,
    coords: Option<&Coordinates>,
    n_nodes: usize,
) -> Result<ConstraintSpec> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut forbidden: BTreeSet<usize> = BTreeSet::new();
    let mut min_distance = 0.0_f64;

    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, line_no + 1, "expected key = value"))?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "min_distance" => {
                min_distance = value.parse().map_err(|_| {
                    Error::parse(path, line_no + 1, format!("bad min_distance {value:?}"))
                })?;
                if !(min_distance >= 0.0 && min_distance.is_finite()) {
                    return Err(Error::parse(
                        path,
                        line_no + 1,
                        "min_distance must be finite and >= 0",
                    ));
                }
            }
            "forbidden_nodes" => {
                for token in value.split([',', ' ']).filter(|t| !t.is_empty()) {
                    let idx: usize = token.parse().map_err(|_| {
                        Error::parse(path, line_no + 1, format!("bad node index {token:?}"))
                    })?;
                    if idx >= n_nodes {
                        return Err(Error::parse(
                            path,
                            line_no + 1,
                            format!("forbidden node {idx} out of range (n = {n_nodes})"),
                        ));
                    }
                    forbidden.insert(idx);
                }
            }
            "forbidden_box" => {
                let coords = coords.ok_or_else(|| {
                    Error::parse(path, line_no + 1, "forbidden_box requires node coordinates")
                })?;
                let bounds: Vec<f64> = value
                    .split_whitespace()
                    .map(|t| {
                        t.parse().map_err(|_| {
                            Error::parse(path, line_no + 1, format!("bad box bound {t:?}"))
                        })
                    })
                    .collect::<Result<_>>()?;
                if bounds.len() != 2 * coords.dim() {
                    return Err(Error::parse(
                        path,
                        line_no + 1,
                        format!(
                            "forbidden_box needs {} bounds for {}-d coordinates, got {}",
                            2 * coords.dim(),
                            coords.dim(),
                            bounds.len()
                        ),
                    ));
                }
                for node in 0..coords.len().min(n_nodes) {
                    let point = coords.point(node);
                    let inside = point
                        .iter()
                        .enumerate()
                        .all(|(d, &x)| x >= bounds[2 * d] && x <= bounds[2 * d + 1]);
                    if inside {
                        forbidden.insert(node);
                    }
                }
            }
            other => {
                return Err(Error::parse(
                    path,
                    line_no + 1,
                    format!("unknown key {other:?}"),
                ));
            }
        }
    }
    ConstraintSpec::new(forbidden, min_distance)
}

/// Write a sensor set with its ranking, optional coordinates and achieved
/// selection volume.
pub fn write_sensor_set(
    s: &SensorSet,
    coords: Option<&Coordinates>,
    volume: Option<f64>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(&format!("# p={}\n", s.p()));
    if let Some(v) = volume {
        out.push_str(&format!("# selection_volume={v:e}\n"));
    }
    out.push_str("rank,index");
    let dim = coords.map_or(0, Coordinates::dim);
    for axis in ["x", "y", "z"].iter().take(dim) {
        out.push(',');
        out.push_str(axis);
    }
    out.push('\n');
    for (rank, &node) in s.indices().iter().enumerate() {
        out.push_str(&format!("{},{}", rank + 1, node));
        if let Some(coords) = coords {
            for v in coords.point(node) {
                out.push_str(&format!(",{v}"));
            }
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read back the ordered indices of a sensor-set file.
pub fn load_sensor_indices(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<(usize, usize)> = Vec::new();
    let mut saw_header = false;
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if !line.starts_with("rank,index") {
                return Err(Error::parse(
                    path,
                    line_no + 1,
                    "expected rank,index header",
                ));
            }
            saw_header = true;
            continue;
        }
        let mut parts = line.split(',');
        let rank: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::parse(path, line_no + 1, "bad rank"))?;
        let index: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::parse(path, line_no + 1, "bad index"))?;
        rows.push((rank, index));
    }
    if rows.is_empty() {
        return Err(Error::parse(path, 0, "no sensors listed"));
    }
    rows.sort_by_key(|&(rank, _)| rank);
    Ok(rows.into_iter().map(|(_, idx)| idx).collect())
}
