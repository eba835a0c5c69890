//! Snapshot matrices: loading, generation, centering, partitioning and
//! per-sensor variance diagnostics.
//!
//! A snapshot matrix holds one spatial field per column. Columns are grouped
//! by case: case `c` occupies the contiguous column block
//! `c * steps_per_case .. (c + 1) * steps_per_case`. Steady-state data has
//! one step per case.

mod format;

pub use format::{
    load_coords_sidecar, load_snapshots, save_coords_sidecar, save_snapshots, sidecar_path,
    SnapshotFormat,
};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Per-node spatial coordinates, 1 to 3 dimensions, stored node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Coordinates {
    dim: usize,
    data: Vec<f64>,
}

impl Coordinates {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidArgument(format!(
                "coordinate dimension must be 1..=3, got {dim}"
            )));
        }
        if data.len() % dim != 0 {
            return Err(Error::DimensionMismatch(format!(
                "coordinate payload of {} values is not a multiple of dim {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(Self { dim, data })
    }

    /// One-dimensional coordinates from a plain list of positions.
    pub fn from_1d(xs: &[f64]) -> Result<Self> {
        Self::new(1, xs.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, node: usize) -> &[f64] {
        &self.data[node * self.dim..(node + 1) * self.dim]
    }

    /// Euclidean distance between two nodes.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.point(a)
            .iter()
            .zip(self.point(b))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

/// Full-state snapshot data: `n` spatial nodes by `m` snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    values: DMatrix<f64>,
    n_cases: usize,
    steps_per_case: usize,
    coords: Option<Coordinates>,
    node_ids: Option<Vec<String>>,
}

impl SnapshotMatrix {
    pub fn new(values: DMatrix<f64>, n_cases: usize, steps_per_case: usize) -> Result<Self> {
        let (n, m) = values.shape();
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument(format!(
                "snapshot matrix must be non-empty, got {n}x{m}"
            )));
        }
        if n_cases * steps_per_case != m {
            return Err(Error::DimensionMismatch(format!(
                "n_cases {n_cases} * steps_per_case {steps_per_case} != {m} snapshots"
            )));
        }
        for col in 0..m {
            for row in 0..n {
                if !values[(row, col)].is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
            }
        }
        Ok(Self {
            values,
            n_cases,
            steps_per_case,
            coords: None,
            node_ids: None,
        })
    }

    pub fn with_coords(mut self, coords: Coordinates) -> Result<Self> {
        if coords.len() != self.n_nodes() {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinate entries for {} nodes",
                coords.len(),
                self.n_nodes()
            )));
        }
        self.coords = Some(coords);
        Ok(self)
    }

    pub fn with_node_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n_nodes() {
            return Err(Error::DimensionMismatch(format!(
                "{} node ids for {} nodes",
                ids.len(),
                self.n_nodes()
            )));
        }
        self.node_ids = Some(ids);
        Ok(self)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Number of spatial nodes (rows).
    pub fn n_nodes(&self) -> usize {
        self.values.nrows()
    }

    /// Total number of snapshots (columns).
    pub fn n_snapshots(&self) -> usize {
        self.values.ncols()
    }

    pub fn n_cases(&self) -> usize {
        self.n_cases
    }

    pub fn steps_per_case(&self) -> usize {
        self.steps_per_case
    }

    pub fn coords(&self) -> Option<&Coordinates> {
        self.coords.as_ref()
    }

    pub fn node_ids(&self) -> Option<&[String]> {
        self.node_ids.as_deref()
    }

    /// Extract a sub-matrix holding the listed cases (all their snapshots),
    /// preserving node metadata.
    pub fn select_cases(&self, cases: &[usize]) -> Result<SnapshotMatrix> {
        if cases.is_empty() {
            return Err(Error::InvalidArgument("empty case selection".into()));
        }
        let mut seen = vec![false; self.n_cases];
        for &c in cases {
            if c >= self.n_cases {
                return Err(Error::InvalidArgument(format!(
                    "case {c} out of range (n_cases = {})",
                    self.n_cases
                )));
            }
            if seen[c] {
                return Err(Error::InvalidArgument(format!("duplicate case {c}")));
            }
            seen[c] = true;
        }
        let steps = self.steps_per_case;
        let mut out = DMatrix::zeros(self.n_nodes(), cases.len() * steps);
        for (ci, &c) in cases.iter().enumerate() {
            for t in 0..steps {
                out.set_column(ci * steps + t, &self.values.column(c * steps + t));
            }
        }
        Ok(SnapshotMatrix {
            values: out,
            n_cases: cases.len(),
            steps_per_case: steps,
            coords: self.coords.clone(),
            node_ids: self.node_ids.clone(),
        })
    }
}

/// Snapshot-averaged field.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanField {
    values: DVector<f64>,
}

impl MeanField {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        if let Some(row) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row, col: 0 });
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: DVector::zeros(n),
        }
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }
}

/// Deterministic train/test partition of snapshot columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
}

impl Split {
    /// Case indices on the training side, assuming the column grouping of
    /// the matrix this split was computed from.
    pub fn train_cases(&self, steps_per_case: usize) -> Vec<usize> {
        Self::cases_of(&self.train_indices, steps_per_case)
    }

    pub fn test_cases(&self, steps_per_case: usize) -> Vec<usize> {
        Self::cases_of(&self.test_indices, steps_per_case)
    }

    fn cases_of(cols: &[usize], steps: usize) -> Vec<usize> {
        let mut cases: Vec<usize> = cols.iter().map(|&c| c / steps).collect();
        cases.dedup();
        cases
    }
}

/// Case-wise population statistics of one sensor's readings across the
/// simulated cases, one entry per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceSeries {
    pub per_step_variance: Vec<f64>,
    pub per_step_mean: Vec<f64>,
    pub n_cases: usize,
}

/// Inclusive `lo : step : hi` range, MATLAB-colon style. The endpoint is
/// included when it lies on the grid within a small relative slack.
pub fn colon_range(lo: f64, step: f64, hi: f64) -> Result<Vec<f64>> {
    if !(lo.is_finite() && step.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidArgument("non-finite range bound".into()));
    }
    if step <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "range step must be > 0, got {step}"
        )));
    }
    if hi < lo {
        return Err(Error::InvalidArgument(format!(
            "range upper bound {hi} below lower bound {lo}"
        )));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| lo + step * i as f64).collect())
}

/// Build the parameterized Gaussian demonstration dataset: one column per
/// (mean, sigma) pair in lexicographic order (means outer, sigmas inner),
/// sampled on the uniform grid `grid_min : grid_step : grid_max`. Each column
/// is the unit-area normal density.
pub fn generate_gaussian_dataset(
    grid_min: f64,
    grid_max: f64,
    grid_step: f64,
    means: &[f64],
    sigmas: &[f64],
) -> Result<SnapshotMatrix> {
    if means.is_empty() || sigmas.is_empty() {
        return Err(Error::InvalidArgument(
            "means and sigmas must be non-empty".into(),
        ));
    }
    if grid_max <= grid_min {
        return Err(Error::InvalidArgument(format!(
            "grid_max {grid_max} must exceed grid_min {grid_min}"
        )));
    }
    if let Some(s) = sigmas.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "sigmas must be positive, got {s}"
        )));
    }
    if means.iter().any(|m| !m.is_finite()) {
        return Err(Error::InvalidArgument("non-finite mean".into()));
    }
    let grid = colon_range(grid_min, grid_step, grid_max)?;
    let n = grid.len();
    let m = means.len() * sigmas.len();
    let norm = |sigma: f64| 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let mut values = DMatrix::zeros(n, m);
    for (mi, &mu) in means.iter().enumerate() {
        for (si, &sigma) in sigmas.iter().enumerate() {
            let col = mi * sigmas.len() + si;
            let a = norm(sigma);
            for (i, &x) in grid.iter().enumerate() {
                let z = (x - mu) / sigma;
                values[(i, col)] = a * (-0.5 * z * z).exp();
            }
        }
    }
    SnapshotMatrix::new(values, m, 1)?.with_coords(Coordinates::from_1d(&grid)?)
}

/// Subtract the snapshot-averaged field from every column. Returns the
/// fluctuating part together with the mean, so `centered + mean` recovers
/// the input.
pub fn center(m: &SnapshotMatrix) -> (SnapshotMatrix, MeanField) {
    let n = m.n_nodes();
    let cols = m.n_snapshots() as f64;
    let mut mean = DVector::zeros(n);
    for col in m.values.column_iter() {
        mean += col;
    }
    mean /= cols;
    let mut centered = m.values.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let out = SnapshotMatrix {
        values: centered,
        n_cases: m.n_cases,
        steps_per_case: m.steps_per_case,
        coords: m.coords.clone(),
        node_ids: m.node_ids.clone(),
    };
    (out, MeanField { values: mean })
}

/// Partition snapshot columns into train and test sets at case granularity;
/// all snapshots of a case land on the same side. Deterministic per seed.
pub fn split(m: &SnapshotMatrix, train_fraction: f64, seed: u64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let n_cases = m.n_cases;
    if n_cases < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 cases so both sides are non-empty".into(),
        ));
    }
    let n_train = (train_fraction * n_cases as f64)
        .round()
        .clamp(1.0, (n_cases - 1) as f64) as usize;

    let mut cases: Vec<usize> = (0..n_cases).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cases.shuffle(&mut rng);

    let mut train_cases: Vec<usize> = cases[..n_train].to_vec();
    let mut test_cases: Vec<usize> = cases[n_train..].to_vec();
    train_cases.sort_unstable();
    test_cases.sort_unstable();

    let expand = |cs: &[usize]| -> Vec<usize> {
        cs.iter()
            .flat_map(|&c| c * m.steps_per_case..(c + 1) * m.steps_per_case)
            .collect()
    };
    Ok(Split {
        train_indices: expand(&train_cases),
        test_indices: expand(&test_cases),
        seed,
    })
}

/// Population mean and variance of one sensor's readings across cases, per
/// time step.
pub fn case_variance(m: &SnapshotMatrix, sensor_index: usize) -> Result<VarianceSeries> {
    if sensor_index >= m.n_nodes() {
        return Err(Error::InvalidArgument(format!(
            "sensor index {sensor_index} out of range (n = {})",
            m.n_nodes()
        )));
    }
    let n_cases = m.n_cases;
    let steps = m.steps_per_case;
    let mut per_step_mean = Vec::with_capacity(steps);
    let mut per_step_variance = Vec::with_capacity(steps);
    for t in 0..steps {
        let mut sum = 0.0;
        for i in 0..n_cases {
            sum += m.values[(sensor_index, i * steps + t)];
        }
        let mean = sum / n_cases as f64;
        let mut ss = 0.0;
        for i in 0..n_cases {
            let d = m.values[(sensor_index, i * steps + t)] - mean;
            ss += d * d;
        }
        per_step_mean.push(mean);
        per_step_variance.push(ss / n_cases as f64);
    }
    Ok(VarianceSeries {
        per_step_variance,
        per_step_mean,
        n_cases,
    })
}
