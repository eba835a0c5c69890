//! Sensor placement by QR factorization with column pivoting.
//!
//! Rows of the mode matrix are candidate sensor locations. Pivoting on the
//! transposed modes greedily grows the volume of the selected submatrix,
//! which keeps the gappy inversion well conditioned. Region and
//! minimum-distance constraints are enforced by zeroing the column norms of
//! excluded candidates before each pivot selection; the distance mask is
//! recomputed after every pick. Oversampling (more sensors than modes)
//! pivots on the modes' outer product instead.

mod io;

pub use io::{load_constraint_spec, load_sensor_indices, write_sensor_set};

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pod::PodBasis;
use crate::snapshots::Coordinates;

/// Hard cap on the node count for which the dense `n x n` oversampling
/// matrix may be formed.
pub const DEFAULT_OVERSAMPLE_NODE_BUDGET: usize = 10_000;

/// Bounded number of shuffle rounds for rejection sampling in
/// [`random_placement`].
const RANDOM_PLACEMENT_ROUNDS: usize = 256;

/// Column-pivoted QR factorization `X Pᵀ = Q R`.
#[derive(Debug, Clone)]
pub struct QrFactorization {
    /// Orthogonal `m x m` factor.
    pub q: DMatrix<f64>,
    /// Upper-triangular `m x n` factor.
    pub r_mat: DMatrix<f64>,
    /// `perm[k]` is the original column index pivoted to position `k`.
    pub perm: Vec<usize>,
}

impl QrFactorization {
    /// Gather the columns of `x` in pivot order, i.e. `X Pᵀ`.
    pub fn permute_columns(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for (k, &j) in self.perm.iter().enumerate() {
            out.set_column(k, &x.column(j));
        }
        out
    }
}

/// Ordered sensor selection; position in the list is the importance rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensorSet {
    indices: Vec<usize>,
}

impl SensorSet {
    pub fn new(indices: Vec<usize>, n_nodes: usize) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &i in &indices {
            if i >= n_nodes {
                return Err(Error::InvalidArgument(format!(
                    "sensor index {i} out of range (n = {n_nodes})"
                )));
            }
            if !seen.insert(i) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate sensor index {i}"
                )));
            }
        }
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty sensor set".into()));
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn p(&self) -> usize {
        self.indices.len()
    }

    /// The explicit measurement operator: row `i` is the canonical basis
    /// vector with a unit entry at the i-th sensor index.
    pub fn selection_matrix(&self, n_nodes: usize) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.p(), n_nodes);
        for (row, &node) in self.indices.iter().enumerate() {
            c[(row, node)] = 1.0;
        }
        c
    }
}

/// Forbidden-node set plus minimum Euclidean inter-sensor distance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintSpec {
    forbidden: BTreeSet<usize>,
    min_distance: f64,
}

impl ConstraintSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(forbidden: impl IntoIterator<Item = usize>, min_distance: f64) -> Result<Self> {
        if !(min_distance >= 0.0 && min_distance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "min_distance must be finite and >= 0, got {min_distance}"
            )));
        }
        Ok(Self {
            forbidden: forbidden.into_iter().collect(),
            min_distance,
        })
    }

    pub fn forbidden(&self) -> &BTreeSet<usize> {
        &self.forbidden
    }

    pub fn min_distance(&self) -> f64 {
        self.min_distance
    }

    /// Check this constraint set against a node count and (optionally)
    /// coordinates. A positive distance requires coordinates covering every
    /// node.
    pub fn validate(&self, n_nodes: usize, coords: Option<&Coordinates>) -> Result<()> {
        if let Some(&bad) = self.forbidden.iter().find(|&&i| i >= n_nodes) {
            return Err(Error::InvalidArgument(format!(
                "forbidden node {bad} out of range (n = {n_nodes})"
            )));
        }
        if self.min_distance > 0.0 {
            match coords {
                None => {
                    return Err(Error::InvalidArgument(
                        "min_distance > 0 requires node coordinates".into(),
                    ))
                }
                Some(c) if c.len() != n_nodes => {
                    return Err(Error::DimensionMismatch(format!(
                        "{} coordinate entries for {} nodes",
                        c.len(),
                        n_nodes
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

/// One Householder reflection step at (zero-based) pivot `k`: zeroes the
/// entries of column `k` strictly below the diagonal and updates the
/// remaining block, leaving the product `q * r_mat` unchanged. Pass `None`
/// for `q` when the orthogonal factor is not needed. A zero sub-column is
/// skipped, leaving both matrices untouched.
pub fn householder_step(q: Option<&mut DMatrix<f64>>, r_mat: &mut DMatrix<f64>, k: usize) {
    let (m, n) = r_mat.shape();
    assert!(k < m && k < n, "pivot {k} outside {m}x{n}");
    let v = r_mat.view((k, k), (m - k, 1)).into_owned();
    let norm = v.norm();
    if norm == 0.0 {
        return; // rank-deficient column
    }
    let alpha = if v[0] < 0.0 { -norm } else { norm };
    let mut u = DVector::from_column_slice(v.as_slice());
    u[0] += alpha;
    u /= u.norm();

    // the pivot column maps exactly to -alpha * e1
    r_mat[(k, k)] = -alpha;
    for i in k + 1..m {
        r_mat[(i, k)] = 0.0;
    }
    if n > k + 1 {
        let coeffs = (u.transpose() * r_mat.view((k, k + 1), (m - k, n - k - 1))).into_owned();
        r_mat
            .view_mut((k, k + 1), (m - k, n - k - 1))
            .gemm(-2.0, &u, &coeffs, 1.0);
    }
    if let Some(q) = q {
        let rows = q.nrows();
        let qu = (q.view((0, k), (rows, m - k)) * &u).into_owned();
        q.view_mut((0, k), (rows, m - k))
            .gemm(-2.0, &qu, &u.transpose(), 1.0);
    }
}

/// QR factorization with column pivoting: at each step the remaining column
/// of largest residual 2-norm is moved to the pivot position (ties broken by
/// the lowest current column position), then eliminated by a Householder
/// reflection.
pub fn qr_pivot(x: &DMatrix<f64>) -> Result<QrFactorization> {
    let (m, n) = x.shape();
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "matrix must be non-empty, got {m}x{n}"
        )));
    }
    for j in 0..n {
        for i in 0..m {
            if !x[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    let mut r_mat = x.clone();
    let mut q = DMatrix::identity(m, m);
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..m.min(n) {
        let mut best_j = k;
        let mut best = -1.0;
        for j in k..n {
            let norm = r_mat.view((k, j), (m - k, 1)).norm();
            if norm > best {
                best = norm;
                best_j = j;
            }
        }
        if best_j != k {
            r_mat.swap_columns(k, best_j);
            perm.swap(k, best_j);
        }
        householder_step(Some(&mut q), &mut r_mat, k);
    }
    Ok(QrFactorization { q, r_mat, perm })
}

/// Select `p` sensor locations from the basis by constrained column-pivoted
/// QR, using the default oversampling node budget.
pub fn place_sensors(
    b: &PodBasis,
    p: usize,
    c: &ConstraintSpec,
    coords: Option<&Coordinates>,
) -> Result<SensorSet> {
    place_sensors_with_budget(b, p, c, coords, DEFAULT_OVERSAMPLE_NODE_BUDGET)
}

/// [`place_sensors`] with an explicit cap on the node count for which the
/// dense oversampling matrix may be formed.
pub fn place_sensors_with_budget(
    b: &PodBasis,
    p: usize,
    c: &ConstraintSpec,
    coords: Option<&Coordinates>,
    oversample_node_budget: usize,
) -> Result<SensorSet> {
    let n = b.n_nodes();
    let r = b.rank();
    if p == 0 {
        return Err(Error::InvalidArgument("sensor count must be >= 1".into()));
    }
    c.validate(n, coords)?;
    let allowable = n - c.forbidden().len();
    if p > allowable {
        return Err(Error::Infeasible {
            placed: 0,
            requested: p,
            reason: format!("only {allowable} allowable nodes"),
        });
    }

    let oversampled = p > r;
    let mut r_mat = if oversampled {
        if n > oversample_node_budget {
            return Err(Error::InvalidArgument(format!(
                "oversampled placement would form a dense {n}x{n} matrix, above the budget of \
                 {oversample_node_budget} nodes; subsample the candidate nodes or raise the budget"
            )));
        }
        b.modes() * b.modes().transpose()
    } else {
        b.modes().transpose()
    };
    let m_rows = r_mat.nrows();

    let zero_tol = 1e-12
        * (0..n)
            .map(|j| r_mat.view((0, j), (m_rows, 1)).norm())
            .fold(0.0, f64::max);

    let mut gamma: Vec<usize> = (0..n).collect();
    for k in 0..p {
        let mut best: Option<(usize, f64)> = None;
        for j in k..n {
            let node = gamma[j];
            if c.forbidden().contains(&node) {
                continue;
            }
            if c.min_distance() > 0.0 {
                let coords = coords.expect("validated above");
                if gamma[..k]
                    .iter()
                    .any(|&s| coords.distance(node, s) < c.min_distance())
                {
                    continue;
                }
            }
            let norm = r_mat.view((k, j), (m_rows - k, 1)).norm();
            if best.is_none_or(|(_, bn)| norm > bn) {
                best = Some((j, norm));
            }
        }
        let (best_j, best_norm) = best.ok_or_else(|| Error::Infeasible {
            placed: k,
            requested: p,
            reason: "constraints exhaust the candidate nodes".into(),
        })?;
        if !oversampled && best_norm <= zero_tol {
            // On the direct path the mode matrix has rank r >= p, so a
            // collapse means the constraints left only degenerate candidates.
            // The oversampled matrix is rank-deficient by construction past
            // step r and legitimately continues on tiny residuals.
            return Err(Error::Infeasible {
                placed: k,
                requested: p,
                reason: format!("remaining candidate column norms collapsed (max {best_norm:.3e})"),
            });
        }
        if best_j != k {
            r_mat.swap_columns(k, best_j);
            gamma.swap(k, best_j);
        }
        householder_step(None, &mut r_mat, k);
    }
    SensorSet::new(gamma[..p].to_vec(), n)
}

/// `|det(Θᵀ Θ)|` for the rows of the basis picked by the selection; zero for
/// singular (e.g. undersampled) selections.
pub fn selection_volume(b: &PodBasis, s: &SensorSet) -> f64 {
    let r = b.rank();
    let theta = DMatrix::from_fn(s.p(), r, |row, col| b.modes()[(s.indices()[row], col)]);
    let gram = theta.transpose() * theta;
    gram.determinant().abs()
}

/// Uniform draw of `p` distinct allowable nodes, rejecting picks that
/// violate the minimum distance. Deterministic per seed; gives up after a
/// bounded number of shuffle rounds.
pub fn random_placement(
    n: usize,
    p: usize,
    c: &ConstraintSpec,
    coords: Option<&Coordinates>,
    seed: u64,
) -> Result<SensorSet> {
    if p == 0 {
        return Err(Error::InvalidArgument("sensor count must be >= 1".into()));
    }
    c.validate(n, coords)?;
    let allowable: Vec<usize> = (0..n).filter(|i| !c.forbidden().contains(i)).collect();
    if p > allowable.len() {
        return Err(Error::Infeasible {
            placed: 0,
            requested: p,
            reason: format!("only {} allowable nodes", allowable.len()),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RANDOM_PLACEMENT_ROUNDS {
        let mut pool = allowable.clone();
        pool.shuffle(&mut rng);
        let mut picked: Vec<usize> = Vec::with_capacity(p);
        for node in pool {
            if c.min_distance() > 0.0 {
                let coords = coords.expect("validated above");
                if picked
                    .iter()
                    .any(|&s| coords.distance(node, s) < c.min_distance())
                {
                    continue;
                }
            }
            picked.push(node);
            if picked.len() == p {
                return SensorSet::new(picked, n);
            }
        }
    }
    Err(Error::Infeasible {
        placed: 0,
        requested: p,
        reason: format!("no feasible draw in {RANDOM_PLACEMENT_ROUNDS} rejection rounds"),
    })
}
