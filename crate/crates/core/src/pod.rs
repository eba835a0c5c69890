//! Proper orthogonal decomposition of snapshot matrices.
//!
//! The spectrum is computed by a thin SVD, or by the method of snapshots
//! (eigendecomposition of the small Gram matrix) when the matrix is tall
//! enough that the detour pays off. Either way the result is sorted by
//! decreasing singular value and sign-normalized so that every left vector's
//! largest-magnitude entry is positive, which keeps downstream selections
//! reproducible across backends.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};
use crate::snapshots::{MeanField, SnapshotMatrix};

/// Tall matrices switch to the method of snapshots beyond this aspect ratio.
const METHOD_OF_SNAPSHOTS_RATIO: usize = 4;

/// Full (or rank-capped) POD spectrum of a snapshot matrix.
#[derive(Debug, Clone)]
pub struct PodSpectrum {
    left: DMatrix<f64>,
    singular_values: DVector<f64>,
    right: DMatrix<f64>,
}

impl PodSpectrum {
    /// `n x k` matrix of left singular vectors (spatial modes).
    pub fn left_vectors(&self) -> &DMatrix<f64> {
        &self.left
    }

    /// Non-increasing singular values, length `k`.
    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }

    /// `m x k` matrix of right singular vectors.
    pub fn right_vectors(&self) -> &DMatrix<f64> {
        &self.right
    }

    pub fn rank_available(&self) -> usize {
        self.singular_values.len()
    }

    /// Number of strictly positive singular values.
    pub fn nonzero_count(&self) -> usize {
        self.singular_values.iter().filter(|s| **s > 0.0).count()
    }
}

/// Truncation criterion for [`truncate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    Rank(usize),
    /// Smallest rank whose cumulative squared-singular-value fraction
    /// reaches the target, in `(0, 1]`.
    Energy(f64),
}

/// Scaling convention of the retained modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeScaling {
    /// Orthonormal columns.
    Unit,
    /// Column `i` multiplied by `sigma_i`.
    SvScaled,
}

impl ModeScaling {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModeScaling::Unit => "unit",
            ModeScaling::SvScaled => "sv-scaled",
        }
    }
}

/// Truncated POD basis.
#[derive(Debug, Clone)]
pub struct PodBasis {
    modes: DMatrix<f64>,
    singular_values: DVector<f64>,
    scaling: ModeScaling,
    mean: Option<MeanField>,
}

impl PodBasis {
    /// Build a basis from externally computed modes. The singular values
    /// must match the modes column-for-column under the stated scaling.
    pub fn new(
        modes: DMatrix<f64>,
        singular_values: DVector<f64>,
        scaling: ModeScaling,
    ) -> Result<Self> {
        if modes.ncols() == 0 || modes.nrows() == 0 {
            return Err(Error::InvalidArgument("empty mode matrix".into()));
        }
        if singular_values.len() != modes.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} singular values for {} modes",
                singular_values.len(),
                modes.ncols()
            )));
        }
        if modes.iter().any(|v| !v.is_finite())
            || singular_values
                .iter()
                .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::InvalidArgument(
                "modes and singular values must be finite (values non-negative)".into(),
            ));
        }
        Ok(Self {
            modes,
            singular_values,
            scaling,
            mean: None,
        })
    }

    pub fn modes(&self) -> &DMatrix<f64> {
        &self.modes
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }

    pub fn scaling(&self) -> ModeScaling {
        self.scaling
    }

    pub fn rank(&self) -> usize {
        self.modes.ncols()
    }

    pub fn n_nodes(&self) -> usize {
        self.modes.nrows()
    }

    pub fn mean(&self) -> Option<&MeanField> {
        self.mean.as_ref()
    }

    /// Attach the mean field captured at fit time.
    pub fn with_mean(mut self, mean: MeanField) -> Result<Self> {
        if mean.len() != self.n_nodes() {
            return Err(Error::DimensionMismatch(format!(
                "mean field of length {} for a basis over {} nodes",
                mean.len(),
                self.n_nodes()
            )));
        }
        self.mean = Some(mean);
        Ok(self)
    }

    /// The orthonormal version of the modes, regardless of stored scaling.
    /// Columns with a zero singular value stay zero.
    pub fn unit_modes(&self) -> DMatrix<f64> {
        match self.scaling {
            ModeScaling::Unit => self.modes.clone(),
            ModeScaling::SvScaled => {
                let mut out = self.modes.clone();
                for (i, mut col) in out.column_iter_mut().enumerate() {
                    let s = self.singular_values[i];
                    if s > 0.0 {
                        col /= s;
                    }
                }
                out
            }
        }
    }
}

/// Compute the POD spectrum of a (typically centered) snapshot matrix.
///
/// `max_rank` caps the number of modes returned; it must not exceed
/// `min(n, m)`.
pub fn compute_pod(m: &SnapshotMatrix, max_rank: Option<usize>) -> Result<PodSpectrum> {
    let a = m.values();
    let (n, cols) = a.shape();
    let full = n.min(cols);
    let k = match max_rank {
        None => full,
        Some(0) => {
            return Err(Error::InvalidArgument("max_rank must be at least 1".into()));
        }
        Some(r) if r > full => {
            return Err(Error::InvalidArgument(format!(
                "max_rank {r} exceeds min(n, m) = {full}"
            )));
        }
        Some(r) => r,
    };

    let (mut left, mut sigma, mut right) = if n > METHOD_OF_SNAPSHOTS_RATIO * cols {
        method_of_snapshots(a)?
    } else {
        direct_svd(a)?
    };

    sort_descending(&mut left, &mut sigma, &mut right);
    fix_signs(&mut left, &mut right);

    Ok(PodSpectrum {
        left: left.columns(0, k).into_owned(),
        singular_values: sigma.rows(0, k).into_owned(),
        right: right.columns(0, k).into_owned(),
    })
}

fn direct_svd(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    // SVD::new iterates until convergence with nalgebra's own zero tolerance;
    // a tighter eps makes the implicit-shift QR misconverge.
    let svd = SVD::new(a.clone(), true, true);
    let left = svd.u.expect("u requested");
    let right = svd.v_t.expect("v_t requested").transpose();
    Ok((left, svd.singular_values, right))
}

/// Method of snapshots: eigendecompose the `m x m` Gram matrix `aᵀa`, then
/// recover the left vectors as `a v / sigma`. Directions whose singular value
/// is numerically zero cannot be recovered that way; they are filled in by
/// orthogonal completion so the left block stays orthonormal.
fn method_of_snapshots(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let (n, cols) = a.shape();
    let gram = a.transpose() * a;
    let eig = SymmetricEigen::new(gram);

    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .expect("finite eigenvalues")
    });

    let mut sigma = DVector::zeros(cols);
    let mut right = DMatrix::zeros(cols, cols);
    for (pos, &idx) in order.iter().enumerate() {
        sigma[pos] = eig.eigenvalues[idx].max(0.0).sqrt();
        right.set_column(pos, &eig.eigenvectors.column(idx));
    }

    let sigma_max = sigma[0];
    let tol = sigma_max * (n.max(cols) as f64) * f64::EPSILON;

    let mut left = DMatrix::zeros(n, cols);
    let mut filled = 0;
    for i in 0..cols {
        if sigma[i] > tol {
            let mut u = a * right.column(i) / sigma[i];
            orthogonalize(&mut u, &left, filled);
            let norm = u.norm();
            if norm > 0.5 {
                u /= norm;
                left.set_column(filled, &u);
                filled += 1;
                continue;
            }
        }
        // numerically rank-deficient from here; completion below
        break;
    }
    sigma.rows_mut(filled, cols - filled).fill(0.0);
    complete_basis(&mut left, filled)?;
    Ok((left, sigma, right))
}

/// Two-pass modified Gram-Schmidt projection of `v` against the first
/// `count` columns of `basis`.
fn orthogonalize(v: &mut DVector<f64>, basis: &DMatrix<f64>, count: usize) {
    for _ in 0..2 {
        for j in 0..count {
            let col = basis.column(j);
            let dot = col.dot(v);
            v.axpy(-dot, &col.into_owned(), 1.0);
        }
    }
}

/// Extend the first `filled` orthonormal columns to a full orthonormal set
/// using canonical basis vectors, deterministically.
fn complete_basis(basis: &mut DMatrix<f64>, mut filled: usize) -> Result<()> {
    let (n, k) = basis.shape();
    let mut candidate = 0;
    while filled < k {
        if candidate >= n {
            return Err(Error::NoConvergence(
                "failed to complete orthonormal basis".into(),
            ));
        }
        let mut v = DVector::zeros(n);
        v[candidate] = 1.0;
        candidate += 1;
        orthogonalize(&mut v, basis, filled);
        let norm = v.norm();
        if norm > 1e-6 {
            v /= norm;
            basis.set_column(filled, &v);
            filled += 1;
        }
    }
    Ok(())
}

fn sort_descending(left: &mut DMatrix<f64>, sigma: &mut DVector<f64>, right: &mut DMatrix<f64>) {
    let k = sigma.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).expect("finite sigma"));
    if order.iter().enumerate().all(|(pos, &idx)| pos == idx) {
        return;
    }
    let l = left.clone();
    let s = sigma.clone();
    let r = right.clone();
    for (pos, &idx) in order.iter().enumerate() {
        left.set_column(pos, &l.column(idx));
        sigma[pos] = s[idx];
        right.set_column(pos, &r.column(idx));
    }
}

/// Make each left vector's largest-magnitude entry positive; flip the paired
/// right vector so the product is unchanged.
fn fix_signs(left: &mut DMatrix<f64>, right: &mut DMatrix<f64>) {
    for i in 0..left.ncols() {
        let col = left.column(i);
        let mut arg = 0;
        let mut best = 0.0;
        for (j, &v) in col.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                arg = j;
            }
        }
        if left[(arg, i)] < 0.0 {
            left.column_mut(i).neg_mut();
            right.column_mut(i).neg_mut();
        }
    }
}

/// Cumulative squared-singular-value fractions; non-decreasing, final entry 1.
pub fn cumulative_energy(s: &PodSpectrum) -> Result<Vec<f64>> {
    let mut prefix = Vec::with_capacity(s.singular_values.len());
    let mut acc = 0.0;
    for v in s.singular_values.iter() {
        acc += v * v;
        prefix.push(acc);
    }
    let total = acc;
    if !(total > 0.0) {
        return Err(Error::DegenerateSpectrum(
            "all singular values are zero".into(),
        ));
    }
    Ok(prefix.into_iter().map(|p| p / total).collect())
}

/// Truncate a spectrum to a reduced basis by rank or energy fraction.
pub fn truncate(s: &PodSpectrum, criterion: Truncation, scaling: ModeScaling) -> Result<PodBasis> {
    let r = match criterion {
        Truncation::Rank(r) => {
            if r == 0 || r > s.rank_available() {
                return Err(Error::InvalidArgument(format!(
                    "rank {r} outside 1..={}",
                    s.rank_available()
                )));
            }
            r
        }
        Truncation::Energy(fraction) => {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "energy fraction must be in (0, 1], got {fraction}"
                )));
            }
            let energy = cumulative_energy(s)?;
            1 + energy
                .iter()
                .position(|&e| e >= fraction)
                .expect("final entry is 1.0")
        }
    };
    let mut modes = s.left.columns(0, r).into_owned();
    let singular_values = s.singular_values.rows(0, r).into_owned();
    if scaling == ModeScaling::SvScaled {
        for (i, mut col) in modes.column_iter_mut().enumerate() {
            col *= singular_values[i];
        }
    }
    Ok(PodBasis {
        modes,
        singular_values,
        scaling,
        mean: None,
    })
}

/// Least-squares coefficients of a field in the basis: `a = modes⁺ field`.
pub fn project(b: &PodBasis, field: &DVector<f64>) -> Result<DVector<f64>> {
    if field.len() != b.n_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "field of length {} for a basis over {} nodes",
            field.len(),
            b.n_nodes()
        )));
    }
    let svd = SVD::new(b.modes.clone(), true, true);
    let cutoff = svd.singular_values.max() * 1e-12;
    svd.solve(field, cutoff)
        .map_err(|e| Error::NoConvergence(e.to_string()))
}
