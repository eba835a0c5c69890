//! Gappy-POD reconstruction from sparse measurements and its evaluation
//! under noise.
//!
//! Measurements are gathers of the (centered) field at the sensor nodes.
//! Reconstruction estimates the mode coefficients from the sensor rows of
//! the basis — a direct solve when the sensor count matches the basis rank,
//! a cutoff pseudoinverse when oversampled — then expands back to the full
//! field, re-adding the stored mean when one is supplied.

use nalgebra::{DMatrix, SVD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::placement::SensorSet;
use crate::pod::PodBasis;
use crate::seed::derive_seed;
use crate::snapshots::{MeanField, SnapshotMatrix};

/// Relative singular-value cutoff for the oversampled pseudoinverse.
const PSEUDOINVERSE_CUTOFF: f64 = 1e-10;

/// Sparse measurements: one column per measured snapshot.
#[derive(Debug, Clone)]
pub struct MeasurementSeries {
    values: DMatrix<f64>,
    sensor_set: SensorSet,
    noise_sigma: f64,
}

impl MeasurementSeries {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn sensor_set(&self) -> &SensorSet {
        &self.sensor_set
    }

    /// Standard deviation of the noise applied so far (0 for clean).
    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }
}

/// Full-field estimate along with the coefficients and the conditioning of
/// the sensor-row system that produced it.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// `n x k` reconstructed fields.
    pub fields: DMatrix<f64>,
    /// `r x k` estimated mode coefficients.
    pub coefficients: DMatrix<f64>,
    /// Condition estimate of the sensor-row matrix.
    pub condition: f64,
}

/// A labeled sensor configuration for [`noise_sweep`].
#[derive(Debug, Clone)]
pub struct SweepStrategy {
    pub label: String,
    pub sensors: SensorSet,
}

impl SweepStrategy {
    pub fn new(label: impl Into<String>, sensors: SensorSet) -> Self {
        Self {
            label: label.into(),
            sensors,
        }
    }
}

/// Aggregated sweep result for one (strategy, noise level) pair.
#[derive(Debug, Clone)]
pub struct ReportEntry {
    pub strategy: String,
    pub noise_sigma: f64,
    pub nmse_mean: f64,
    pub nmse_std: f64,
    /// Successful trials behind the statistics; 0 marks the entry infeasible.
    pub trials_ok: usize,
    pub cond_mean: f64,
}

/// NMSE statistics per noise level per placement strategy.
#[derive(Debug, Clone)]
pub struct ReconstructionReport {
    pub entries: Vec<ReportEntry>,
    /// Requested trials per entry.
    pub trials: usize,
    /// NMSE of the direct rank-r projection of the test data; no sparse
    /// reconstruction can beat this bound.
    pub projection_nmse: f64,
}

/// Gather the rows of `values` at the sensor nodes; a pure selection, no
/// interpolation.
pub fn measure(values: &DMatrix<f64>, s: &SensorSet) -> Result<MeasurementSeries> {
    let n = values.nrows();
    if let Some(&bad) = s.indices().iter().find(|&&i| i >= n) {
        return Err(Error::DimensionMismatch(format!(
            "sensor index {bad} out of range for a field over {n} nodes"
        )));
    }
    let out = DMatrix::from_fn(s.p(), values.ncols(), |row, col| {
        values[(s.indices()[row], col)]
    });
    Ok(MeasurementSeries {
        values: out,
        sensor_set: s.clone(),
        noise_sigma: 0.0,
    })
}

/// Add i.i.d. zero-mean Gaussian noise to every entry. Deterministic per
/// seed; a zero sigma returns the input unchanged.
pub fn add_noise(m: &MeasurementSeries, sigma: f64, seed: u64) -> Result<MeasurementSeries> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise sigma must be finite and >= 0, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(m.clone());
    }
    let normal = Normal::new(0.0, sigma).expect("validated sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = m.values.clone();
    for v in values.iter_mut() {
        *v += normal.sample(&mut rng);
    }
    Ok(MeasurementSeries {
        values,
        sensor_set: m.sensor_set.clone(),
        noise_sigma: (m.noise_sigma * m.noise_sigma + sigma * sigma).sqrt(),
    })
}

/// Reconstruct full fields from sparse measurements of the centered field.
///
/// Solves the sensor-row system directly when `p == r` and by a
/// rank-revealing pseudoinverse when `p > r`, then expands `modes * a`,
/// adding `mean` when given. Fails when `p < r` or when the sensor-row
/// matrix is numerically singular.
pub fn reconstruct(
    b: &PodBasis,
    s: &SensorSet,
    meas: &MeasurementSeries,
    mean: Option<&MeanField>,
) -> Result<Reconstruction> {
    if s.indices() != meas.sensor_set.indices() {
        return Err(Error::DimensionMismatch(
            "measurement series belongs to a different sensor set".into(),
        ));
    }
    let p = s.p();
    let r = b.rank();
    let n = b.n_nodes();
    if p < r {
        return Err(Error::UnderDetermined {
            sensors: p,
            modes: r,
        });
    }
    if let Some(mean) = mean {
        if mean.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "mean field of length {} for a basis over {n} nodes",
                mean.len()
            )));
        }
    }
    if let Some(&bad) = s.indices().iter().find(|&&i| i >= n) {
        return Err(Error::DimensionMismatch(format!(
            "sensor index {bad} out of range for a basis over {n} nodes"
        )));
    }

    let theta = DMatrix::from_fn(p, r, |row, col| b.modes()[(s.indices()[row], col)]);
    let svd = SVD::new(theta, true, true);
    let sigma_max = svd.singular_values.max();
    let sigma_min = svd.singular_values.min();
    let condition = if sigma_min > 0.0 {
        sigma_max / sigma_min
    } else {
        f64::INFINITY
    };
    if condition > 1.0 / f64::EPSILON {
        return Err(Error::IllConditioned {
            indices: s.indices().to_vec(),
            condition,
        });
    }

    let cutoff = if p == r {
        0.0
    } else {
        PSEUDOINVERSE_CUTOFF * sigma_max
    };
    let coefficients = svd
        .solve(&meas.values, cutoff)
        .map_err(|e| Error::NoConvergence(e.to_string()))?;

    let mut fields = b.modes() * &coefficients;
    if let Some(mean) = mean {
        for mut col in fields.column_iter_mut() {
            col += mean.values();
        }
    }
    Ok(Reconstruction {
        fields,
        coefficients,
        condition,
    })
}

/// Normalized mean squared error: `‖estimate − truth‖²_F` over the energy of
/// the truth around the reference field.
pub fn nmse(estimate: &DMatrix<f64>, truth: &DMatrix<f64>, reference: &MeanField) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(Error::DimensionMismatch(format!(
            "estimate {:?} vs truth {:?}",
            estimate.shape(),
            truth.shape()
        )));
    }
    if reference.len() != truth.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "reference of length {} for fields over {} nodes",
            reference.len(),
            truth.nrows()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for col in 0..truth.ncols() {
        for row in 0..truth.nrows() {
            let e = estimate[(row, col)] - truth[(row, col)];
            num += e * e;
            let d = truth[(row, col)] - reference.values()[row];
            den += d * d;
        }
    }
    if den == 0.0 {
        return Err(Error::InvalidArgument(
            "zero-variance truth: NMSE normalizer vanishes".into(),
        ));
    }
    Ok(num / den)
}

/// Evaluate placement strategies against a test set across noise levels.
///
/// Per (strategy, level) pair, `trials` independently seeded noise draws are
/// added to the clean sensor readings, the full test set is reconstructed
/// and scored, and the NMSE mean and standard deviation are recorded. Trial
/// seeds derive from the master seed, so the whole sweep is reproducible
/// bit for bit. A strategy whose trials all fail at some level is reported
/// with `trials_ok = 0` instead of aborting the sweep.
pub fn noise_sweep(
    b: &PodBasis,
    strategies: &[SweepStrategy],
    test: &SnapshotMatrix,
    levels: &[f64],
    trials: usize,
    master_seed: u64,
) -> Result<ReconstructionReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    if strategies.is_empty() {
        return Err(Error::InvalidArgument("no strategies given".into()));
    }
    if levels.is_empty() {
        return Err(Error::InvalidArgument("no noise levels given".into()));
    }
    if let Some(bad) = levels.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "noise levels must be finite and >= 0, got {bad}"
        )));
    }
    let n = b.n_nodes();
    if test.n_nodes() != n {
        return Err(Error::DimensionMismatch(format!(
            "test set over {} nodes, basis over {n}",
            test.n_nodes()
        )));
    }
    for strat in strategies {
        if strat.sensors.p() < b.rank() {
            return Err(Error::UnderDetermined {
                sensors: strat.sensors.p(),
                modes: b.rank(),
            });
        }
    }

    let mean = b.mean();
    let reference = mean.cloned().unwrap_or_else(|| MeanField::zeros(n));
    let mut centered = test.values().clone();
    if let Some(mean) = mean {
        for mut col in centered.column_iter_mut() {
            col -= mean.values();
        }
    }

    // orthogonal-projection bound: gappy reconstruction can never beat it
    let projection_nmse = {
        let svd = SVD::new(b.modes().clone(), true, true);
        let cutoff = svd.singular_values.max() * 1e-12;
        let coeffs = svd
            .solve(&centered, cutoff)
            .map_err(|e| Error::NoConvergence(e.to_string()))?;
        let mut proj = b.modes() * coeffs;
        if let Some(mean) = mean {
            for mut col in proj.column_iter_mut() {
                col += mean.values();
            }
        }
        nmse(&proj, test.values(), &reference)?
    };

    let mut entries = Vec::with_capacity(strategies.len() * levels.len());
    for (j, strat) in strategies.iter().enumerate() {
        let clean = measure(&centered, &strat.sensors)?;
        for (li, &level) in levels.iter().enumerate() {
            let mut scores = Vec::with_capacity(trials);
            let mut conds = Vec::with_capacity(trials);
            for t in 0..trials {
                let seed = derive_seed(master_seed, &[j as u64, li as u64, t as u64]);
                let noisy = add_noise(&clean, level, seed)?;
                match reconstruct(b, &strat.sensors, &noisy, mean) {
                    Ok(rec) => {
                        scores.push(nmse(&rec.fields, test.values(), &reference)?);
                        conds.push(rec.condition);
                    }
                    Err(
                        Error::IllConditioned { .. }
                        | Error::UnderDetermined { .. }
                        | Error::NoConvergence(_),
                    ) => {}
                    Err(other) => return Err(other),
                }
            }
            let (nmse_mean, nmse_std) = mean_std(&scores);
            let (cond_mean, _) = mean_std(&conds);
            // sparse estimates live in the basis span, so they can never
            // score below the orthogonal projection of the truth
            debug_assert!(
                scores
                    .iter()
                    .all(|s| *s >= projection_nmse - 1e-12 * projection_nmse.max(1.0)),
                "reconstruction beat the projection bound"
            );
            entries.push(ReportEntry {
                strategy: strat.label.clone(),
                noise_sigma: level,
                nmse_mean,
                nmse_std,
                trials_ok: scores.len(),
                cond_mean,
            });
        }
    }
    Ok(ReconstructionReport {
        entries,
        trials,
        projection_nmse,
    })
}

/// Population mean and standard deviation; identical samples give an exact
/// zero spread, and an empty slice gives NaNs (infeasible entry).
fn mean_std(vals: &[f64]) -> (f64, f64) {
    if vals.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    if vals.windows(2).all(|w| w[0] == w[1]) {
        return (vals[0], 0.0);
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
    (mean, var.sqrt())
}

/// Render the report as the plottable table
/// `strategy,noise_sigma,nmse_mean,nmse_std,trials,cond_mean`.
pub fn format_report(report: &ReconstructionReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("# projection_nmse={:e}\n", report.projection_nmse));
    out.push_str(&format!("# trials_requested={}\n", report.trials));
    out.push_str("strategy,noise_sigma,nmse_mean,nmse_std,trials,cond_mean\n");
    for e in &report.entries {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            e.strategy, e.noise_sigma, e.nmse_mean, e.nmse_std, e.trials_ok, e.cond_mean
        ));
    }
    out
}

/// Render per-snapshot coefficient vectors as CSV, one row per snapshot.
pub fn format_coefficient_table(coefficients: &DMatrix<f64>) -> String {
    let mut out = String::from("snapshot");
    for i in 0..coefficients.nrows() {
        out.push_str(&format!(",a_{i}"));
    }
    out.push('\n');
    for col in 0..coefficients.ncols() {
        out.push_str(&col.to_string());
        for row in 0..coefficients.nrows() {
            out.push_str(&format!(",{}", coefficients[(row, col)]));
        }
        out.push('\n');
    }
    out
}
