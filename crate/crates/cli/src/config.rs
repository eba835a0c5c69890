//! Pipeline configuration file.
//!
//! A single key-value text file with `[section]` headers mirroring the
//! library modules; command-line flags override the `[run]` values. Paths
//! inside the file resolve relative to the file's own directory, so a config
//! plus its data travels as a unit.
//!
//! ```text
//! [dataset]
//! source = generate          # or: file
//! grid = -10:0.01:10
//! means = -2, 3
//! sigmas = 0.5:0.2:6.5
//! center = true
//! train_fraction = 0.903226
//!
//! [pod]
//! energy = 0.99              # or: rank = 5
//! scaling = sv-scaled        # or: unit
//!
//! [placement]
//! sensors = 5
//! constraints = constraints.txt
//!
//! [evaluate]
//! levels = 0, 0.01, 0.02, 0.04, 0.08
//! trials = 10
//! sensor_counts = 5, 10
//! random_baselines = 1
//!
//! [run]
//! seed = 17
//! out = out
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sparsense::pod::{ModeScaling, Truncation};
use sparsense::snapshots::{colon_range, SnapshotFormat};
use sparsense::{Error, Result};

#[derive(Debug, Clone)]
pub enum DatasetSource {
    Generate {
        grid_min: f64,
        grid_max: f64,
        grid_step: f64,
        means: Vec<f64>,
        sigmas: Vec<f64>,
    },
    File {
        path: PathBuf,
        format: SnapshotFormat,
    },
}

#[derive(Debug, Clone)]
pub struct DatasetConfig {
    pub source: DatasetSource,
    pub center: bool,
    pub train_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct PodConfig {
    pub criterion: Truncation,
    pub scaling: ModeScaling,
}

#[derive(Debug, Clone)]
pub struct PlacementConfig {
    pub sensors: usize,
    pub constraints: Option<PathBuf>,
    pub oversample_budget: usize,
}

#[derive(Debug, Clone)]
pub struct EvaluateConfig {
    pub levels: Vec<f64>,
    pub trials: usize,
    /// Sensor counts to evaluate; defaults to the placement count.
    pub sensor_counts: Vec<usize>,
    pub random_baselines: usize,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub dataset: DatasetConfig,
    pub pod: PodConfig,
    pub placement: PlacementConfig,
    pub evaluate: EvaluateConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Raw file bytes, kept for the run manifest hash.
    pub raw: String,
}

impl PipelineConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.into(),
            source: e,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&raw, base, path)
    }

    fn parse(raw: &str, base: &Path, path: &Path) -> Result<Self> {
        let mut entries: BTreeMap<(String, String), (String, usize)> = BTreeMap::new();
        let mut section = String::new();
        for (line_no, line) in raw.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.into(),
                line: line_no + 1,
                message: "expected key = value".into(),
            })?;
            let prev = entries.insert(
                (section.clone(), key.trim().to_string()),
                (value.trim().to_string(), line_no + 1),
            );
            if prev.is_some() {
                return Err(Error::Parse {
                    path: path.into(),
                    line: line_no + 1,
                    message: format!("duplicate key {:?} in section [{section}]", key.trim()),
                });
            }
        }
        let mut reader = Reader {
            entries,
            path: path.to_path_buf(),
        };

        let source = match reader.take("dataset", "source")?.as_deref() {
            None | Some("generate") => {
                let (grid_min, grid_step, grid_max) =
                    parse_range_spec(&reader.require("dataset", "grid")?, &reader.path)?;
                let means = reader
                    .take("dataset", "means")?
                    .map(|v| parse_real_list(&v, &reader.path))
                    .transpose()?
                    .unwrap_or_default();
                let sigmas = reader
                    .take("dataset", "sigmas")?
                    .map(|v| parse_real_list(&v, &reader.path))
                    .transpose()?
                    .unwrap_or_default();
                DatasetSource::Generate {
                    grid_min,
                    grid_max,
                    grid_step,
                    means,
                    sigmas,
                }
            }
            Some("file") => {
                let rel = reader.require("dataset", "path")?;
                let format = match reader.take("dataset", "format")?.as_deref() {
                    None | Some("packed") | Some("packed-binary") => SnapshotFormat::PackedBinary,
                    Some("csv") => SnapshotFormat::Csv,
                    Some(other) => {
                        return Err(reader.error(format!("unknown dataset format {other:?}")))
                    }
                };
                DatasetSource::File {
                    path: base.join(rel),
                    format,
                }
            }
            Some(other) => return Err(reader.error(format!("unknown dataset source {other:?}"))),
        };
        let dataset = DatasetConfig {
            source,
            center: reader.take_bool("dataset", "center")?.unwrap_or(true),
            train_fraction: reader
                .take_f64("dataset", "train_fraction")?
                .unwrap_or(0.85),
        };

        let criterion = match (
            reader.take_f64("pod", "energy")?,
            reader.take_usize("pod", "rank")?,
        ) {
            (Some(_), Some(_)) => {
                return Err(reader.error("give either pod.energy or pod.rank, not both"))
            }
            (None, Some(r)) => Truncation::Rank(r),
            (energy, None) => Truncation::Energy(energy.unwrap_or(0.99)),
        };
        let scaling = match reader.take("pod", "scaling")?.as_deref() {
            None | Some("sv-scaled") => ModeScaling::SvScaled,
            Some("unit") => ModeScaling::Unit,
            Some(other) => return Err(reader.error(format!("unknown mode scaling {other:?}"))),
        };
        let pod = PodConfig { criterion, scaling };

        let placement = PlacementConfig {
            sensors: reader.take_usize("placement", "sensors")?.unwrap_or(0),
            constraints: reader
                .take("placement", "constraints")?
                .map(|p| base.join(p)),
            oversample_budget: reader
                .take_usize("placement", "oversample_budget")?
                .unwrap_or(sparsense::placement::DEFAULT_OVERSAMPLE_NODE_BUDGET),
        };

        let sensors_default = placement.sensors;
        let evaluate = EvaluateConfig {
            levels: reader
                .take("evaluate", "levels")?
                .map(|v| parse_real_list(&v, &reader.path))
                .transpose()?
                .unwrap_or_else(|| vec![0.0]),
            trials: reader.take_usize("evaluate", "trials")?.unwrap_or(10),
            sensor_counts: reader
                .take("evaluate", "sensor_counts")?
                .map(|v| parse_usize_list(&v, &reader.path))
                .transpose()?
                .unwrap_or_else(|| vec![sensors_default]),
            random_baselines: reader
                .take_usize("evaluate", "random_baselines")?
                .unwrap_or(1),
        };

        let seed = reader.take_u64("run", "seed")?.unwrap_or(17);
        let out_dir = base.join(reader.take("run", "out")?.unwrap_or_else(|| "out".into()));

        if let Some(((section, key), (_, line))) = reader.entries.iter().next() {
            return Err(Error::Parse {
                path: reader.path.clone(),
                line: *line,
                message: format!("unknown key {key:?} in section [{section}]"),
            });
        }

        Ok(PipelineConfig {
            dataset,
            pod,
            placement,
            evaluate,
            seed,
            out_dir,
            raw: raw.to_string(),
        })
    }
}

struct Reader {
    entries: BTreeMap<(String, String), (String, usize)>,
    path: PathBuf,
}

impl Reader {
    fn take(&mut self, section: &str, key: &str) -> Result<Option<String>> {
        Ok(self
            .entries
            .remove(&(section.to_string(), key.to_string()))
            .map(|(v, _)| v))
    }

    fn require(&mut self, section: &str, key: &str) -> Result<String> {
        self.take(section, key)?.ok_or_else(|| {
            self.error(format!(
                "missing required key {key:?} in section [{section}]"
            ))
        })
    }

    fn take_f64(&mut self, section: &str, key: &str) -> Result<Option<f64>> {
        self.take(section, key)?
            .map(|v| {
                v.parse()
                    .map_err(|_| self.error(format!("bad number {v:?} for {section}.{key}")))
            })
            .transpose()
    }

    fn take_u64(&mut self, section: &str, key: &str) -> Result<Option<u64>> {
        self.take(section, key)?
            .map(|v| {
                v.parse()
                    .map_err(|_| self.error(format!("bad integer {v:?} for {section}.{key}")))
            })
            .transpose()
    }

    fn take_usize(&mut self, section: &str, key: &str) -> Result<Option<usize>> {
        self.take(section, key)?
            .map(|v| {
                v.parse()
                    .map_err(|_| self.error(format!("bad integer {v:?} for {section}.{key}")))
            })
            .transpose()
    }

    fn take_bool(&mut self, section: &str, key: &str) -> Result<Option<bool>> {
        self.take(section, key)?
            .map(|v| match v.as_str() {
                "true" | "on" | "yes" => Ok(true),
                "false" | "off" | "no" => Ok(false),
                other => Err(self.error(format!("bad boolean {other:?} for {section}.{key}"))),
            })
            .transpose()
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line: 0,
            message: message.into(),
        }
    }
}

/// `lo:step:hi` triple.
fn parse_range_spec(token: &str, path: &Path) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = token.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Parse {
            path: path.into(),
            line: 0,
            message: format!("expected lo:step:hi, got {token:?}"),
        });
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|t| {
            t.trim().parse().map_err(|_| Error::Parse {
                path: path.into(),
                line: 0,
                message: format!("bad number {t:?} in range {token:?}"),
            })
        })
        .collect::<Result<_>>()?;
    Ok((nums[0], nums[1], nums[2]))
}

/// Comma-separated reals; a `lo:step:hi` token expands to the inclusive range.
fn parse_real_list(value: &str, path: &Path) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for token in value.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if token.contains(':') {
            let (lo, step, hi) = parse_range_spec(token, path)?;
            out.extend(colon_range(lo, step, hi)?);
        } else {
            out.push(token.parse().map_err(|_| Error::Parse {
                path: path.into(),
                line: 0,
                message: format!("bad number {token:?}"),
            })?);
        }
    }
    Ok(out)
}

fn parse_usize_list(value: &str, path: &Path) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse().map_err(|_| Error::Parse {
                path: path.into(),
                line: 0,
                message: format!("bad integer {t:?}"),
            })
        })
        .collect()
}

/// FNV-1a over the raw config text; recorded in the run manifest.
pub fn config_hash(raw: &str) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325_u64;
    for b in raw.bytes() {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x1000_0000_01b3);
    }
    hash
}
