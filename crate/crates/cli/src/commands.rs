//! The four pipeline commands: generate, pod, place, evaluate.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use sparsense::placement::{
    load_constraint_spec, place_sensors_with_budget, random_placement, selection_volume,
    write_sensor_set, ConstraintSpec, SensorSet,
};
use sparsense::pod::{compute_pod, cumulative_energy, truncate, PodBasis, PodSpectrum};
use sparsense::reconstruct::{
    format_coefficient_table, format_report, measure, noise_sweep, reconstruct, SweepStrategy,
};
use sparsense::seed::derive_seed;
use sparsense::snapshots::{
    center, generate_gaussian_dataset, load_snapshots, save_coords_sidecar, save_snapshots,
    sidecar_path, split, SnapshotFormat, SnapshotMatrix, Split,
};
use sparsense::Error;

use crate::config::{config_hash, DatasetSource, PipelineConfig};

/// Seed-tag for random baseline draws inside `evaluate`.
const RANDOM_BASELINE_TAG: u64 = 0x7261_6e64;

pub fn cmd_generate(cfg: &PipelineConfig) -> anyhow::Result<()> {
    let data = build_dataset(cfg)?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::Io {
        path: cfg.out_dir.clone(),
        source: e,
    })?;
    let data_path = cfg.out_dir.join("dataset.snap");
    save_snapshots(&data, &data_path, SnapshotFormat::PackedBinary)?;
    if let Some(coords) = data.coords() {
        save_coords_sidecar(coords, data.node_ids(), sidecar_path(&data_path))?;
    }
    println!(
        "wrote {} ({} nodes x {} snapshots, {} cases x {} steps)",
        data_path.display(),
        data.n_nodes(),
        data.n_snapshots(),
        data.n_cases(),
        data.steps_per_case()
    );
    Ok(())
}

pub fn cmd_pod(cfg: &PipelineConfig) -> anyhow::Result<()> {
    let fit = fit_pipeline(cfg)?;
    let energy = cumulative_energy(&fit.spectrum)?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::Io {
        path: cfg.out_dir.clone(),
        source: e,
    })?;
    let mut table = String::from("rank,singular_value,cumulative_energy\n");
    for (i, e) in energy.iter().enumerate() {
        table.push_str(&format!(
            "{},{},{}\n",
            i + 1,
            fit.spectrum.singular_values()[i],
            e
        ));
    }
    let path = cfg.out_dir.join("energy.csv");
    write_file(&path, &table)?;
    println!(
        "POD of {} training snapshots over {} nodes",
        fit.split.train_indices.len(),
        fit.data.n_nodes()
    );
    print_energy_head(&fit.spectrum, &energy, fit.basis.rank());
    println!(
        "criterion {:?} ({}) -> rank {}",
        cfg.pod.criterion,
        fit.basis.scaling().as_str(),
        fit.basis.rank()
    );
    println!("wrote {}", path.display());
    Ok(())
}

pub fn cmd_place(cfg: &PipelineConfig) -> anyhow::Result<()> {
    let fit = fit_pipeline(cfg)?;
    let p = cfg.placement.sensors;
    if p == 0 {
        return Err(Error::InvalidArgument(
            "placement.sensors must be set (>= 1) for `place`".into(),
        )
        .into());
    }
    if p < fit.basis.rank() {
        eprintln!(
            "warning: {p} sensors < basis rank {}; gappy reconstruction from this set will be \
             under-determined",
            fit.basis.rank()
        );
    }
    let constraints = load_constraints(cfg, &fit.data)?;
    let sensors = place_sensors_with_budget(
        &fit.basis,
        p,
        &constraints,
        fit.data.coords(),
        cfg.placement.oversample_budget,
    )?;
    let volume = selection_volume(&fit.basis, &sensors);

    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::Io {
        path: cfg.out_dir.clone(),
        source: e,
    })?;
    let path = cfg.out_dir.join("sensors.csv");
    write_sensor_set(&sensors, fit.data.coords(), Some(volume), &path)?;

    let energy = cumulative_energy(&fit.spectrum)?;
    print_energy_head(&fit.spectrum, &energy, fit.basis.rank());
    println!("rank  node      location");
    for (rank, &node) in sensors.indices().iter().enumerate() {
        let loc = match fit.data.coords() {
            Some(c) => c
                .point(node)
                .iter()
                .map(|v| format!("{v:.4}"))
                .collect::<Vec<_>>()
                .join(", "),
            None => "-".into(),
        };
        println!("{:>4}  {:>6}    {}", rank + 1, node, loc);
    }
    println!("selection volume {volume:e}");
    println!("wrote {}", path.display());
    Ok(())
}

pub fn cmd_evaluate(cfg: &PipelineConfig) -> anyhow::Result<()> {
    let fit = fit_pipeline(cfg)?;
    let test_cases = fit.split.test_cases(fit.data.steps_per_case());
    let test = fit.data.select_cases(&test_cases)?;
    let constraints = load_constraints(cfg, &fit.data)?;

    let mut strategies = Vec::new();
    let mut manifest_lines = Vec::new();
    for &count in &cfg.evaluate.sensor_counts {
        let optimal = place_sensors_with_budget(
            &fit.basis,
            count,
            &constraints,
            fit.data.coords(),
            cfg.placement.oversample_budget,
        )?;
        manifest_lines.push(format!(
            "strategy optimal-p{count}: {}",
            join_indices(&optimal)
        ));
        strategies.push(SweepStrategy::new(format!("optimal-p{count}"), optimal));
        for b in 0..cfg.evaluate.random_baselines {
            let seed = derive_seed(cfg.seed, &[RANDOM_BASELINE_TAG, count as u64, b as u64]);
            let baseline = random_placement(
                fit.data.n_nodes(),
                count,
                &constraints,
                fit.data.coords(),
                seed,
            )?;
            manifest_lines.push(format!(
                "strategy random-p{count}-s{b} (seed {seed:#018x}): {}",
                join_indices(&baseline)
            ));
            strategies.push(SweepStrategy::new(
                format!("random-p{count}-s{b}"),
                baseline,
            ));
        }
    }

    let report = noise_sweep(
        &fit.basis,
        &strategies,
        &test,
        &cfg.evaluate.levels,
        cfg.evaluate.trials,
        cfg.seed,
    )?;

    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::Io {
        path: cfg.out_dir.clone(),
        source: e,
    })?;
    let report_path = cfg.out_dir.join("report.csv");
    let table = format_report(&report);
    write_file(&report_path, &table)?;
    print!("{table}");

    // clean-measurement coefficients of the first strategy, per test snapshot
    let first = &strategies[0];
    let mut centered = test.values().clone();
    if let Some(mean) = fit.basis.mean() {
        for mut col in centered.column_iter_mut() {
            col -= mean.values();
        }
    }
    let clean = measure(&centered, &first.sensors)?;
    let rec = reconstruct(&fit.basis, &first.sensors, &clean, fit.basis.mean())?;
    let coeff_path = cfg.out_dir.join("coefficients.csv");
    write_file(&coeff_path, &format_coefficient_table(&rec.coefficients))?;

    let manifest_path = cfg.out_dir.join("manifest.txt");
    let mut manifest = String::new();
    manifest.push_str(&format!("config_hash {:#018x}\n", config_hash(&cfg.raw)));
    manifest.push_str(&format!("master_seed {}\n", cfg.seed));
    manifest.push_str(&format!(
        "levels {}\n",
        cfg.evaluate
            .levels
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(",")
    ));
    manifest.push_str(&format!("trials {}\n", cfg.evaluate.trials));
    manifest.push_str(&format!("test_cases {}\n", join_usizes(&test_cases)));
    for line in &manifest_lines {
        manifest.push_str(line);
        manifest.push('\n');
    }
    write_file(&manifest_path, &manifest)?;
    println!(
        "wrote {}, {}, {}",
        report_path.display(),
        coeff_path.display(),
        manifest_path.display()
    );
    Ok(())
}

/// Everything up to the truncated basis: load or generate, split, center,
/// decompose.
pub struct Fitted {
    pub data: SnapshotMatrix,
    pub split: Split,
    pub spectrum: PodSpectrum,
    pub basis: PodBasis,
}

pub fn fit_pipeline(cfg: &PipelineConfig) -> anyhow::Result<Fitted> {
    let data = build_dataset(cfg)?;
    let sp = split(&data, cfg.dataset.train_fraction, cfg.seed)?;
    let train = data.select_cases(&sp.train_cases(data.steps_per_case()))?;
    let (centered, mean) = if cfg.dataset.center {
        let (c, m) = center(&train);
        (c, Some(m))
    } else {
        (train, None)
    };
    let spectrum = compute_pod(&centered, None)?;
    let mut basis = truncate(&spectrum, cfg.pod.criterion, cfg.pod.scaling)?;
    if let Some(mean) = mean {
        basis = basis.with_mean(mean)?;
    }
    Ok(Fitted {
        data,
        split: sp,
        spectrum,
        basis,
    })
}

fn build_dataset(cfg: &PipelineConfig) -> anyhow::Result<SnapshotMatrix> {
    match &cfg.dataset.source {
        DatasetSource::Generate {
            grid_min,
            grid_max,
            grid_step,
            means,
            sigmas,
        } => generate_gaussian_dataset(*grid_min, *grid_max, *grid_step, means, sigmas)
            .context("generating dataset"),
        DatasetSource::File { path, format } => {
            load_snapshots(path, *format).with_context(|| format!("loading {}", path.display()))
        }
    }
}

fn load_constraints(cfg: &PipelineConfig, data: &SnapshotMatrix) -> anyhow::Result<ConstraintSpec> {
    match &cfg.placement.constraints {
        None => Ok(ConstraintSpec::none()),
        Some(path) => load_constraint_spec(path, data.coords(), data.n_nodes())
            .with_context(|| format!("loading constraints {}", path.display())),
    }
}

fn print_energy_head(spectrum: &PodSpectrum, energy: &[f64], rank: usize) {
    println!("rank  sigma         cumulative energy");
    let show = energy.len().min(rank.max(8) + 2);
    for (i, e) in energy.iter().take(show).enumerate() {
        println!(
            "{:>4}  {:<12.6e}  {:.6}{}",
            i + 1,
            spectrum.singular_values()[i],
            e,
            if i + 1 == rank { "   <- retained" } else { "" }
        );
    }
}

fn join_indices(s: &SensorSet) -> String {
    join_usizes(s.indices())
}

fn join_usizes(values: &[usize]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn write_file(path: &Path, contents: &str) -> sparsense::Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io {
        path: PathBuf::from(path),
        source: e,
    })
}
