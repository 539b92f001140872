//! CSV, JSON, and raster exporters.
//!
//! Every writer walks its input in a fixed order, so identical batch
//! outcomes produce byte-identical files regardless of how the batch was
//! executed. Empty outcomes still produce files with their header row.

use std::fs;
use std::path::{Path, PathBuf};

use permap_core::factors::CostGrid;
use permap_core::mission::{RunLog, Task};
use permap_core::sensor::NoiseModel;
use serde::Serialize;

use crate::batch::BatchOutcome;
use crate::config::SCHEMA_VERSION;
use crate::{csv_err, io_err, HarnessError, Result};

/// Shortest-roundtrip decimal form; empty string for an absent value.
fn num(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut writer: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    writer.flush().map_err(io_err(path))?;
    Ok(())
}

/// Per-run per-step metrics, one row per (method, seed, step); step 0 is the
/// prior-only state before any motion.
pub fn write_steps_csv(outcome: &BatchOutcome, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "task",
        "method",
        "seed",
        "step",
        "nees_avg",
        "rmse",
        "confidence_avg",
        "accuracy",
        "occlusion_hits",
        "light_hits",
        "redundancy_hits",
    ])
    .map_err(csv_err(path))?;
    for run in &outcome.runs {
        for metrics in std::iter::once(&run.initial).chain(&run.steps) {
            w.write_record([
                outcome.task.as_str().to_string(),
                run.method.as_str().to_string(),
                run.seed.to_string(),
                metrics.step.to_string(),
                num(metrics.nees_avg),
                num(metrics.rmse),
                num(metrics.confidence_avg),
                num(metrics.accuracy),
                metrics.hits.occlusion.to_string(),
                metrics.hits.light.to_string(),
                metrics.hits.redundancy.to_string(),
            ])
            .map_err(csv_err(path))?;
        }
    }
    finish(w, path)
}

/// Per-method per-step means and dispersion across seeds.
pub fn write_aggregate_csv(outcome: &BatchOutcome, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "task",
        "method",
        "step",
        "runs",
        "nees_mean",
        "nees_std",
        "rmse_mean",
        "rmse_std",
        "confidence_mean",
        "confidence_std",
        "accuracy_mean",
        "accuracy_std",
        "occlusion_hits_mean",
        "light_hits_mean",
        "redundancy_hits_mean",
    ])
    .map_err(csv_err(path))?;
    for row in &outcome.aggregates {
        w.write_record([
            row.task.as_str().to_string(),
            row.method.as_str().to_string(),
            row.step.to_string(),
            row.runs.to_string(),
            num(row.nees.mean),
            num(row.nees.std),
            num(row.rmse.mean),
            num(row.rmse.std),
            num(row.confidence.mean),
            num(row.confidence.std),
            num(row.accuracy.mean),
            num(row.accuracy.std),
            row.occlusion_hits_mean.to_string(),
            row.light_hits_mean.to_string(),
            row.redundancy_hits_mean.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    finish(w, path)
}

/// Histogram of ground-truth factor hits per method and factor kind.
pub fn write_factor_hits_csv(outcome: &BatchOutcome, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["task", "method", "factor", "count"])
        .map_err(csv_err(path))?;
    for totals in &outcome.hit_totals {
        for (factor, count) in [
            ("occlusion", totals.occlusion),
            ("light", totals.light),
            ("redundancy", totals.redundancy),
        ] {
            w.write_record([
                outcome.task.as_str().to_string(),
                totals.method.as_str().to_string(),
                factor.to_string(),
                count.to_string(),
            ])
            .map_err(csv_err(path))?;
        }
    }
    finish(w, path)
}

#[derive(Serialize)]
struct Summary<'a> {
    schema_version: u32,
    task: Task,
    methods: Vec<&'a str>,
    seeds: &'a [u64],
    completed_runs: usize,
    experiment: &'a permap_core::mission::ExperimentConfig,
    final_step: Vec<&'a crate::batch::AggregateRow>,
    hit_totals: &'a [crate::batch::HitTotals],
    failures: &'a [crate::FailedCell],
}

/// Final-step means, hit totals, and failures as one JSON document.
pub fn write_summary_json(outcome: &BatchOutcome, path: &Path) -> Result<()> {
    let last_step = outcome.aggregates.iter().map(|r| r.step).max().unwrap_or(0);
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        task: outcome.task,
        methods: outcome.methods.iter().map(|m| m.as_str()).collect(),
        seeds: &outcome.seeds,
        completed_runs: outcome.runs.len(),
        experiment: &outcome.experiment,
        final_step: outcome
            .aggregates
            .iter()
            .filter(|r| r.step == last_step)
            .collect(),
        hit_totals: &outcome.hit_totals,
        failures: &outcome.failures,
    };
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|e| HarnessError::Config(format!("summary serialization: {e}")))?;
    fs::write(path, text + "\n").map_err(io_err(path))?;
    Ok(())
}

/// Everything a batch exports: metric CSVs, hit histogram, summary, charts.
pub fn export_results(outcome: &BatchOutcome, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::new();
    let mut emit = |name: &str| {
        let path = out_dir.join(name);
        written.push(path.clone());
        path
    };
    write_steps_csv(outcome, &emit("steps.csv"))?;
    write_aggregate_csv(outcome, &emit("aggregate.csv"))?;
    write_factor_hits_csv(outcome, &emit("factor_hits.csv"))?;
    write_summary_json(outcome, &emit("summary.json"))?;
    for (name, chart) in crate::chart::batch_charts(outcome) {
        let path = emit(&name);
        fs::write(&path, chart).map_err(io_err(path))?;
    }
    Ok(written)
}

/// Full mission log as pretty JSON (the single-run artifact).
pub fn write_runlog_json(log: &RunLog, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(log)
        .map_err(|e| HarnessError::Config(format!("run log serialization: {e}")))?;
    fs::write(path, text + "\n").map_err(io_err(path))?;
    Ok(())
}

/// Raster of a perceptual map in long form: one row per cell.
pub fn write_raster_csv(grid: &CostGrid, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["row", "col", "x", "y", "psi"])
        .map_err(csv_err(path))?;
    for row in 0..grid.rows {
        for col in 0..grid.cols {
            let (x, y) = grid.cell_center(row, col);
            w.write_record([
                row.to_string(),
                col.to_string(),
                x.to_string(),
                y.to_string(),
                grid.get(row, col).to_string(),
            ])
            .map_err(csv_err(path))?;
        }
    }
    finish(w, path)
}

/// Noise-model curves: measurement noise versus gamma, and the true-class
/// confidence curve versus distance with its gamma-expected counterparts.
pub fn write_characterization(
    model: &NoiseModel,
    num_classes: usize,
    max_distance: f64,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let gamma_path = out_dir.join("noise_vs_gamma.csv");
    let mut w = csv_writer(&gamma_path)?;
    w.write_record(["gamma", "range_std", "bearing_std", "p_miss", "p_outlier"])
        .map_err(csv_err(&gamma_path))?;
    let mut gamma = 1.0;
    while gamma <= model.gamma_max + 1e-9 {
        w.write_record([
            gamma.to_string(),
            (gamma * model.sigma_d).to_string(),
            (gamma * model.sigma_b).to_string(),
            model.p_miss(gamma).to_string(),
            model.outlier_prob(gamma).to_string(),
        ])
        .map_err(csv_err(&gamma_path))?;
        gamma += 0.1;
    }
    finish(w, &gamma_path)?;

    let conf_path = out_dir.join("confidence_vs_distance.csv");
    let mut w = csv_writer(&conf_path)?;
    w.write_record([
        "distance",
        "curve",
        "expected_gamma_1",
        "expected_gamma_3",
        "expected_gamma_6",
    ])
    .map_err(csv_err(&conf_path))?;
    let mut d = 0.0;
    while d <= max_distance + 1e-9 {
        w.write_record([
            d.to_string(),
            model.true_class_confidence(d).to_string(),
            model.expected_true_confidence(d, 1.0, num_classes).to_string(),
            model.expected_true_confidence(d, 3.0, num_classes).to_string(),
            model.expected_true_confidence(d, 6.0, num_classes).to_string(),
        ])
        .map_err(csv_err(&conf_path))?;
        d += 0.1;
    }
    finish(w, &conf_path)?;
    Ok(vec![gamma_path, conf_path])
}
