//! The method-by-seed batch matrix and its deterministic aggregation.

use permap_core::metrics::StepMetrics;
use permap_core::mission::{run_mission, ExperimentConfig, Method, Task};
use rayon::prelude::*;
use serde::Serialize;

use crate::{FailedCell, HarnessError, Result};

/// Per-run metric series kept from a mission (beliefs and measurements are
/// dropped; batches only aggregate metrics).
#[derive(Debug, Clone, Serialize)]
pub struct RunMetrics {
    pub method: Method,
    pub seed: u64,
    pub initial: StepMetrics,
    pub steps: Vec<StepMetrics>,
}

/// Mean and dispersion of one metric over the runs at one step.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct MeanStd {
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

/// Aggregated metrics of one method at one step, averaged over seeds.
#[derive(Debug, Clone, Serialize)]
pub struct AggregateRow {
    pub task: Task,
    pub method: Method,
    pub step: usize,
    pub runs: usize,
    pub nees: MeanStd,
    pub rmse: MeanStd,
    pub confidence: MeanStd,
    pub accuracy: MeanStd,
    pub occlusion_hits_mean: f64,
    pub light_hits_mean: f64,
    pub redundancy_hits_mean: f64,
}

/// Ground-truth factor hits of one method summed over the whole batch.
#[derive(Debug, Clone, Serialize)]
pub struct HitTotals {
    pub method: Method,
    pub occlusion: u64,
    pub light: u64,
    pub redundancy: u64,
    pub total: u64,
}

/// Everything a batch produces. The experiment config rides along so the
/// outputs are self-describing.
#[derive(Debug, Clone, Serialize)]
pub struct BatchOutcome {
    pub task: Task,
    pub experiment: ExperimentConfig,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunMetrics>,
    pub aggregates: Vec<AggregateRow>,
    pub hit_totals: Vec<HitTotals>,
    pub failures: Vec<FailedCell>,
}

fn mean_std<'a>(values: impl Iterator<Item = Option<f64>>) -> MeanStd {
    let present: Vec<f64> = values.flatten().collect();
    if present.is_empty() {
        return MeanStd::default();
    }
    let n = present.len() as f64;
    let mean = present.iter().sum::<f64>() / n;
    let std = if present.len() > 1 {
        (present.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    MeanStd {
        mean: Some(mean),
        std: Some(std),
    }
}

/// Run `methods x seeds` missions of `experiment` and aggregate them.
///
/// Seeds are sorted and deduplicated and methods deduplicated in given order
/// before anything runs, and every reduction walks the runs in that fixed
/// order, so the output is identical for any seed-list permutation and any
/// worker-pool size. `parallelism` 0 means one worker per available core.
/// Failed cells are reported, not fatal; they are excluded from aggregates.
pub fn run_batch(
    experiment: &ExperimentConfig,
    methods: &[Method],
    seeds: &[u64],
    parallelism: usize,
) -> Result<BatchOutcome> {
    experiment.validate()?;
    if methods.is_empty() || seeds.is_empty() {
        return Err(HarnessError::Config(
            "a batch needs at least one method and one seed".into(),
        ));
    }
    let mut methods_axis: Vec<Method> = Vec::new();
    for &m in methods {
        if !methods_axis.contains(&m) {
            methods_axis.push(m);
        }
    }
    let mut seeds_axis = seeds.to_vec();
    seeds_axis.sort_unstable();
    seeds_axis.dedup();

    let cells: Vec<(Method, u64)> = methods_axis
        .iter()
        .flat_map(|&m| seeds_axis.iter().map(move |&s| (m, s)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;
    let results: Vec<std::result::Result<RunMetrics, FailedCell>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(method, seed)| {
                let config = ExperimentConfig {
                    method,
                    ..experiment.clone()
                };
                match run_mission(&config, seed) {
                    Ok(log) => Ok(RunMetrics {
                        method,
                        seed,
                        initial: log.initial_metrics,
                        steps: log.records.into_iter().map(|r| r.metrics).collect(),
                    }),
                    Err(e) => Err(FailedCell {
                        method,
                        seed,
                        error: e.to_string(),
                    }),
                }
            })
            .collect()
    });

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for result in results {
        match result {
            Ok(run) => runs.push(run),
            Err(cell) => failures.push(cell),
        }
    }

    let aggregates = aggregate(experiment.task, &methods_axis, &runs, experiment.planner.steps);
    let hit_totals = total_hits(&methods_axis, &runs);
    Ok(BatchOutcome {
        task: experiment.task,
        experiment: experiment.clone(),
        methods: methods_axis,
        seeds: seeds_axis,
        runs,
        aggregates,
        hit_totals,
        failures,
    })
}

fn aggregate(
    task: Task,
    methods: &[Method],
    runs: &[RunMetrics],
    steps: usize,
) -> Vec<AggregateRow> {
    let mut rows = Vec::with_capacity(methods.len() * steps);
    for &method in methods {
        let of_method: Vec<&RunMetrics> = runs.iter().filter(|r| r.method == method).collect();
        for step in 1..=steps {
            let at_step = || {
                of_method
                    .iter()
                    .filter_map(move |r| r.steps.get(step - 1))
            };
            let n = at_step().count();
            let hits_mean = |pick: fn(&StepMetrics) -> u64| {
                if n == 0 {
                    0.0
                } else {
                    at_step().map(|m| pick(m) as f64).sum::<f64>() / n as f64
                }
            };
            rows.push(AggregateRow {
                task,
                method,
                step,
                runs: n,
                nees: mean_std(at_step().map(|m| m.nees_avg)),
                rmse: mean_std(at_step().map(|m| m.rmse)),
                confidence: mean_std(at_step().map(|m| m.confidence_avg)),
                accuracy: mean_std(at_step().map(|m| m.accuracy)),
                occlusion_hits_mean: hits_mean(|m| m.hits.occlusion),
                light_hits_mean: hits_mean(|m| m.hits.light),
                redundancy_hits_mean: hits_mean(|m| m.hits.redundancy),
            });
        }
    }
    rows
}

fn total_hits(methods: &[Method], runs: &[RunMetrics]) -> Vec<HitTotals> {
    methods
        .iter()
        .map(|&method| {
            let mut totals = HitTotals {
                method,
                occlusion: 0,
                light: 0,
                redundancy: 0,
                total: 0,
            };
            for run in runs.iter().filter(|r| r.method == method) {
                for step in &run.steps {
                    totals.occlusion += step.hits.occlusion;
                    totals.light += step.hits.light;
                    totals.redundancy += step.hits.redundancy;
                }
            }
            totals.total = totals.occlusion + totals.light + totals.redundancy;
            totals
        })
        .collect()
}
