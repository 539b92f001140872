use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use permap_core::env::{generate_world, Pose};
use permap_core::factors::rasterize_map;
use permap_core::mission::{build_maps, run_mission, Method, Task};

use permap_cli::batch::run_batch;
use permap_cli::config::{parse_methods, parse_seeds, FileConfig};
use permap_cli::export::{
    export_results, write_characterization, write_raster_csv, write_runlog_json,
};
use permap_cli::{HarnessError, Result};

/// Active-perception simulation experiments with perceptual factors.
#[derive(Parser)]
#[command(name = "permap", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single mission and write its full log.
    Run(RunArgs),
    /// Run the method-by-seed experiment matrix and export aggregates.
    Batch(BatchArgs),
    /// Dump the sensor noise-model curves to CSV.
    Characterize(CharacterizeArgs),
    /// Rasterize one target's perceptual map to CSV.
    Rasterize(RasterizeArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON experiment config; defaults reproduce the reference setup.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Estimation task: metric | semantic.
    #[arg(long)]
    task: Option<String>,
    /// Mission length in planning steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Candidate viewpoints sampled per step.
    #[arg(long)]
    candidates: Option<usize>,
    /// Per-step travel budget in meters.
    #[arg(long)]
    budget: Option<f64>,
}

impl CommonArgs {
    fn file_config(&self) -> Result<FileConfig> {
        let mut config = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        if let Some(task) = &self.task {
            config.experiment.task = parse_task(task)?;
        }
        if let Some(steps) = self.steps {
            config.experiment.planner.steps = steps;
        }
        if let Some(candidates) = self.candidates {
            config.experiment.planner.num_candidates = candidates;
        }
        if let Some(budget) = self.budget {
            config.experiment.planner.budget = budget;
        }
        config.experiment.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Method under test (default from config).
    #[arg(long)]
    method: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for the run log; omit to print the summary only.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep every scored candidate of every step in the log.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct BatchArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Methods to run, comma-separated (default: all five).
    #[arg(long)]
    method: Option<String>,
    /// Seed count `N` (runs seeds 0..N) or explicit list `a,b,c`.
    #[arg(long)]
    seeds: Option<String>,
    /// Worker threads; 0 means one per available core.
    #[arg(long, default_value_t = 0)]
    parallelism: usize,
    /// Output directory for CSVs, summary, and charts.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CharacterizeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Output directory for the curve CSVs.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RasterizeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Method whose factor set the map uses (default from config).
    #[arg(long)]
    method: Option<String>,
    /// World generation seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Index of the target whose map is rasterized.
    #[arg(long, default_value_t = 0)]
    target: usize,
    /// Raster cell size in meters.
    #[arg(long, default_value_t = 0.05)]
    resolution: f64,
    /// Visited pose "x,y" or "x,y,heading" for redundancy factors; repeat
    /// the flag for more poses.
    #[arg(long = "pose")]
    poses: Vec<String>,
    /// Output directory for the raster CSV.
    #[arg(long)]
    out: PathBuf,
}

fn parse_task(raw: &str) -> Result<Task> {
    serde_json::from_value(serde_json::Value::String(raw.trim().to_string()))
        .map_err(|_| HarnessError::Config(format!("unknown task {raw:?}")))
}

fn parse_single_method(raw: &str) -> Result<Method> {
    let methods = parse_methods(raw)?;
    match methods.as_slice() {
        [one] => Ok(*one),
        _ => Err(HarnessError::Config(format!(
            "expected one method, got {raw:?}"
        ))),
    }
}

fn parse_pose(raw: &str) -> Result<Pose> {
    let parts: Vec<f64> = raw
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| HarnessError::Config(format!("invalid pose component {p:?}")))
        })
        .collect::<Result<_>>()?;
    match parts.as_slice() {
        [x, y] => Ok(Pose::new(*x, *y, 0.0)),
        [x, y, heading] => Ok(Pose::new(*x, *y, *heading)),
        _ => Err(HarnessError::Config(format!(
            "pose must be \"x,y\" or \"x,y,heading\", got {raw:?}"
        ))),
    }
}

fn run(args: RunArgs) -> Result<()> {
    let config = args.common.file_config()?;
    let mut experiment = config.experiment;
    if let Some(method) = &args.method {
        experiment.method = parse_single_method(method)?;
    }
    experiment.record_traces |= args.trace;
    let log = run_mission(&experiment, args.seed)?;
    let last = log
        .records
        .last()
        .map(|r| &r.metrics)
        .unwrap_or(&log.initial_metrics);
    let mut line = format!(
        "task={} method={} seed={} steps={}",
        log.task.as_str(),
        log.method.as_str(),
        log.seed,
        log.records.len(),
    );
    for (name, value) in [
        ("nees", last.nees_avg),
        ("rmse", last.rmse),
        ("confidence", last.confidence_avg),
        ("accuracy", last.accuracy),
    ] {
        if let Some(v) = value {
            line.push_str(&format!(" {name}={v:.4}"));
        }
    }
    line.push_str(&format!(" hits={}", last.hits.total()));
    println!("{line}");
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out).map_err(permap_cli::io_err(out))?;
        let path = out.join(format!(
            "runlog-{}-{}-{}.json",
            log.task.as_str(),
            log.method.as_str(),
            log.seed
        ));
        write_runlog_json(&log, &path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn batch(args: BatchArgs) -> Result<()> {
    let config = args.common.file_config()?;
    let methods = match &args.method {
        Some(raw) => parse_methods(raw)?,
        None => config.batch_methods(),
    };
    let seeds = match &args.seeds {
        Some(raw) => parse_seeds(raw)?,
        None => config.batch_seeds(),
    };
    let outcome = run_batch(&config.experiment, &methods, &seeds, args.parallelism)?;
    let written = export_results(&outcome, &args.out)?;
    println!(
        "batch task={} methods={} seeds={} completed={}/{}",
        outcome.task.as_str(),
        outcome.methods.len(),
        outcome.seeds.len(),
        outcome.runs.len(),
        outcome.methods.len() * outcome.seeds.len(),
    );
    for path in &written {
        println!("wrote {}", path.display());
    }
    if !outcome.failures.is_empty() {
        return Err(HarnessError::Partial {
            total: outcome.methods.len() * outcome.seeds.len(),
            failures: outcome.failures,
        });
    }
    Ok(())
}

fn characterize(args: CharacterizeArgs) -> Result<()> {
    let config = args.common.file_config()?;
    let bounds = &config.experiment.world.bounds;
    let max_distance = f64::hypot(bounds.width(), bounds.height());
    let written = write_characterization(
        &config.experiment.noise,
        config.experiment.world.num_classes,
        max_distance,
        &args.out,
    )?;
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn rasterize(args: RasterizeArgs) -> Result<()> {
    let config = args.common.file_config()?;
    let mut experiment = config.experiment;
    if let Some(method) = &args.method {
        experiment.method = parse_single_method(method)?;
    }
    let history: Vec<Pose> = args
        .poses
        .iter()
        .map(|raw| parse_pose(raw))
        .collect::<Result<_>>()?;
    let world = generate_world(args.seed, &experiment.world)?;
    if args.target >= world.targets.len() {
        return Err(HarnessError::Config(format!(
            "target index {} out of range (world has {})",
            args.target,
            world.targets.len()
        )));
    }
    let points: Vec<(f64, f64)> = world.targets.iter().map(|t| t.position).collect();
    let maps = build_maps(
        experiment.method,
        &world,
        &points,
        history.len(),
        &experiment.factors,
    );
    let grid = rasterize_map(&maps[args.target], &world, &history, args.resolution)?;
    std::fs::create_dir_all(&args.out).map_err(permap_cli::io_err(&args.out))?;
    let path = args.out.join(format!(
        "map-{}-seed{}-target{}.csv",
        experiment.method.as_str(),
        args.seed,
        args.target
    ));
    write_raster_csv(&grid, &path)?;
    println!(
        "wrote {} ({}x{} cells at {} m)",
        path.display(),
        grid.rows,
        grid.cols,
        grid.resolution
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => run(args),
        Command::Batch(args) => batch(args),
        Command::Characterize(args) => characterize(args),
        Command::Rasterize(args) => rasterize(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            let report = serde_json::to_string_pretty(&error.report())
                .unwrap_or_else(|_| format!("{{\"error\": \"{error}\"}}"));
            eprintln!("{report}");
            ExitCode::FAILURE
        }
    }
}
