//! Mission loop and the ablation matrix.
//!
//! A mission is: generate a world from the seed, start at the arena center,
//! then repeat plan -> move -> sense every target -> fuse -> log. The method
//! under test decides which factor kinds the planner and the fusion weights
//! see; the simulated sensor always suffers every ground-truth effect.
//!
//! Seeds drive three independent named rng streams (world, candidates, one
//! sensor stream per target), so every method run under the same seed shares
//! the same world, the same candidate sets, and the same noise realizations.

use alloc::vec::Vec;

use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::env::{generate_world, Pose, World, WorldSpec};
use crate::error::{Error, Result};
use crate::estimators::{
    categorical_update, ekf_initialize, ekf_update, CategoricalBelief, GaussianBelief,
    SensorModel,
};
use crate::factors::{FactorKind, FactorParams, PerceptualMap};
use crate::math::{cos, sin};
use crate::metrics::{factor_hits, nees, rmse, semantic_scores, HitCounts, HitFlags, StepMetrics};
use crate::planner::{
    plan_step, CandidateScore, PlannerConfig, ScoreContext, SemanticExpectation, TaskBeliefs,
};
use crate::rng::{stream, STREAM_CANDIDATES, STREAM_SENSOR};
use crate::sensor::{
    ground_truth_context, sample_metric, sample_semantic, MetricMeasurement, NoiseModel,
    SemanticMeasurement,
};

/// Which estimation problem the mission solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    /// Track target positions with the perceptual EKF.
    Metric,
    /// Classify targets with discounted categorical fusion.
    Semantic,
}

impl Task {
    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Metric => "metric",
            Task::Semantic => "semantic",
        }
    }
}

/// Ablation under test: which factor kinds the planner and fusion know.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// No perceptual awareness: psi = 1 everywhere.
    Basic,
    Occlusions,
    Light,
    PreviousPoses,
    Complete,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Basic,
        Method::Occlusions,
        Method::Light,
        Method::PreviousPoses,
        Method::Complete,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Basic => "basic",
            Method::Occlusions => "occlusions",
            Method::Light => "light",
            Method::PreviousPoses => "previous-poses",
            Method::Complete => "complete",
        }
    }

    pub fn uses_occlusion(&self) -> bool {
        matches!(self, Method::Occlusions | Method::Complete)
    }

    pub fn uses_light(&self) -> bool {
        matches!(self, Method::Light | Method::Complete)
    }

    pub fn uses_redundancy(&self) -> bool {
        matches!(self, Method::PreviousPoses | Method::Complete)
    }
}

/// Influence strengths and shapes of the factors the methods build.
///
/// Occlusion widths are geometric (a multiple of occluder radius plus target
/// radius), light widths come from each light's diffusion. The default
/// deltas are paired with the [`NoiseModel`] schedule so the inflated
/// measurement covariance tracks the simulated noise growth: the noise std
/// scales by gamma while the filter scales variance by the factor product,
/// so `delta_occlusion` puts the shadow-core factor at `(1 + gain)^2` and
/// `delta_light` keeps even the diffusion-parabola rim at or above
/// `(1 + increment)^2` (back lighting is flat across the whole region).
/// Both carry a safety margin over the exact match; where the parabolas
/// and the true blockage geometry disagree, erring towards inflation keeps
/// the filter honest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FactorConfig {
    pub delta_occlusion: f64,
    pub delta_light: f64,
    pub delta_redundancy: f64,
    pub sigma_redundancy: f64,
    /// Occlusion parabola width as a multiple of occluder + target radius.
    /// Wide enough that the geometric shadow wedge stays inside the region.
    pub occlusion_width_scale: f64,
    /// Heading term of the redundancy distance; 0 = position only.
    pub redundancy_heading_weight: f64,
    /// Only the most recent N poses spawn redundancy factors; None = all.
    pub history_window: Option<usize>,
}

impl Default for FactorConfig {
    fn default() -> Self {
        FactorConfig {
            delta_occlusion: 10.0,
            delta_light: 11.0,
            delta_redundancy: 3.0,
            sigma_redundancy: 0.1,
            occlusion_width_scale: 2.0,
            redundancy_heading_weight: 0.0,
            history_window: None,
        }
    }
}

impl FactorConfig {
    fn redundancy_params(&self) -> FactorParams {
        FactorParams::gaussian_oriented(
            self.delta_redundancy,
            self.sigma_redundancy,
            self.redundancy_heading_weight,
        )
    }
}

/// Full description of one experiment cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub task: Task,
    pub method: Method,
    pub world: WorldSpec,
    pub factors: FactorConfig,
    pub noise: NoiseModel,
    pub planner: PlannerConfig,
    pub semantic_expectation: SemanticExpectation,
    /// Fuse semantic misses as a flat no-object observation. With a belief
    /// over object classes only, a flat observation cannot move the
    /// posterior; the switch exists for protocol parity and logging.
    pub fuse_miss_as_no_object: bool,
    pub no_object_confidence: f64,
    /// Sense one target per step (round-robin) instead of all of them.
    pub one_target_per_step: bool,
    /// Keep every scored candidate of every step in the log.
    pub record_traces: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: Task::Metric,
            method: Method::Complete,
            world: WorldSpec::default(),
            factors: FactorConfig::default(),
            noise: NoiseModel::default(),
            planner: PlannerConfig::default(),
            semantic_expectation: SemanticExpectation::SelfFusion,
            fuse_miss_as_no_object: false,
            no_object_confidence: 0.75,
            one_target_per_step: false,
            record_traces: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.planner.validate()?;
        let f = &self.factors;
        for delta in [f.delta_occlusion, f.delta_light, f.delta_redundancy] {
            if delta < 0.0 || !delta.is_finite() {
                return Err(Error::InvalidParameter(alloc::format!(
                    "factor deltas must be >= 0, got {delta}"
                )));
            }
        }
        if !(f.sigma_redundancy > 0.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "sigma_redundancy must be > 0, got {}",
                f.sigma_redundancy
            )));
        }
        if !(f.occlusion_width_scale > 0.0) || !f.occlusion_width_scale.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!(
                "occlusion_width_scale must be > 0, got {}",
                f.occlusion_width_scale
            )));
        }
        if self.noise.min_range < 0.0 || !self.noise.min_range.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!(
                "min_range must be >= 0, got {}",
                self.noise.min_range
            )));
        }
        if !(self.no_object_confidence > 0.0 && self.no_object_confidence < 1.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "no_object_confidence must be in (0, 1), got {}",
                self.no_object_confidence
            )));
        }
        Ok(())
    }
}

/// Belief state over all targets, snapshotted into the log each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BeliefSnapshot {
    Metric(Vec<GaussianBelief>),
    Semantic(Vec<CategoricalBelief>),
}

/// One sensing attempt of one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub target_id: u32,
    /// Fusion weight used (from the method's maps; 1 for Basic).
    pub psi: f64,
    /// Ground-truth noise scale the sensor actually suffered.
    pub gamma: f64,
    pub miss: bool,
    pub hits: HitFlags,
    pub metric: Option<MetricMeasurement>,
    pub semantic: Option<SemanticMeasurement>,
}

/// One executed mission step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based step index.
    pub step: usize,
    pub pose: Pose,
    pub measurements: Vec<MeasurementRecord>,
    pub beliefs: BeliefSnapshot,
    pub metrics: StepMetrics,
}

/// Complete record of one mission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub task: Task,
    pub method: Method,
    pub seed: u64,
    pub world: World,
    /// Metrics of the prior beliefs, before any motion or measurement.
    pub initial_metrics: StepMetrics,
    pub records: Vec<StepRecord>,
    /// All scored candidates per step, when trace recording is on.
    pub traces: Option<Vec<Vec<CandidateScore>>>,
}

/// The belief each target starts from.
///
/// Metric: a moment-matched Gaussian of the uniform distribution over the
/// arena (mean at the center, variance extent^2 / 12 per axis), so the prior
/// NEES is calibrated by construction. Semantic: uniform over classes.
pub fn initial_beliefs(task: Task, world: &World, num_classes: usize) -> BeliefSnapshot {
    match task {
        Task::Metric => {
            let (cx, cy) = world.bounds.center();
            let var_x = crate::math::sq(world.bounds.width()) / 12.0;
            let var_y = crate::math::sq(world.bounds.height()) / 12.0;
            let belief = GaussianBelief {
                mean: nalgebra::Vector2::new(cx, cy),
                covariance: nalgebra::Matrix2::new(var_x, 0.0, 0.0, var_y),
            };
            BeliefSnapshot::Metric(alloc::vec![belief; world.targets.len()])
        }
        Task::Semantic => BeliefSnapshot::Semantic(alloc::vec![
            CategoricalBelief::uniform(num_classes);
            world.targets.len()
        ]),
    }
}

/// Build the per-target perceptual maps the method is allowed to see.
///
/// `target_points` anchors the factor geometry (estimated positions for the
/// metric task, true positions for the semantic task); `history_len` is how
/// many poses of the history slice the redundancy factors may reference.
pub fn build_maps(
    method: Method,
    world: &World,
    target_points: &[(f64, f64)],
    history_len: usize,
    factors: &FactorConfig,
) -> Vec<PerceptualMap> {
    let window_start = match factors.history_window {
        Some(w) => history_len.saturating_sub(w),
        None => 0,
    };
    world
        .targets
        .iter()
        .zip(target_points)
        .map(|(target, &point)| {
            let mut map = PerceptualMap::new(target.id, point);
            if method.uses_occlusion() {
                for occ in &world.occluders {
                    map.push(
                        FactorKind::Occlusion { occluder_id: occ.id },
                        FactorParams::parabola(
                            factors.delta_occlusion,
                            factors.occlusion_width_scale * (occ.radius + target.radius),
                        ),
                    );
                }
            }
            if method.uses_light() {
                // Back lighting needs the target lit from behind; lights the
                // target sits behind cannot affect it.
                for light in world.lights.iter().filter(|l| l.illuminates(point)) {
                    map.push(
                        FactorKind::BackLight { light_id: light.id },
                        FactorParams::parabola(factors.delta_light, light.diffusion_width),
                    );
                }
            }
            if method.uses_redundancy() {
                for pose_index in window_start..history_len {
                    map.push(
                        FactorKind::Redundancy { pose_index },
                        factors.redundancy_params(),
                    );
                }
            }
            map
        })
        .collect()
}

fn step_metrics(
    step: usize,
    beliefs: &BeliefSnapshot,
    world: &World,
    hits: HitCounts,
) -> Result<StepMetrics> {
    let truths: Vec<(f64, f64)> = world.targets.iter().map(|t| t.position).collect();
    match beliefs {
        BeliefSnapshot::Metric(beliefs) => {
            let mut nees_sum = 0.0;
            for (belief, &truth) in beliefs.iter().zip(&truths) {
                nees_sum += nees(belief, truth)?;
            }
            Ok(StepMetrics {
                step,
                nees_avg: Some(nees_sum / beliefs.len().max(1) as f64),
                rmse: Some(rmse(beliefs, &truths)?),
                confidence_avg: None,
                accuracy: None,
                hits,
            })
        }
        BeliefSnapshot::Semantic(beliefs) => {
            let classes: Vec<usize> = world.targets.iter().map(|t| t.true_class).collect();
            let (confidence, accuracy) = semantic_scores(beliefs, &classes)?;
            Ok(StepMetrics {
                step,
                nees_avg: None,
                rmse: None,
                confidence_avg: Some(confidence),
                accuracy: Some(accuracy),
                hits,
            })
        }
    }
}

fn target_points(beliefs: &BeliefSnapshot, world: &World) -> Vec<(f64, f64)> {
    match beliefs {
        // The planner only knows its estimates.
        BeliefSnapshot::Metric(beliefs) => {
            beliefs.iter().map(|b| (b.mean.x, b.mean.y)).collect()
        }
        // Classification assumes known positions; only the class is open.
        BeliefSnapshot::Semantic(_) => world.targets.iter().map(|t| t.position).collect(),
    }
}

/// Execute one mission.
pub fn run_mission(config: &ExperimentConfig, seed: u64) -> Result<RunLog> {
    config.validate()?;
    let world = generate_world(seed, &config.world)?;
    let model = SensorModel::new(config.noise.sigma_d, config.noise.sigma_b)
        .with_min_range(config.noise.min_range);
    let num_classes = config.world.num_classes;
    let mut candidate_rng = stream(seed, STREAM_CANDIDATES, 0);
    let mut sensor_rngs: Vec<ChaCha12Rng> = (0..world.targets.len())
        .map(|i| stream(seed, STREAM_SENSOR, i as u64))
        .collect();

    let (cx, cy) = world.bounds.center();
    let mut pose = Pose::new(cx, cy, 0.0);
    let mut beliefs = initial_beliefs(config.task, &world, num_classes);
    // Metric targets start on a diffuse prior; a linearized update against
    // it overshoots, so the first detection initializes the belief instead.
    let mut initialized = alloc::vec![false; world.targets.len()];
    let mut history: Vec<Pose> = Vec::with_capacity(config.planner.steps);
    let mut traces = config.record_traces.then(Vec::new);

    let initial_metrics = step_metrics(0, &beliefs, &world, HitCounts::default())?;
    let mut records = Vec::with_capacity(config.planner.steps);

    for step in 1..=config.planner.steps {
        // Plan from the current pose. The scoring history appends the
        // current pose so standing still is penalized like revisiting.
        let points = target_points(&beliefs, &world);
        let mut scoring_history = history.clone();
        scoring_history.push(pose);
        let scoring_maps = build_maps(
            config.method,
            &world,
            &points,
            scoring_history.len(),
            &config.factors,
        );
        let ctx = ScoreContext {
            world: &world,
            history: &scoring_history,
            model: &model,
            semantic_expectation: config.semantic_expectation,
        };
        let task_beliefs = match &beliefs {
            BeliefSnapshot::Metric(b) => TaskBeliefs::Metric(b),
            BeliefSnapshot::Semantic(b) => TaskBeliefs::Semantic(b),
        };
        let (chosen, scores) = plan_step(
            &pose,
            &task_beliefs,
            &scoring_maps,
            &ctx,
            &config.planner,
            &mut candidate_rng,
        )
        .map_err(|e| e.at_step(step, 0))?;
        if let Some(traces) = traces.as_mut() {
            traces.push(scores);
        }
        pose = chosen;

        // Fusion weights come from maps over the *previous* measurement
        // poses only; the pose being measured from is not its own precedent.
        let fusion_maps = build_maps(
            config.method,
            &world,
            &points,
            history.len(),
            &config.factors,
        );

        let mut measurements = Vec::with_capacity(world.targets.len());
        let mut hit_counts = HitCounts::default();
        for (index, target) in world.targets.iter().enumerate() {
            if config.one_target_per_step && (step - 1) % world.targets.len() != index {
                continue;
            }
            let context = ground_truth_context(&pose, target, &world, &config.noise);
            let psi = fusion_maps[index]
                .evaluate(&pose, &world, &history)
                .map_err(|e| e.at_step(step, target.id))?;
            let hits = factor_hits(
                &pose,
                target,
                &world,
                &config.noise,
                &history,
                config.factors.sigma_redundancy,
            );
            hit_counts.add(hits);

            let rng = &mut sensor_rngs[index];
            let mut record = MeasurementRecord {
                target_id: target.id,
                psi,
                gamma: context.gamma,
                miss: false,
                hits,
                metric: None,
                semantic: None,
            };
            match &mut beliefs {
                BeliefSnapshot::Metric(beliefs) => {
                    let z = sample_metric(&pose, target, &context, &config.noise, rng);
                    record.miss = z.is_miss();
                    // Weight a detection against the target location it
                    // itself implies: before the estimate converges, the
                    // stored anchor can sit far from the sensed ray and
                    // miss the factor geometry entirely. Once converged,
                    // keep whichever anchor claims the worse conditions; a
                    // badly corrupted range can displace the implied point
                    // right out of the factor geometry that corrupted it.
                    if let MetricMeasurement::Detection { range, bearing, .. } = z {
                        let implied = (
                            pose.x + range * cos(pose.heading + bearing),
                            pose.y + range * sin(pose.heading + bearing),
                        );
                        let at_implied = fusion_maps[index]
                            .evaluate_at(&pose, &world, &history, implied)
                            .map_err(|e| e.at_step(step, target.id))?;
                        record.psi = if initialized[index] {
                            at_implied.max(psi)
                        } else {
                            at_implied
                        };
                    }
                    beliefs[index] = match z {
                        MetricMeasurement::Detection { range, bearing, .. }
                            if !initialized[index] && range > 0.0 =>
                        {
                            initialized[index] = true;
                            ekf_initialize(&pose, range, bearing, &model, record.psi)
                        }
                        ref z => ekf_update(&beliefs[index], &pose, z, &model, record.psi),
                    }
                    .map_err(|e| e.at_step(step, target.id))?;
                    record.metric = Some(z);
                }
                BeliefSnapshot::Semantic(beliefs) => {
                    let z = sample_semantic(target, &context, &config.noise, num_classes, rng);
                    record.miss = z.is_miss();
                    let z = match z {
                        SemanticMeasurement::Miss { target_id }
                            if config.fuse_miss_as_no_object =>
                        {
                            SemanticMeasurement::Detection {
                                target_id,
                                confidences: alloc::vec![
                                    1.0 / num_classes as f64;
                                    num_classes
                                ],
                            }
                        }
                        other => other,
                    };
                    beliefs[index] = categorical_update(&beliefs[index], &z, psi)
                        .map_err(|e| e.at_step(step, target.id))?;
                    record.semantic = Some(z);
                }
            }
            measurements.push(record);
        }

        history.push(pose);
        let metrics = step_metrics(step, &beliefs, &world, hit_counts)?;
        records.push(StepRecord {
            step,
            pose,
            measurements,
            beliefs: beliefs.clone(),
            metrics,
        });
    }

    Ok(RunLog {
        task: config.task,
        method: config.method,
        seed,
        world,
        initial_metrics,
        records,
        traces,
    })
}
