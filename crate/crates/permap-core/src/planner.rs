//! Greedy informative viewpoint selection.
//!
//! One-step horizon: sample candidate poses within the travel budget, score
//! each by how much posterior entropy a measurement taken there is expected
//! to remove (summed over targets, discounted by each target's perceptual
//! cost at the candidate), move to the best.
//!
//! The planner knows the occluder and light entities of the prior map and
//! the poses it has measured from — that is what the perceptual maps encode.
//! It never sees the sensor's ground-truth noise schedule.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Pose, World};
use crate::error::{Error, Result};
use crate::estimators::{
    categorical_entropy, categorical_update, gaussian_entropy, ekf_expected_update,
    CategoricalBelief, GaussianBelief, SensorModel,
};
use crate::factors::PerceptualMap;
use crate::math::{cos, sin, sq, sqrt, wrap_angle};
use crate::sensor::SemanticMeasurement;

/// How candidate viewpoints are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateStrategy {
    /// Uniform over the budget disc, random headings.
    RandomBall,
    /// Evenly spaced poses on the budget circle; consumes no randomness.
    FixedRing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Lookahead depth. Only the greedy setting (1) is supported.
    pub horizon: usize,
    pub num_candidates: usize,
    /// Travel budget per step, meters.
    pub budget: f64,
    /// Total mission steps.
    pub steps: usize,
    pub strategy: CandidateStrategy,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            horizon: 1,
            num_candidates: 100,
            budget: 2.0,
            steps: 50,
            strategy: CandidateStrategy::RandomBall,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon != 1 {
            return Err(Error::InvalidParameter(alloc::format!(
                "only horizon 1 is supported, got {}",
                self.horizon
            )));
        }
        if self.num_candidates == 0 {
            return Err(Error::InvalidParameter(
                "num_candidates must be > 0".into(),
            ));
        }
        if !(self.budget > 0.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "budget must be > 0, got {}",
                self.budget
            )));
        }
        Ok(())
    }
}

/// A scored candidate viewpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub pose: Pose,
    /// Expected posterior entropy reduction, nats, summed over targets.
    pub utility: f64,
    /// Perceptual cost per target at this pose.
    pub psi: Vec<f64>,
}

/// Per-target beliefs of the active task.
#[derive(Debug, Clone)]
pub enum TaskBeliefs<'a> {
    Metric(&'a [GaussianBelief]),
    Semantic(&'a [CategoricalBelief]),
}

/// How the hypothetical semantic measurement is formed when scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SemanticExpectation {
    /// Fuse the current belief with itself at weight `1/psi`.
    SelfFusion,
    /// Average the posterior entropy over near-one-hot measurements of each
    /// class, weighted by the current belief.
    OneHotMixture,
}

/// Peak smoothing of the one-hot measurements in
/// [`SemanticExpectation::OneHotMixture`]; a literal one-hot would zero out
/// every other class regardless of the fusion weight.
const ONE_HOT_FLOOR: f64 = 0.01;

/// Everything a candidate score depends on besides the candidate itself.
#[derive(Debug, Clone)]
pub struct ScoreContext<'a> {
    pub world: &'a World,
    /// Poses the redundancy factors refer to. Includes the current pose, so
    /// staying put is penalized like revisiting.
    pub history: &'a [Pose],
    pub model: &'a SensorModel,
    pub semantic_expectation: SemanticExpectation,
}

/// Generate candidate poses around `current`, clipped to the world bounds.
///
/// Random-ball candidates are uniform over the budget disc with uniform
/// headings and consume three draws each; the fixed ring is deterministic.
/// Clipping projects onto the bounds box, which never increases the distance
/// to the (in-bounds) current position, so the budget still holds.
pub fn sample_candidates<R: Rng + ?Sized>(
    current: &Pose,
    config: &PlannerConfig,
    world: &World,
    rng: &mut R,
) -> Vec<Pose> {
    let mut out = Vec::with_capacity(config.num_candidates);
    match config.strategy {
        CandidateStrategy::RandomBall => {
            for _ in 0..config.num_candidates {
                let u: f64 = rng.random();
                let theta: f64 = rng.random_range(0.0..core::f64::consts::TAU);
                let heading: f64 = rng.random_range(0.0..core::f64::consts::TAU);
                let r = config.budget * sqrt(u);
                let (x, y) = world
                    .bounds
                    .clamp((current.x + r * cos(theta), current.y + r * sin(theta)));
                out.push(Pose::new(x, y, wrap_angle(heading)));
            }
        }
        CandidateStrategy::FixedRing => {
            for k in 0..config.num_candidates {
                let theta = core::f64::consts::TAU * k as f64 / config.num_candidates as f64;
                let (x, y) = world.bounds.clamp((
                    current.x + config.budget * cos(theta),
                    current.y + config.budget * sin(theta),
                ));
                out.push(Pose::new(x, y, wrap_angle(theta)));
            }
        }
    }
    out
}

/// Score one candidate: per-target perceptual cost and summed expected
/// entropy reduction.
pub fn score_candidate(
    pose: &Pose,
    beliefs: &TaskBeliefs<'_>,
    maps: &[PerceptualMap],
    ctx: &ScoreContext<'_>,
) -> Result<CandidateScore> {
    let mut psi = Vec::with_capacity(maps.len());
    for map in maps {
        psi.push(map.evaluate(pose, ctx.world, ctx.history)?);
    }
    let mut utility = 0.0;
    match beliefs {
        TaskBeliefs::Metric(beliefs) => {
            if beliefs.len() != maps.len() {
                return Err(Error::LengthMismatch {
                    left: beliefs.len(),
                    right: maps.len(),
                });
            }
            for (belief, &cost) in beliefs.iter().zip(&psi) {
                // Inside the blind zone the sensor only ever misses; without
                // this the 1/r^2 bearing information would pull the planner
                // right on top of the target.
                let (range, _) = ctx.model.observe(pose, (belief.mean.x, belief.mean.y));
                if range < ctx.model.min_range {
                    continue;
                }
                // The covariance update is measurement-value-independent, so
                // the reduction is exact given the cost.
                match ekf_expected_update(belief, pose, ctx.model, cost) {
                    Ok(updated) => {
                        utility += gaussian_entropy(belief)? - gaussian_entropy(&updated)?;
                    }
                    // A candidate exactly on the estimated target position
                    // has no usable linearization; expect nothing from it.
                    Err(Error::DegenerateGeometry { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        TaskBeliefs::Semantic(beliefs) => {
            if beliefs.len() != maps.len() {
                return Err(Error::LengthMismatch {
                    left: beliefs.len(),
                    right: maps.len(),
                });
            }
            for (belief, &cost) in beliefs.iter().zip(&psi) {
                let prior_entropy = categorical_entropy(belief);
                let expected_posterior = match ctx.semantic_expectation {
                    SemanticExpectation::SelfFusion => {
                        let z = SemanticMeasurement::Detection {
                            target_id: 0,
                            confidences: belief.probs.clone(),
                        };
                        categorical_entropy(&categorical_update(belief, &z, cost)?)
                    }
                    SemanticExpectation::OneHotMixture => {
                        let k = belief.probs.len();
                        let mut h = 0.0;
                        for (class, &weight) in belief.probs.iter().enumerate() {
                            if weight == 0.0 {
                                continue;
                            }
                            let mut confidences =
                                alloc::vec![ONE_HOT_FLOOR / (k as f64 - 1.0); k];
                            confidences[class] = 1.0 - ONE_HOT_FLOOR;
                            let z = SemanticMeasurement::Detection {
                                target_id: 0,
                                confidences,
                            };
                            h += weight * categorical_entropy(&categorical_update(
                                belief, &z, cost,
                            )?);
                        }
                        h
                    }
                };
                utility += prior_entropy - expected_posterior;
            }
        }
    }
    Ok(CandidateScore {
        pose: *pose,
        utility,
        psi,
    })
}

/// Pick the best candidate: highest utility, ties broken by shortest travel
/// from `current`, then by candidate order.
pub fn select_best(current: &Pose, scores: &[CandidateScore]) -> Option<usize> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        let d2 = sq(s.pose.x - current.x) + sq(s.pose.y - current.y);
        let better = match best {
            None => true,
            Some((_, bu, bd2)) => s.utility > bu || (s.utility == bu && d2 < bd2),
        };
        if better {
            best = Some((i, s.utility, d2));
        }
    }
    best.map(|(i, _, _)| i)
}

/// One planning step: sample, score, choose.
///
/// Returns the chosen pose together with every scored candidate so callers
/// can log planning traces.
pub fn plan_step<R: Rng + ?Sized>(
    current: &Pose,
    beliefs: &TaskBeliefs<'_>,
    maps: &[PerceptualMap],
    ctx: &ScoreContext<'_>,
    config: &PlannerConfig,
    rng: &mut R,
) -> Result<(Pose, Vec<CandidateScore>)> {
    config.validate()?;
    let candidates = sample_candidates(current, config, ctx.world, rng);
    let mut scores = Vec::with_capacity(candidates.len());
    for pose in &candidates {
        scores.push(score_candidate(pose, beliefs, maps, ctx)?);
    }
    let idx = select_best(current, &scores).ok_or_else(|| {
        Error::InvalidParameter("no candidates to select from".into())
    })?;
    Ok((scores[idx].pose, scores))
}
