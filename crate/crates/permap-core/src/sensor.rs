//! Ground-truth-driven simulated sensors.
//!
//! Measurement noise is not fixed: a noise scale `gamma` in `[1, 6]` grows
//! with how badly the line of sight is occluded and whether the viewpoint is
//! backlit, mirroring how a real detector degrades. The schedule constants
//! live in [`NoiseModel`] so they can be re-fit without code changes.
//!
//! Every sampling call consumes a fixed number of rng draws regardless of
//! outcome (miss, outlier, misclassification band). Runs that share a seed
//! therefore see identical noise realizations even when their trajectories
//! diverge, which keeps method comparisons paired.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::env::{relative_range_bearing, Pose, Target, World};
use crate::math::{cos, sin, sq, sqrt, wrap_angle};

/// Range-bearing reading for one target, or a missed detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MetricMeasurement {
    Detection {
        target_id: u32,
        /// Meters, >= 0.
        range: f64,
        /// Radians in `(-pi, pi]`, relative to the sensor heading.
        bearing: f64,
    },
    Miss {
        target_id: u32,
    },
}

impl MetricMeasurement {
    pub fn is_miss(&self) -> bool {
        matches!(self, MetricMeasurement::Miss { .. })
    }

    pub fn target_id(&self) -> u32 {
        match *self {
            MetricMeasurement::Detection { target_id, .. }
            | MetricMeasurement::Miss { target_id } => target_id,
        }
    }
}

/// Classification confidences for one target, or a missed detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SemanticMeasurement {
    Detection {
        target_id: u32,
        /// Probability vector over classes.
        confidences: Vec<f64>,
    },
    Miss {
        target_id: u32,
    },
}

impl SemanticMeasurement {
    pub fn is_miss(&self) -> bool {
        matches!(self, SemanticMeasurement::Miss { .. })
    }

    pub fn target_id(&self) -> u32 {
        match self {
            SemanticMeasurement::Detection { target_id, .. }
            | SemanticMeasurement::Miss { target_id } => *target_id,
        }
    }
}

/// Environmental conditions of one sensing attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseContext {
    /// Occluders whose disc intersects the line of sight.
    pub occlusion_count: usize,
    /// Blockage fraction in `[0, 1]` per intersecting occluder.
    pub occlusion_depths: Vec<f64>,
    pub backlit: bool,
    /// Sensor-to-target distance in meters.
    pub distance: f64,
    /// Noise scale in `[1, 6]`.
    pub gamma: f64,
}

impl NoiseContext {
    pub fn total_occlusion(&self) -> f64 {
        self.occlusion_depths.iter().sum()
    }
}

/// Noise-schedule constants; part of the scenario config.
///
/// The defaults are paired with [`FactorConfig`](crate::mission::FactorConfig):
/// noise *std* grows by `gamma` while the filter inflates *variance* by the
/// perceptual cost, so consistency wants `psi ~ gamma^2`. A dead-center
/// occlusion gives `gamma = 1 + gain` against a peak factor `1 + delta`,
/// hence `delta_occlusion = (1 + gain)^2 - 1` at the defaults; back lighting
/// is a flat increment over the whole diffusion parabola, so `delta_light`
/// is set high enough that even the parabola rim stays at or above
/// `(1 + increment)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// Baseline range noise std, meters.
    pub sigma_d: f64,
    /// Baseline bearing noise std, radians.
    pub sigma_b: f64,
    /// Blind zone: closer than this the sensor cannot resolve the target
    /// and reports a miss. Meters.
    pub min_range: f64,
    /// Gamma gained per unit of summed occlusion depth.
    pub gamma_occlusion_gain: f64,
    /// Gamma added when backlit.
    pub gamma_light_increment: f64,
    pub gamma_max: f64,
    /// Miss probability at gamma = 1.
    pub p_miss_base: f64,
    pub p_miss_cap: f64,
    /// True-class confidence at distance 0 (outside the misclass band).
    pub confidence_start: f64,
    /// Floor of the confidence decay.
    pub confidence_floor: f64,
    /// Confidence lost per meter of distance.
    pub confidence_slope: f64,
    /// Closer than this the detector reports the wrong class.
    pub misclass_distance: f64,
    /// Mass put on the wrong class inside the misclass band.
    pub misclass_mass: f64,
    /// Outlier probability at gamma = 1.
    pub outlier_base: f64,
    /// Additive confidence noise std at gamma = 1.
    pub sigma_confidence: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            sigma_d: 0.3,
            sigma_b: 0.1,
            min_range: 0.5,
            gamma_occlusion_gain: 2.0,
            gamma_light_increment: 1.0,
            gamma_max: 6.0,
            p_miss_base: 0.05,
            p_miss_cap: 0.5,
            confidence_start: 0.95,
            confidence_floor: 0.3,
            // Halves the start confidence across a 10 m arena.
            confidence_slope: 0.0475,
            misclass_distance: 0.5,
            misclass_mass: 0.8,
            // Class flips scale hard with viewing conditions: rare in the
            // clear, the majority of frames in deep shade.
            outlier_base: 0.15,
            sigma_confidence: 0.05,
        }
    }
}

impl NoiseModel {
    pub fn gamma(&self, total_occlusion: f64, backlit: bool) -> f64 {
        let raw = 1.0
            + self.gamma_occlusion_gain * total_occlusion
            + if backlit { self.gamma_light_increment } else { 0.0 };
        raw.clamp(1.0, self.gamma_max)
    }

    pub fn p_miss(&self, gamma: f64) -> f64 {
        (self.p_miss_base * gamma).min(self.p_miss_cap)
    }

    pub fn outlier_prob(&self, gamma: f64) -> f64 {
        (self.outlier_base * gamma).min(1.0)
    }

    /// Pre-noise true-class confidence at distance `d` (outside the band).
    pub fn true_class_confidence(&self, d: f64) -> f64 {
        (self.confidence_start - self.confidence_slope * d).max(self.confidence_floor)
    }

    /// Expected true-class confidence before additive noise, averaging over
    /// the outlier coin. Used by the characterization curves and by the
    /// monotonicity checks: non-increasing in both `d` and `gamma`.
    pub fn expected_true_confidence(&self, d: f64, gamma: f64, num_classes: usize) -> f64 {
        let spread = |peak: f64| (1.0 - peak) / (num_classes as f64 - 1.0);
        let p_out = self.outlier_prob(gamma);
        if d < self.misclass_distance {
            // The true class only ever receives spread mass here.
            spread(self.misclass_mass)
        } else {
            let c = self.true_class_confidence(d);
            (1.0 - p_out) * c + p_out * spread(c)
        }
    }
}

/// Blockage fraction of `occluder` for the sight line `from` -> `to`.
///
/// Zero unless the perpendicular foot of the occluder center falls strictly
/// between the endpoints; then it ramps linearly from 0 at a grazing ray to
/// 1 for a ray through the center.
fn disc_blockage(from: (f64, f64), to: (f64, f64), center: (f64, f64), radius: f64) -> f64 {
    let (ax, ay) = from;
    let (bx, by) = to;
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = sq(dx) + sq(dy);
    if len2 == 0.0 {
        return 0.0;
    }
    let t = ((center.0 - ax) * dx + (center.1 - ay) * dy) / len2;
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let (fx, fy) = (ax + t * dx, ay + t * dy);
    let u = sqrt(sq(center.0 - fx) + sq(center.1 - fy));
    (1.0 - u / radius).max(0.0)
}

/// True iff `pose` looks at the target against the light: the target sits in
/// front of the light, and the pose falls in the parabolic region opening
/// from the target along the light direction (width = the light's diffusion).
fn is_backlit(pose: &Pose, target_pos: (f64, f64), light: &crate::env::LightSource) -> bool {
    if !light.illuminates(target_pos) {
        return false;
    }
    let (c, s) = (cos(light.direction), sin(light.direction));
    let dx = pose.x - target_pos.0;
    let dy = pose.y - target_pos.1;
    let along = dx * c + dy * s;
    let cross = -dx * s + dy * c;
    sq(cross) / light.diffusion_width < along
}

/// Evaluate the environmental conditions of sensing `target` from `pose`.
pub fn ground_truth_context(
    pose: &Pose,
    target: &Target,
    world: &World,
    model: &NoiseModel,
) -> NoiseContext {
    let from = pose.position();
    let to = target.position;
    let mut depths = Vec::new();
    for occ in &world.occluders {
        let depth = disc_blockage(from, to, occ.position, occ.radius);
        if depth > 0.0 {
            depths.push(depth);
        }
    }
    let backlit = world.lights.iter().any(|l| is_backlit(pose, to, l));
    let total: f64 = depths.iter().sum();
    let gamma = model.gamma(total, backlit);
    NoiseContext {
        occlusion_count: depths.len(),
        occlusion_depths: depths,
        backlit,
        distance: sqrt(sq(to.0 - pose.x) + sq(to.1 - pose.y)),
        gamma,
    }
}

/// Draw a range-bearing measurement. Consumes exactly three rng draws.
/// Targets inside the blind zone are always missed.
pub fn sample_metric<R: Rng + ?Sized>(
    pose: &Pose,
    target: &Target,
    context: &NoiseContext,
    model: &NoiseModel,
    rng: &mut R,
) -> MetricMeasurement {
    let u_miss: f64 = rng.random();
    let n_range: f64 = StandardNormal.sample(rng);
    let n_bearing: f64 = StandardNormal.sample(rng);
    if context.distance < model.min_range || u_miss < model.p_miss(context.gamma) {
        return MetricMeasurement::Miss {
            target_id: target.id,
        };
    }
    let (range, bearing) = relative_range_bearing(pose, target.position);
    MetricMeasurement::Detection {
        target_id: target.id,
        range: (range + context.gamma * model.sigma_d * n_range).max(0.0),
        bearing: wrap_angle(bearing + context.gamma * model.sigma_b * n_bearing),
    }
}

/// Smallest class score a detection may carry.
const MIN_CONFIDENCE: f64 = 1e-9;

/// Draw a classification measurement over `num_classes` classes. Consumes
/// exactly `2 + num_classes` rng draws.
pub fn sample_semantic<R: Rng + ?Sized>(
    target: &Target,
    context: &NoiseContext,
    model: &NoiseModel,
    num_classes: usize,
    rng: &mut R,
) -> SemanticMeasurement {
    let u_miss: f64 = rng.random();
    let u_outlier: f64 = rng.random();
    let mut noise = Vec::with_capacity(num_classes);
    for _ in 0..num_classes {
        let n: f64 = StandardNormal.sample(rng);
        noise.push(n);
    }
    if u_miss < model.p_miss(context.gamma) {
        return SemanticMeasurement::Miss {
            target_id: target.id,
        };
    }

    let wrong = (target.true_class + 1) % num_classes;
    let spread = |peak: f64| (1.0 - peak) / (num_classes as f64 - 1.0);
    let mut confidences = vec![0.0; num_classes];
    let (peak_class, peak_mass) = if context.distance < model.misclass_distance {
        // Too close: the detector reports a clipped view as the wrong class.
        (wrong, model.misclass_mass)
    } else if u_outlier < model.outlier_prob(context.gamma) {
        (wrong, model.true_class_confidence(context.distance))
    } else {
        (
            target.true_class,
            model.true_class_confidence(context.distance),
        )
    };
    for (i, c) in confidences.iter_mut().enumerate() {
        *c = if i == peak_class {
            peak_mass
        } else {
            spread(peak_mass)
        };
    }

    // A soft detector never reports an exact zero; the floor also keeps
    // repeated fusion away from empty support once a belief has collapsed.
    let sigma = context.gamma * model.sigma_confidence;
    let mut sum = 0.0;
    for (c, n) in confidences.iter_mut().zip(&noise) {
        *c = (*c + sigma * n).max(MIN_CONFIDENCE);
        sum += *c;
    }
    for c in &mut confidences {
        *c /= sum;
    }
    SemanticMeasurement::Detection {
        target_id: target.id,
        confidences,
    }
}
