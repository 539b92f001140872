//! Ground-truth scene representation and seeded scenario generation.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{atan2, cos, hypot, sin, wrap_angle};

/// A candidate or realized sensor viewpoint: 2D position plus heading.
///
/// The heading is kept normalized to `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose {
            x,
            y,
            heading: wrap_angle(heading),
        }
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    /// Euclidean distance between the positions of two poses.
    pub fn distance_to(&self, other: &Pose) -> f64 {
        hypot(other.x - self.x, other.y - self.y)
    }
}

/// A static target to localize or classify.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub id: u32,
    pub position: (f64, f64),
    pub radius: f64,
    /// Class index for the semantic task; ignored by the metric task.
    pub true_class: usize,
}

/// A disc-shaped obstacle that can block the line of sight to a target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occluder {
    pub id: u32,
    pub position: (f64, f64),
    pub radius: f64,
}

/// A directional light source; viewpoints looking at a target against the
/// light direction suffer back lighting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightSource {
    pub id: u32,
    pub position: (f64, f64),
    /// World angle the light shines towards, in `(-pi, pi]`.
    pub direction: f64,
    /// Width of the affected parabolic region; narrower means a more
    /// concentrated light.
    pub diffusion_width: f64,
}

impl LightSource {
    /// True iff `point` lies ahead of the light along its shine direction.
    /// Back lighting is only possible for illuminated points.
    pub fn illuminates(&self, point: (f64, f64)) -> bool {
        let (dx, dy) = (point.0 - self.position.0, point.1 - self.position.1);
        dx * cos(self.direction) + dy * sin(self.direction) > 0.0
    }
}

/// Axis-aligned rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Bounds {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.min_x + self.max_x),
            0.5 * (self.min_y + self.max_y),
        )
    }

    pub fn contains(&self, (x, y): (f64, f64)) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }

    /// Clamp a point into the rectangle.
    pub fn clamp(&self, (x, y): (f64, f64)) -> (f64, f64) {
        (
            x.clamp(self.min_x, self.max_x),
            y.clamp(self.min_y, self.max_y),
        )
    }
}

/// Generation parameters for a random scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldSpec {
    pub bounds: Bounds,
    pub num_targets: usize,
    pub num_occluders: usize,
    pub num_lights: usize,
    pub num_classes: usize,
    pub target_radius: f64,
    pub occluder_radius: f64,
    /// Minimum pairwise center distance between any two generated entities.
    pub min_separation: f64,
    /// Diffusion width assigned to every generated light.
    pub light_diffusion: f64,
    /// Rejection-sampling budget per entity before giving up.
    pub max_attempts: usize,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            bounds: Bounds::new(0.0, 0.0, 10.0, 10.0),
            num_targets: 10,
            num_occluders: 10,
            num_lights: 2,
            num_classes: 4,
            target_radius: 0.25,
            occluder_radius: 0.25,
            min_separation: 0.5,
            light_diffusion: 1.0,
            max_attempts: 10_000,
        }
    }
}

impl WorldSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.bounds.area() > 0.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "bounds area must be positive, got {}",
                self.bounds.area()
            )));
        }
        if self.target_radius <= 0.0 || self.occluder_radius <= 0.0 {
            return Err(Error::InvalidParameter("entity radii must be > 0".into()));
        }
        if self.light_diffusion <= 0.0 {
            return Err(Error::InvalidParameter("light diffusion must be > 0".into()));
        }
        if self.num_targets > 0 && self.num_classes == 0 {
            return Err(Error::InvalidParameter("num_classes must be >= 1".into()));
        }
        Ok(())
    }
}

/// Ground-truth scene: bounds plus targets, occluders, and lights.
///
/// Immutable after generation and safe to share read-only across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub bounds: Bounds,
    pub targets: Vec<Target>,
    pub occluders: Vec<Occluder>,
    pub lights: Vec<LightSource>,
}

impl World {
    pub fn target(&self, id: u32) -> Option<&Target> {
        self.targets.iter().find(|t| t.id == id)
    }

    pub fn occluder(&self, id: u32) -> Option<&Occluder> {
        self.occluders.iter().find(|o| o.id == id)
    }

    pub fn light(&self, id: u32) -> Option<&LightSource> {
        self.lights.iter().find(|l| l.id == id)
    }
}

/// Generate a random scenario, deterministically for a fixed `(seed, spec)`.
///
/// Entities are placed by rejection sampling, targets first, then occluders,
/// then lights, each uniform over the bounds subject to the pairwise
/// separation constraint against everything already placed. Placement that
/// fails `spec.max_attempts` times errors out rather than silently relaxing
/// the constraint.
pub fn generate_world(seed: u64, spec: &WorldSpec) -> Result<World> {
    spec.validate()?;
    let mut rng = crate::rng::stream(seed, crate::rng::STREAM_WORLD, 0);
    let mut placed: Vec<(f64, f64)> = Vec::new();

    let place = |rng: &mut rand_chacha::ChaCha12Rng,
                     placed: &mut Vec<(f64, f64)>,
                     entity: &'static str,
                     index: usize|
     -> Result<(f64, f64)> {
        for _ in 0..spec.max_attempts.max(1) {
            let x = rng.random_range(spec.bounds.min_x..=spec.bounds.max_x);
            let y = rng.random_range(spec.bounds.min_y..=spec.bounds.max_y);
            let ok = placed
                .iter()
                .all(|&(px, py)| hypot(x - px, y - py) >= spec.min_separation);
            if ok {
                placed.push((x, y));
                return Ok((x, y));
            }
        }
        Err(Error::Placement {
            entity,
            index,
            attempts: spec.max_attempts,
            min_separation: spec.min_separation,
        })
    };

    let mut targets = Vec::with_capacity(spec.num_targets);
    for i in 0..spec.num_targets {
        let position = place(&mut rng, &mut placed, "target", i)?;
        let true_class = rng.random_range(0..spec.num_classes);
        targets.push(Target {
            id: i as u32,
            position,
            radius: spec.target_radius,
            true_class,
        });
    }

    let mut occluders = Vec::with_capacity(spec.num_occluders);
    for i in 0..spec.num_occluders {
        let position = place(&mut rng, &mut placed, "occluder", i)?;
        occluders.push(Occluder {
            id: i as u32,
            position,
            radius: spec.occluder_radius,
        });
    }

    let mut lights = Vec::with_capacity(spec.num_lights);
    for i in 0..spec.num_lights {
        let position = place(&mut rng, &mut placed, "light", i)?;
        let direction = wrap_angle(rng.random_range(0.0..core::f64::consts::TAU));
        lights.push(LightSource {
            id: i as u32,
            position,
            direction,
            diffusion_width: spec.light_diffusion,
        });
    }

    Ok(World {
        bounds: spec.bounds,
        targets,
        occluders,
        lights,
    })
}

/// Range and bearing from a pose to a world point.
///
/// The bearing is the world angle to the point minus the pose heading,
/// wrapped to `(-pi, pi]`. Zero range is allowed; the bearing is then the
/// `atan2(0, 0) = 0` convention value.
pub fn relative_range_bearing(pose: &Pose, point: (f64, f64)) -> (f64, f64) {
    let dx = point.0 - pose.x;
    let dy = point.1 - pose.y;
    let range = hypot(dx, dy);
    let bearing = wrap_angle(atan2(dy, dx) - pose.heading);
    (range, bearing)
}
