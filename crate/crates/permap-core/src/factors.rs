//! Perceptual factors and their multiplicative composition.
//!
//! A factor is a scalar function of the viewpoint with values in
//! `[1, 1 + delta]`: 1 means the viewpoint is unaffected, larger values mean
//! a measurement taken there is worth less. Three kinds are provided:
//!
//! * occlusion: a parabolic shadow region behind an obstacle, as seen from
//!   the target;
//! * back lighting: the same parabolic shape anchored at the target and
//!   aligned with a directional light;
//! * redundancy: a Gaussian bump around a previously visited viewpoint.
//!
//! The product of all factors bound to a target is that target's perceptual
//! cost at the viewpoint (`psi`), used to inflate measurement covariance and
//! discount fusion weights.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::env::{LightSource, Occluder, Pose, World};
use crate::error::{Error, Result};
use crate::math::{atan2, ceil, cos, exp, sin, sq};

/// Shape parameters of a single factor.
///
/// `delta` scales the influence (peak value is `1 + delta`), `width` is the
/// parabola width of the occlusion and light factors, `sigma` the Gaussian
/// radius of the redundancy factor. Unused fields are ignored by the factor
/// kind that does not need them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorParams {
    pub delta: f64,
    pub width: f64,
    pub sigma: f64,
    /// Meters-per-radian weight mixing heading differences into the
    /// redundancy distance; 0 (the default) compares positions only.
    #[serde(default)]
    pub heading_weight: f64,
}

impl FactorParams {
    /// Parabolic factor parameters (occlusion, back light).
    pub fn parabola(delta: f64, width: f64) -> Self {
        FactorParams {
            delta,
            width,
            sigma: 1.0,
            heading_weight: 0.0,
        }
    }

    /// Gaussian redundancy parameters.
    pub fn gaussian(delta: f64, sigma: f64) -> Self {
        FactorParams {
            delta,
            width: 1.0,
            sigma,
            heading_weight: 0.0,
        }
    }

    /// Redundancy parameters that also penalize similar headings.
    pub fn gaussian_oriented(delta: f64, sigma: f64, heading_weight: f64) -> Self {
        FactorParams {
            delta,
            width: 1.0,
            sigma,
            heading_weight,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta < 0.0 || !self.delta.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!(
                "factor delta must be >= 0, got {}",
                self.delta
            )));
        }
        if self.width <= 0.0 || self.sigma <= 0.0 {
            return Err(Error::InvalidParameter(alloc::format!(
                "factor width/sigma must be > 0, got width {} sigma {}",
                self.width,
                self.sigma
            )));
        }
        if self.heading_weight < 0.0 || !self.heading_weight.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!(
                "heading_weight must be >= 0, got {}",
                self.heading_weight
            )));
        }
        Ok(())
    }
}

/// Which entity a factor is anchored to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FactorKind {
    /// Shadow of the occluder with this id.
    Occlusion { occluder_id: u32 },
    /// Back lighting from the light with this id.
    BackLight { light_id: u32 },
    /// Redundancy with the pose at this index of the history list.
    Redundancy { pose_index: usize },
}

/// Per-target composition of factors.
///
/// `target_point` is the target position the factor geometry is computed
/// against. The planner anchors it at the current estimate, ground-truth
/// evaluation at the true position; both are valid uses of the same map
/// machinery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptualMap {
    pub target_id: u32,
    pub target_point: (f64, f64),
    pub factors: Vec<(FactorKind, FactorParams)>,
}

/// Bounded parabolic bump: the workhorse of the occlusion and light factors.
///
/// The frame is centered at `origin` with its +y axis pointing along the
/// world angle `axis` (the degraded direction); x is the cross-axis offset.
/// Inside the region `x'^2 / width < y'` the value is
/// `1 + delta * exp(-x'^2 / y')`, outside it is exactly 1. The value at the
/// inner edge of the boundary is `1 + delta * exp(-width)`, so the factor
/// steps down to 1 across the parabola's rim.
fn parabola_factor(pose: &Pose, origin: (f64, f64), axis: f64, delta: f64, width: f64) -> f64 {
    let dx = pose.x - origin.0;
    let dy = pose.y - origin.1;
    let (s, c) = (sin(axis), cos(axis));
    // Down-range along the axis and cross-range offset.
    let y = dx * c + dy * s;
    let x = -dx * s + dy * c;
    if x * x / width < y {
        1.0 + delta * exp(-(x * x) / y)
    } else {
        1.0
    }
}

/// Occlusion factor of `occluder` for a target at `target_pos`.
///
/// The shadow axis points from the target through the occluder and onward;
/// viewpoints in the parabolic region behind the occluder see the target
/// poorly. Errors if the occluder and target coincide (no axis).
pub fn occlusion_factor(
    pose: &Pose,
    occluder: &Occluder,
    target_pos: (f64, f64),
    params: &FactorParams,
) -> Result<f64> {
    let dx = target_pos.0 - occluder.position.0;
    let dy = target_pos.1 - occluder.position.1;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::DegenerateGeometry {
            x: target_pos.0,
            y: target_pos.1,
        });
    }
    // atan2(dy, dx) faces the target; the shadow extends the opposite way.
    let axis = atan2(-dy, -dx);
    Ok(parabola_factor(
        pose,
        occluder.position,
        axis,
        params.delta,
        params.width,
    ))
}

/// Back-lighting factor of `light` for a target at `target_pos`.
///
/// Same shape as the occlusion factor with the parabola anchored at the
/// target and aligned with the light direction: viewpoints that look at the
/// target against the light sit inside the region. The width comes from the
/// light's diffusion; a more concentrated light has a narrower effect.
pub fn light_factor(
    pose: &Pose,
    light: &LightSource,
    target_pos: (f64, f64),
    params: &FactorParams,
) -> f64 {
    parabola_factor(pose, target_pos, light.direction, params.delta, params.width)
}

/// Redundancy factor against one previously visited pose.
///
/// `1 + delta * exp(-d^2 / (2 sigma^2))` with `d` the position distance by
/// default: viewpoint similarity is location similarity. A nonzero
/// `heading_weight` additionally folds the (wrapped) heading difference into
/// `d` at that many meters per radian.
pub fn redundancy_factor(pose: &Pose, past_pose: &Pose, params: &FactorParams) -> f64 {
    let mut d2 = sq(pose.x - past_pose.x) + sq(pose.y - past_pose.y);
    if params.heading_weight > 0.0 {
        d2 += sq(params.heading_weight * crate::math::wrap_angle(pose.heading - past_pose.heading));
    }
    1.0 + params.delta * exp(-d2 / (2.0 * params.sigma * params.sigma))
}

impl PerceptualMap {
    pub fn new(target_id: u32, target_point: (f64, f64)) -> Self {
        PerceptualMap {
            target_id,
            target_point,
            factors: Vec::new(),
        }
    }

    pub fn push(&mut self, kind: FactorKind, params: FactorParams) {
        self.factors.push((kind, params));
    }

    /// Perceptual cost at `pose`: the product of all factor values.
    ///
    /// An empty factor list gives exactly 1. Occluder and light references
    /// are resolved against `world`, redundancy references against
    /// `history`; a dangling reference is an error.
    pub fn evaluate(&self, pose: &Pose, world: &World, history: &[Pose]) -> Result<f64> {
        self.evaluate_at(pose, world, history, self.target_point)
    }

    /// [`evaluate`](Self::evaluate) with the factor geometry recomputed
    /// against `target_point` instead of the stored anchor. Lets a
    /// measurement be weighted against the target location it itself
    /// implies rather than a possibly stale estimate.
    pub fn evaluate_at(
        &self,
        pose: &Pose,
        world: &World,
        history: &[Pose],
        target_point: (f64, f64),
    ) -> Result<f64> {
        let mut cost = 1.0;
        for (kind, params) in &self.factors {
            let value = match kind {
                FactorKind::Occlusion { occluder_id } => {
                    let occluder =
                        world
                            .occluder(*occluder_id)
                            .ok_or(Error::DanglingReference {
                                kind: "occluder",
                                id: *occluder_id as usize,
                            })?;
                    occlusion_factor(pose, occluder, target_point, params)?
                }
                FactorKind::BackLight { light_id } => {
                    let light = world.light(*light_id).ok_or(Error::DanglingReference {
                        kind: "light",
                        id: *light_id as usize,
                    })?;
                    light_factor(pose, light, target_point, params)
                }
                FactorKind::Redundancy { pose_index } => {
                    let past = history.get(*pose_index).ok_or(Error::DanglingReference {
                        kind: "history pose",
                        id: *pose_index,
                    })?;
                    redundancy_factor(pose, past, params)
                }
            };
            cost *= value;
        }
        Ok(cost)
    }
}

/// Dense row-major sampling of a perceptual map over the world bounds.
///
/// Row 0 is the southmost (minimum-y) row, column 0 the westmost cell;
/// cell `(r, c)` holds the map value at the cell center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostGrid {
    pub min_x: f64,
    pub min_y: f64,
    pub resolution: f64,
    pub cols: usize,
    pub rows: usize,
    /// Row-major values, `rows * cols` entries.
    pub data: Vec<f64>,
}

impl CostGrid {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.min_x + (col as f64 + 0.5) * self.resolution,
            self.min_y + (row as f64 + 0.5) * self.resolution,
        )
    }

    /// Index of the largest cell value (first encountered on ties).
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_val = f64::NEG_INFINITY;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let v = self.get(r, c);
                if v > best_val {
                    best_val = v;
                    best = (r, c);
                }
            }
        }
        best
    }
}

const MAX_RASTER_CELLS: u64 = 10_000_000;

/// Sample `map` on a regular grid covering the world bounds.
///
/// Cell headings are zero; factor values do not depend on heading. Errors if
/// the resolution would produce more than 10^7 cells.
pub fn rasterize_map(
    map: &PerceptualMap,
    world: &World,
    history: &[Pose],
    resolution: f64,
) -> Result<CostGrid> {
    if !(resolution > 0.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "raster resolution must be > 0, got {resolution}"
        )));
    }
    let cells_along = |extent: f64| ceil((extent / resolution) - 1e-9).max(1.0);
    let cols_f = cells_along(world.bounds.width());
    let rows_f = cells_along(world.bounds.height());
    let cells = (cols_f * rows_f) as u64;
    if cells > MAX_RASTER_CELLS {
        return Err(Error::RasterTooLarge {
            cells,
            limit: MAX_RASTER_CELLS,
        });
    }
    let (cols, rows) = (cols_f as usize, rows_f as usize);
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let x = world.bounds.min_x + (c as f64 + 0.5) * resolution;
            let y = world.bounds.min_y + (r as f64 + 0.5) * resolution;
            data.push(map.evaluate(&Pose::new(x, y, 0.0), world, history)?);
        }
    }
    Ok(CostGrid {
        min_x: world.bounds.min_x,
        min_y: world.bounds.min_y,
        resolution,
        cols,
        rows,
        data,
    })
}
