//! Recursive Bayesian estimators weighted by perceptual cost.
//!
//! Both estimators take the perceptual cost `psi >= 1` of the viewpoint the
//! measurement was taken from. The metric EKF inflates the sensor covariance
//! to `R * psi`; the semantic fusion raises the measurement likelihood to the
//! power `1 / psi`. Either way `psi = 1` is an ordinary Bayesian update and
//! `psi -> inf` leaves the prior untouched.

use alloc::vec::Vec;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::env::{relative_range_bearing, Pose};
use crate::error::{Error, Result};
use crate::math::{ln, powf, sq, wrap_angle};
use crate::sensor::{MetricMeasurement, SemanticMeasurement};

const SYMMETRY_TOL: f64 = 1e-9;

/// Gaussian belief over a static 2-D target position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBelief {
    pub mean: Vector2<f64>,
    pub covariance: Matrix2<f64>,
}

impl GaussianBelief {
    pub fn new(mean: Vector2<f64>, covariance: Matrix2<f64>) -> Result<Self> {
        let belief = GaussianBelief { mean, covariance };
        belief.validate()?;
        Ok(belief)
    }

    pub fn isotropic(x: f64, y: f64, variance: f64) -> Self {
        GaussianBelief {
            mean: Vector2::new(x, y),
            covariance: Matrix2::identity() * variance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.covariance;
        let sym = (p[(0, 1)] - p[(1, 0)]).abs() <= SYMMETRY_TOL;
        // Sylvester's criterion for 2x2 SPD.
        if !sym || p[(0, 0)] <= 0.0 || p.determinant() <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                trace: p.trace(),
                det: p.determinant(),
            });
        }
        Ok(())
    }
}

/// Categorical belief over object classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalBelief {
    pub probs: Vec<f64>,
}

impl CategoricalBelief {
    pub fn uniform(num_classes: usize) -> Self {
        CategoricalBelief {
            probs: alloc::vec![1.0 / num_classes as f64; num_classes],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.probs.iter().sum();
        if self.probs.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(alloc::format!(
                "probability vector sums to {sum}"
            )));
        }
        Ok(())
    }

    /// Most probable class; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Range-bearing sensor model: base covariance plus the observation function
/// and its Jacobian at a linearization point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub range_std: f64,
    pub bearing_std: f64,
    /// Blind zone of the sensor; the planner expects nothing from targets
    /// this close. The update equations do not use it. Meters, 0 disables.
    #[serde(default)]
    pub min_range: f64,
}

impl SensorModel {
    pub fn new(range_std: f64, bearing_std: f64) -> Self {
        SensorModel {
            range_std,
            bearing_std,
            min_range: 0.0,
        }
    }

    pub fn with_min_range(mut self, min_range: f64) -> Self {
        self.min_range = min_range;
        self
    }

    /// Base covariance `R = diag(sigma_d^2, sigma_b^2)`.
    pub fn covariance(&self) -> Matrix2<f64> {
        Matrix2::new(sq(self.range_std), 0.0, 0.0, sq(self.bearing_std))
    }

    /// Predicted (range, bearing) of a target at `point` seen from `pose`.
    pub fn observe(&self, pose: &Pose, point: (f64, f64)) -> (f64, f64) {
        relative_range_bearing(pose, point)
    }

    /// Jacobian of the observation wrt the target state, at `point`.
    pub fn jacobian(&self, pose: &Pose, point: (f64, f64)) -> Result<Matrix2<f64>> {
        let dx = point.0 - pose.x;
        let dy = point.1 - pose.y;
        let r2 = sq(dx) + sq(dy);
        if r2 == 0.0 {
            return Err(Error::DegenerateGeometry {
                x: point.0,
                y: point.1,
            });
        }
        let r = crate::math::sqrt(r2);
        Ok(Matrix2::new(dx / r, dy / r, -dy / r2, dx / r2))
    }
}

fn check_psi(psi: f64) -> Result<()> {
    if !(psi >= 1.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "perceptual cost must be >= 1, got {psi}"
        )));
    }
    Ok(())
}

/// EKF measurement update with perceptually inflated covariance `R * psi`.
///
/// The target is static, so there is no motion prediction: the update is the
/// whole step. A `Miss` leaves the belief unchanged. The posterior covariance
/// is computed in Joseph form and symmetrized.
pub fn ekf_update(
    belief: &GaussianBelief,
    pose: &Pose,
    z: &MetricMeasurement,
    model: &SensorModel,
    psi: f64,
) -> Result<GaussianBelief> {
    check_psi(psi)?;
    let (range, bearing) = match *z {
        MetricMeasurement::Miss { .. } => return Ok(*belief),
        MetricMeasurement::Detection { range, bearing, .. } => (range, bearing),
    };
    let (gain, h, r_psi) = kalman_gain(belief, pose, model, psi)?;
    let (pred_range, pred_bearing) = model.observe(pose, (belief.mean.x, belief.mean.y));
    let innovation = Vector2::new(range - pred_range, wrap_angle(bearing - pred_bearing));

    let mean = belief.mean + gain * innovation;
    let covariance = joseph_covariance(&belief.covariance, &gain, &h, &r_psi);
    let updated = GaussianBelief { mean, covariance };
    updated.validate()?;
    Ok(updated)
}

/// Covariance part of [`ekf_update`] without a measurement.
///
/// The covariance update does not depend on the measured values, only on
/// where the measurement would be taken from — which is exactly what a
/// planner needs to score a candidate viewpoint before going there.
pub fn ekf_expected_update(
    belief: &GaussianBelief,
    pose: &Pose,
    model: &SensorModel,
    psi: f64,
) -> Result<GaussianBelief> {
    check_psi(psi)?;
    let (gain, h, r_psi) = kalman_gain(belief, pose, model, psi)?;
    let covariance = joseph_covariance(&belief.covariance, &gain, &h, &r_psi);
    let updated = GaussianBelief {
        mean: belief.mean,
        covariance,
    };
    updated.validate()?;
    Ok(updated)
}

/// Belief from a first detection alone, bypassing a diffuse prior.
///
/// A linearized update against a prior whose spread dwarfs the measurement
/// noise overshoots, so the first detection of a target is inverted instead:
/// the mean is the measured point, the covariance is `R * psi` pushed through
/// the inverse-observation Jacobian. Later detections refine it with
/// [`ekf_update`] as usual.
pub fn ekf_initialize(
    pose: &Pose,
    range: f64,
    bearing: f64,
    model: &SensorModel,
    psi: f64,
) -> Result<GaussianBelief> {
    check_psi(psi)?;
    if !(range > 0.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "initialization requires a positive range, got {range}"
        )));
    }
    let angle = pose.heading + bearing;
    let (s, c) = (crate::math::sin(angle), crate::math::cos(angle));
    let mean = Vector2::new(pose.x + range * c, pose.y + range * s);
    let j = Matrix2::new(c, -range * s, s, range * c);
    let covariance = j * (model.covariance() * psi) * j.transpose();
    let updated = GaussianBelief {
        mean,
        covariance: (covariance + covariance.transpose()) * 0.5,
    };
    updated.validate()?;
    Ok(updated)
}

fn kalman_gain(
    belief: &GaussianBelief,
    pose: &Pose,
    model: &SensorModel,
    psi: f64,
) -> Result<(Matrix2<f64>, Matrix2<f64>, Matrix2<f64>)> {
    let h = model.jacobian(pose, (belief.mean.x, belief.mean.y))?;
    let r_psi = model.covariance() * psi;
    let s = h * belief.covariance * h.transpose() + r_psi;
    let s_inv = s.try_inverse().ok_or(Error::NotPositiveDefinite {
        trace: s.trace(),
        det: s.determinant(),
    })?;
    Ok((belief.covariance * h.transpose() * s_inv, h, r_psi))
}

fn joseph_covariance(
    p: &Matrix2<f64>,
    gain: &Matrix2<f64>,
    h: &Matrix2<f64>,
    r_psi: &Matrix2<f64>,
) -> Matrix2<f64> {
    let ikh = Matrix2::identity() - gain * h;
    let joseph = ikh * p * ikh.transpose() + gain * r_psi * gain.transpose();
    (joseph + joseph.transpose()) * 0.5
}

/// Dirichlet-style categorical fusion with the measurement discounted by
/// `psi`: posterior proportional to `prior^alpha_bar * z^(1/psi)`.
///
/// The running prior weight `alpha_bar` is pinned to 1 here; the general
/// rule (the weight only ever ratchets up to the strongest measurement
/// weight seen) lives in [`categorical_update_tracked`]. Zero-probability
/// prior classes stay zero. A `Miss` leaves the belief unchanged.
pub fn categorical_update(
    belief: &CategoricalBelief,
    z: &SemanticMeasurement,
    psi: f64,
) -> Result<CategoricalBelief> {
    let (posterior, _) = categorical_update_tracked(belief, z, psi, 1.0)?;
    Ok(posterior)
}

/// General fusion rule carrying the running prior weight.
///
/// Returns `(posterior, alpha_bar')` with
/// `alpha_bar' = max(alpha_bar, 1/psi)`. Since `1/psi <= 1`, a weight that
/// starts at 1 never moves — the pinned setting of [`categorical_update`].
pub fn categorical_update_tracked(
    belief: &CategoricalBelief,
    z: &SemanticMeasurement,
    psi: f64,
    alpha_bar: f64,
) -> Result<(CategoricalBelief, f64)> {
    check_psi(psi)?;
    let confidences = match z {
        SemanticMeasurement::Miss { .. } => return Ok((belief.clone(), alpha_bar)),
        SemanticMeasurement::Detection { confidences, .. } => confidences,
    };
    if confidences.len() != belief.probs.len() {
        return Err(Error::LengthMismatch {
            left: belief.probs.len(),
            right: confidences.len(),
        });
    }
    let alpha = 1.0 / psi;
    let mut probs = Vec::with_capacity(belief.probs.len());
    let mut sum = 0.0;
    for (&prior, &zc) in belief.probs.iter().zip(confidences) {
        let unnorm = if prior == 0.0 {
            0.0
        } else {
            powf(prior, alpha_bar) * powf(zc, alpha)
        };
        sum += unnorm;
        probs.push(unnorm);
    }
    if sum <= 0.0 {
        return Err(Error::DisjointSupport);
    }
    for p in &mut probs {
        *p /= sum;
    }
    Ok((CategoricalBelief { probs }, alpha_bar.max(alpha)))
}

/// Differential entropy of a Gaussian belief in nats:
/// `0.5 * ln((2 pi e)^n * det P)`.
pub fn gaussian_entropy(belief: &GaussianBelief) -> Result<f64> {
    belief.validate()?;
    let n = 2.0;
    let two_pi_e = core::f64::consts::TAU * core::f64::consts::E;
    Ok(0.5 * (n * ln(two_pi_e) + ln(belief.covariance.determinant())))
}

/// Shannon entropy of a categorical belief in nats, with `0 ln 0 = 0`.
pub fn categorical_entropy(belief: &CategoricalBelief) -> f64 {
    -belief
        .probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * ln(p))
        .sum::<f64>()
}

/// KL divergence between two categorical distributions, used by the
/// down-weighting diagnostics.
pub fn categorical_kl(p: &CategoricalBelief, q: &CategoricalBelief) -> f64 {
    p.probs
        .iter()
        .zip(&q.probs)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * ln(pi / qi))
        .sum()
}

/// KL divergence `KL(post || prior)` between two Gaussian beliefs.
pub fn gaussian_kl(post: &GaussianBelief, prior: &GaussianBelief) -> Result<f64> {
    prior.validate()?;
    post.validate()?;
    let p_inv = prior
        .covariance
        .try_inverse()
        .ok_or(Error::NotPositiveDefinite {
            trace: prior.covariance.trace(),
            det: prior.covariance.determinant(),
        })?;
    let d = post.mean - prior.mean;
    let trace = (p_inv * post.covariance).trace();
    let maha = (d.transpose() * p_inv * d)[(0, 0)];
    let log_det = ln(prior.covariance.determinant() / post.covariance.determinant());
    Ok(0.5 * (trace + maha - 2.0 + log_det))
}
