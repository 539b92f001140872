//! Evaluation metrics: NEES, RMSE, semantic scores, factor-hit counts, and
//! chi-square consistency bands.


use serde::{Deserialize, Serialize};

use crate::env::{Pose, Target, World};
use crate::error::{Error, Result};
use crate::estimators::{CategoricalBelief, GaussianBelief};
use crate::math::{exp, ln, sq, sqrt};
use crate::sensor::{ground_truth_context, NoiseModel};

/// Normalized estimation error squared: `(mean - truth)^T P^-1 (mean - truth)`.
///
/// A consistent filter averages to the state dimension (2 here).
pub fn nees(belief: &GaussianBelief, truth: (f64, f64)) -> Result<f64> {
    belief.validate()?;
    let p_inv = belief
        .covariance
        .try_inverse()
        .ok_or(Error::NotPositiveDefinite {
            trace: belief.covariance.trace(),
            det: belief.covariance.determinant(),
        })?;
    let e = belief.mean - nalgebra::Vector2::new(truth.0, truth.1);
    Ok((e.transpose() * p_inv * e)[(0, 0)])
}

/// Root mean squared position error over matched belief/truth lists.
pub fn rmse(beliefs: &[GaussianBelief], truths: &[(f64, f64)]) -> Result<f64> {
    if beliefs.len() != truths.len() {
        return Err(Error::LengthMismatch {
            left: beliefs.len(),
            right: truths.len(),
        });
    }
    if beliefs.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = beliefs
        .iter()
        .zip(truths)
        .map(|(b, t)| sq(b.mean.x - t.0) + sq(b.mean.y - t.1))
        .sum();
    Ok(sqrt(sum / beliefs.len() as f64))
}

/// Mean true-class confidence and classification accuracy.
///
/// A target counts as correct only when its true class is the strict argmax;
/// ties count as incorrect.
pub fn semantic_scores(
    beliefs: &[CategoricalBelief],
    true_classes: &[usize],
) -> Result<(f64, f64)> {
    if beliefs.len() != true_classes.len() {
        return Err(Error::LengthMismatch {
            left: beliefs.len(),
            right: true_classes.len(),
        });
    }
    if beliefs.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mut confidence = 0.0;
    let mut correct = 0usize;
    for (belief, &class) in beliefs.iter().zip(true_classes) {
        let p_true = belief.probs[class];
        confidence += p_true;
        let strict = belief
            .probs
            .iter()
            .enumerate()
            .all(|(i, &p)| i == class || p_true > p);
        if strict {
            correct += 1;
        }
    }
    let n = beliefs.len() as f64;
    Ok((confidence / n, correct as f64 / n))
}

/// Which factor kinds a sensing attempt was affected by, judged from ground
/// truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitFlags {
    pub occlusion: bool,
    pub light: bool,
    pub redundancy: bool,
}

/// Running hit tally over a mission.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitCounts {
    pub occlusion: u64,
    pub light: u64,
    pub redundancy: u64,
}

impl HitCounts {
    pub fn add(&mut self, flags: HitFlags) {
        self.occlusion += flags.occlusion as u64;
        self.light += flags.light as u64;
        self.redundancy += flags.redundancy as u64;
    }

    pub fn total(&self) -> u64 {
        self.occlusion + self.light + self.redundancy
    }
}

/// Judge one sensing attempt against ground truth: occlusion hit iff any
/// occluder cuts the sight line, light hit iff backlit, redundancy hit iff
/// the pose is within `redundancy_radius` of any previous measurement pose.
pub fn factor_hits(
    pose: &Pose,
    target: &Target,
    world: &World,
    model: &NoiseModel,
    history: &[Pose],
    redundancy_radius: f64,
) -> HitFlags {
    let ctx = ground_truth_context(pose, target, world, model);
    let redundancy = history.iter().any(|past| {
        sqrt(sq(pose.x - past.x) + sq(pose.y - past.y)) <= redundancy_radius
    });
    HitFlags {
        occlusion: ctx.occlusion_count > 0,
        light: ctx.backlit,
        redundancy,
    }
}

/// Metrics of one mission step.
///
/// Task-inapplicable fields stay `None` (the metric task has no confidence,
/// the semantic task no NEES).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    pub nees_avg: Option<f64>,
    pub rmse: Option<f64>,
    pub confidence_avg: Option<f64>,
    pub accuracy: Option<f64>,
    pub hits: HitCounts,
}

/// Two-sided consistency band for NEES averaged over `n_samples` values of
/// dimension `dim`, at the given significance level.
///
/// Bounds are `chi2_quantile(q, dim * n) / n` at `q = significance / 2` and
/// `1 - significance / 2`.
pub fn chi2_band(dim: usize, n_samples: usize, significance: f64) -> Result<(f64, f64)> {
    if dim == 0 || n_samples == 0 {
        return Err(Error::InvalidParameter(
            "chi2_band needs dim >= 1 and n_samples >= 1".into(),
        ));
    }
    if !(significance > 0.0 && significance < 1.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "significance must be in (0, 1), got {significance}"
        )));
    }
    let k = (dim * n_samples) as f64;
    let n = n_samples as f64;
    let lo = chi2_quantile(significance / 2.0, k)? / n;
    let hi = chi2_quantile(1.0 - significance / 2.0, k)? / n;
    Ok((lo, hi))
}

/// Chi-square quantile via bisection on the regularized incomplete gamma
/// CDF. Good to well below 1e-6 over the degrees of freedom used here.
pub fn chi2_quantile(p: f64, k: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) || !(k > 0.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "chi2_quantile needs p in (0,1) and k > 0, got p={p} k={k}"
        )));
    }
    let cdf = |x: f64| lower_regularized_gamma(k / 2.0, x / 2.0);
    // The CDF is monotone; bracket generously above the extreme quantiles.
    let mut lo = 0.0;
    let mut hi = k + 20.0 * sqrt(2.0 * k) + 50.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Regularized lower incomplete gamma `P(a, x)`: series expansion below the
/// `x = a + 1` ridge, continued fraction of the upper function above it.
fn lower_regularized_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        // Series: P(a,x) = x^a e^-x / Gamma(a) * sum x^n / (a)_{n+1}.
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut denom = a;
        for _ in 0..500 {
            denom += 1.0;
            term *= x / denom;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        sum * exp(a * ln(x) - x - ln_gamma(a))
    } else {
        // Lentz's continued fraction for Q(a,x), then P = 1 - Q.
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        1.0 - exp(a * ln(x) - x - ln_gamma(a)) * h
    }
}

/// Lanczos approximation of `ln Gamma(a)` for positive `a`.
fn ln_gamma(a: f64) -> f64 {
    const G: f64 = 7.0;
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    // Reflection is unnecessary: a > 0 everywhere in this crate.
    let a = a - 1.0;
    let mut sum = COEFFS[0];
    for (i, &c) in COEFFS.iter().enumerate().skip(1) {
        sum += c / (a + i as f64);
    }
    let t = a + G + 0.5;
    0.5 * ln(core::f64::consts::TAU) + (a + 0.5) * ln(t) - t + ln(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix2, Vector2};

    fn belief(mean: (f64, f64), cov: [[f64; 2]; 2]) -> GaussianBelief {
        GaussianBelief {
            mean: Vector2::new(mean.0, mean.1),
            covariance: Matrix2::new(cov[0][0], cov[0][1], cov[1][0], cov[1][1]),
        }
    }

    #[test]
    fn nees_basics() {
        let b = belief((3.0, 4.0), [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(nees(&b, (3.0, 4.0)).unwrap(), 0.0);
        assert!((nees(&b, (2.0, 3.0)).unwrap() - 2.0).abs() < 1e-12);
        let b = belief((2.0, 1.0), [[4.0, 0.0], [0.0, 1.0]]);
        assert!((nees(&b, (0.0, 0.0)).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn nees_is_rotation_invariant() {
        let e = Vector2::new(0.7, -1.3);
        let p = Matrix2::new(1.5, 0.4, 0.4, 0.9);
        let base = belief((e.x, e.y), [[1.5, 0.4], [0.4, 0.9]]);
        let reference = nees(&base, (0.0, 0.0)).unwrap();
        for angle in [0.3_f64, 1.1, 2.9, -0.7] {
            let (s, c) = angle.sin_cos();
            let rot = Matrix2::new(c, -s, s, c);
            let re = rot * e;
            let rp = rot * p * rot.transpose();
            let rotated = GaussianBelief {
                mean: re,
                covariance: (rp + rp.transpose()) * 0.5,
            };
            let v = nees(&rotated, (0.0, 0.0)).unwrap();
            assert!((v - reference).abs() < 1e-9, "angle {angle}");
        }
    }

    #[test]
    fn rmse_values() {
        let b0 = belief((1.0, 1.0), [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(rmse(&[b0], &[(1.0, 1.0)]).unwrap(), 0.0);
        let b1 = belief((3.0, 4.0), [[1.0, 0.0], [0.0, 1.0]]);
        assert!((rmse(&[b1], &[(0.0, 0.0)]).unwrap() - 5.0).abs() < 1e-12);
        let two = [b0, belief((5.0, 0.0), [[1.0, 0.0], [0.0, 1.0]])];
        let truths = [(1.0, 1.0), (0.0, 0.0)];
        assert!((rmse(&two, &truths).unwrap() - 12.5_f64.sqrt()).abs() < 1e-12);
        assert!(matches!(
            rmse(&two, &[(0.0, 0.0)]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn semantic_scores_handle_ties_and_mixtures() {
        let one_hot = CategoricalBelief {
            probs: alloc::vec![0.0, 1.0, 0.0],
        };
        let (conf, acc) = semantic_scores(&[one_hot.clone()], &[1]).unwrap();
        assert_eq!((conf, acc), (1.0, 1.0));

        let uniform = CategoricalBelief::uniform(4);
        let (conf, acc) = semantic_scores(&[uniform], &[2]).unwrap();
        assert_eq!(conf, 0.25);
        assert_eq!(acc, 0.0, "argmax tie counts as incorrect");

        // Mixed fixture, hand-computed: confidences 0.6 and 0.2 -> mean 0.4,
        // first correct, second not -> accuracy 0.5.
        let a = CategoricalBelief {
            probs: alloc::vec![0.6, 0.3, 0.1],
        };
        let b = CategoricalBelief {
            probs: alloc::vec![0.5, 0.2, 0.3],
        };
        let (conf, acc) = semantic_scores(&[a, b], &[0, 1]).unwrap();
        assert!((conf - 0.4).abs() < 1e-12);
        assert!((acc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn chi2_matches_closed_form_for_two_dof() {
        // For k = 2 the quantile is -2 ln(1 - p).
        let (lo, hi) = chi2_band(2, 1, 0.05).unwrap();
        assert!((lo - 0.0506356159685798).abs() < 1e-9, "lo {lo}");
        assert!((hi - 7.377758908227871).abs() < 1e-9, "hi {hi}");
        for p in [0.01, 0.025, 0.5, 0.9, 0.975, 0.999] {
            let q = chi2_quantile(p, 2.0).unwrap();
            let exact = -2.0 * (1.0 - p).ln();
            assert!((q - exact).abs() < 1e-9, "p={p}: {q} vs {exact}");
        }
    }

    #[test]
    fn chi2_band_tightens_around_the_dimension() {
        let wide = chi2_band(2, 10, 0.05).unwrap();
        let tight = chi2_band(2, 1000, 0.05).unwrap();
        assert!(wide.0 < tight.0 && tight.1 < wide.1);
        assert!(tight.0 > 1.8 && tight.1 < 2.2);
        for (dim, n) in [(1, 1), (2, 1), (2, 10), (2, 200), (3, 7)] {
            let (lo, hi) = chi2_band(dim, n, 0.05).unwrap();
            assert!(lo < dim as f64 && (dim as f64) < hi, "band ({lo},{hi}) vs {dim}");
        }
    }

    #[test]
    fn chi2_quantiles_match_reference_implementation() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        for k in [1usize, 2, 5, 20, 100, 400, 2000] {
            let reference = ChiSquared::new(k as f64).unwrap();
            for p in [0.005, 0.025, 0.1, 0.5, 0.9, 0.975, 0.995] {
                let ours = chi2_quantile(p, k as f64).unwrap();
                let theirs = reference.inverse_cdf(p);
                let tol = 1e-6 * theirs.max(1.0);
                assert!(
                    (ours - theirs).abs() < tol,
                    "k={k} p={p}: {ours} vs {theirs}"
                );
            }
        }
    }

    #[test]
    fn factor_hit_flags_follow_ground_truth() {
        use crate::env::{Bounds, LightSource, Occluder};
        let world = World {
            bounds: Bounds::new(0.0, 0.0, 10.0, 10.0),
            targets: Vec::new(),
            occluders: alloc::vec![Occluder {
                id: 0,
                position: (3.0, 5.0),
                radius: 0.25,
            }],
            lights: alloc::vec![LightSource {
                id: 0,
                position: (0.0, 5.0),
                direction: 0.0,
                diffusion_width: 3.0,
            }],
        };
        let target = Target {
            id: 0,
            position: (2.0, 5.0),
            radius: 0.25,
            true_class: 0,
        };
        let model = NoiseModel::default();

        // Clear viewpoint: in front of the occluder, not against the light.
        let clear = Pose::new(2.0, 8.0, 0.0);
        let flags = factor_hits(&clear, &target, &world, &model, &[], 0.1);
        assert_eq!(
            flags,
            HitFlags {
                occlusion: false,
                light: false,
                redundancy: false
            }
        );

        // Behind the occluder on the sight line: occlusion hit; also east of
        // the target against the eastbound light: light hit.
        let shadowed = Pose::new(5.0, 5.0, 0.0);
        let flags = factor_hits(&shadowed, &target, &world, &model, &[], 0.1);
        assert!(flags.occlusion);
        assert!(flags.light);

        // Revisiting a measurement pose.
        let history = [Pose::new(2.0, 8.05, 1.0)];
        let flags = factor_hits(&clear, &target, &world, &model, &history, 0.1);
        assert!(flags.redundancy);
        assert!(!factor_hits(&clear, &target, &world, &model, &history, 0.01).redundancy);
    }

    #[test]
    fn hit_counts_accumulate() {
        let mut counts = HitCounts::default();
        counts.add(HitFlags {
            occlusion: true,
            light: false,
            redundancy: true,
        });
        counts.add(HitFlags {
            occlusion: true,
            light: true,
            redundancy: false,
        });
        assert_eq!(counts.occlusion, 2);
        assert_eq!(counts.light, 1);
        assert_eq!(counts.redundancy, 1);
        assert_eq!(counts.total(), 4);
    }
}
