//! Simulation core for active perception with environment-aware measurement
//! models.
//!
//! A scene ([`env::World`]) contains targets to estimate, occluders, and
//! directional light sources. Environmental effects on candidate viewpoints
//! are described by multiplicative *perceptual factors* ([`factors`]) whose
//! product gives a per-viewpoint, per-target perceptual cost `psi >= 1`. The
//! cost scales measurement covariance in an EKF and discounts the fusion
//! weight of categorical measurements ([`estimators`]), which lets a greedy
//! viewpoint planner ([`planner`]) rank candidates by predicted posterior
//! entropy while accounting for occlusion, back lighting, and redundancy.
//!
//! [`sensor`] simulates ground-truth-driven range-bearing and classification
//! measurements whose noise grows with the environmental effects actually
//! present, [`metrics`] provides the evaluation metrics (NEES, RMSE,
//! chi-square consistency bands, factor-hit counts), and [`mission`] runs the
//! full plan-move-sense-fuse loop.
//!
//! The crate is `no_std`-compatible (with `alloc`); enable the `libm` feature
//! when building without `std`. IO, file formats, and the CLI live in the
//! companion `permap-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(not(any(feature = "std", feature = "libm")))]
compile_error!("permap-core requires either the `std` or the `libm` feature");

pub mod env;
pub mod error;
pub mod estimators;
pub mod factors;
pub mod math;
pub mod metrics;
pub mod mission;
pub mod planner;
pub mod rng;
pub mod sensor;

pub use error::Error;
