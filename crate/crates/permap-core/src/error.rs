//! Crate-wide error type.

use alloc::string::String;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Rejection sampling could not place an entity under the separation
    /// constraint within the attempt budget.
    #[error("could not place {entity} #{index} after {attempts} attempts (min separation {min_separation} m)")]
    Placement {
        entity: &'static str,
        index: usize,
        attempts: usize,
        min_separation: f64,
    },

    /// Invalid scenario or parameter value.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Occluder coincident with the target; the shadow direction is undefined.
    #[error("degenerate factor geometry: occluder and target coincide at ({x}, {y})")]
    DegenerateGeometry { x: f64, y: f64 },

    /// A factor references an entity or history pose that does not exist.
    #[error("dangling {kind} reference: id {id}")]
    DanglingReference { kind: &'static str, id: usize },

    /// A covariance matrix lost symmetry or positive definiteness.
    #[error("covariance not SPD: trace {trace}, det {det}")]
    NotPositiveDefinite { trace: f64, det: f64 },

    /// Categorical fusion produced an all-zero unnormalized posterior.
    #[error("categorical fusion: prior and measurement have disjoint support")]
    DisjointSupport,

    /// Requested raster would exceed the cell budget.
    #[error("raster of {cells} cells exceeds limit of {limit}")]
    RasterTooLarge { cells: u64, limit: u64 },

    /// Mismatched belief/truth list lengths in a metric computation.
    #[error("length mismatch: {left} beliefs vs {right} truths")]
    LengthMismatch { left: usize, right: usize },

    /// A mission step failed; wraps the underlying error with step context.
    #[error("step {step}, target {target}: {source}")]
    Step {
        step: usize,
        target: u32,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_step(self, step: usize, target: u32) -> Error {
        Error::Step {
            step,
            target,
            source: alloc::boxed::Box::new(self),
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
