//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point is too close to the projection singularity (|p| = {norm:e})")]
    NearSingularPoint { norm: f64 },

    #[error("point is off the target manifold (distance {distance:e})")]
    PointOffManifold { distance: f64 },

    #[error("input vector is not tangent (normal component {normal_component:e})")]
    NonTangentInput { normal_component: f64 },

    #[error("perturbation direction is not tangent along the map (normal component {normal_component:e})")]
    NonTangentDirection { normal_component: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("operation requires a {expected} grid")]
    TopologyMismatch { expected: &'static str },

    #[error("ghost layers are stale: need depth {needed}, field carries {available}")]
    StaleGhosts { needed: usize, available: usize },

    #[error("fields live on different grids or have different component counts")]
    ShapeMismatch,

    #[error("ball of radius {radius} around {center:?} contains no grid node")]
    EmptyBall { center: Vec<f64>, radius: f64 },

    #[error("invalid boundary data: {0}")]
    InvalidBoundaryData(String),

    #[error(
        "conjugate gradient did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("step rejected after {halvings} halvings (last dt = {dt:e})")]
    StepRejected { halvings: usize, dt: f64 },

    #[error("singularity stop at t = {t}: projection failed at node {node:?}")]
    SingularityStop { t: f64, node: Vec<isize> },

    #[error("initial data does not match boundary trace (max mismatch {mismatch:e})")]
    IncompatibleInitialData { mismatch: f64 },

    #[error("right-hand side vanishes while left-hand side is {lhs:e}")]
    DegenerateRhs { lhs: f64 },

    #[error("blow-up radius below grid resolution: need r < {min_radius}")]
    RadiusBelowResolution { min_radius: f64 },

    #[error("no blow-up candidate: {0}")]
    NoCandidate(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error("configuration constraint violated for {}: {message}", fields.join(", "))]
    ConstraintViolation {
        fields: Vec<String>,
        message: String,
    },

    #[error("snapshot version mismatch: found {found}, expected {expected}")]
    VersionMismatch { found: String, expected: u32 },

    #[error("corrupt snapshot header: {0}")]
    CorruptHeader(String),

    #[error("truncated snapshot payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("output directory {0} is locked by another run")]
    Locked(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Numerical failures map to exit code 3 in the command-line front end.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::SingularityStop { .. }
                | Error::StepRejected { .. }
                | Error::NearSingularPoint { .. }
        )
    }

    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::UnknownKey(_) | Error::ConstraintViolation { .. }
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io(_)
                | Error::Locked(_)
                | Error::VersionMismatch { .. }
                | Error::CorruptHeader(_)
                | Error::TruncatedPayload { .. }
        )
    }
}
