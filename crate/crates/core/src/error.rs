use thiserror::Error;

/// Errors raised across the crate.
///
/// Several "negative" outcomes (no returning disk at this horizon, window
/// growth escaping the region) are reports rather than errors and live in the
/// respective result enums instead.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("map has no inverse; negative iterates are unavailable")]
    MissingInverse,
    #[error("orbit left the chart fiber at step {step}: y = {y}")]
    FiberEscape { step: usize, y: f64 },
    #[error("point ({x}, {y}) lies outside the domain of the partial map")]
    OutsideDomain { x: f64, y: f64 },
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("chord solver failed to bracket the next collision from s = {s}, theta = {theta}")]
    DegenerateChord { s: f64, theta: f64 },
    #[error("displacement vanishes (|d| = {min_norm:e}) on the cell boundary")]
    BoundaryZero { min_norm: f64 },
    #[error("fixed point cells overlap: {0}")]
    Overlap(String),
    #[error("disk chain link verification failed: {0}")]
    LinkVerificationFailed(String),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("no invariant annulus found at this resolution")]
    NotFoundAtResolution,
    #[error("orbit leaves the horseshoe rectangle at step {step}")]
    OrbitLeavesN { step: usize },
    #[error("example claim failed: {0}")]
    ClaimFailed(String),
    #[error("certificate schema error: {0}")]
    Schema(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
