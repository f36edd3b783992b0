use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid curve spec: `{field}`: {reason}")]
    InvalidSpec { field: String, reason: String },

    #[error("non-positive radius of curvature {radius:e} at parameter {param}")]
    NonPositiveCurvature { param: f64, radius: f64 },

    #[error("theta = {theta:e} lies on the boundary of the phase cylinder")]
    BoundaryAngle { theta: f64 },

    #[error("next impact not found from phi = {phi}, theta = {theta}: {detail}")]
    NextImpact {
        phi: f64,
        theta: f64,
        detail: &'static str,
    },

    #[error("map failed at step {step}")]
    MapFailed {
        step: i64,
        #[source]
        source: Box<Error>,
    },

    #[error("{what}: closure error {error:e} exceeds {tolerance:e}")]
    ClosureFailure {
        what: &'static str,
        error: f64,
        tolerance: f64,
    },

    #[error("invalid polygon configuration: {0}")]
    InvalidConfig(String),

    #[error("consecutive vertices {index} and {next} coincide")]
    CoincidentVertices { index: usize, next: usize },

    #[error("monodromy with trace {trace} is not hyperbolic")]
    NotHyperbolic { trace: f64 },

    #[error("trace is not affine in 1/x at site {site}: residual {residual:e}")]
    AffinityViolation { site: usize, residual: f64 },

    #[error("orbit is not degenerate: trace {trace}")]
    NotDegenerate { trace: f64 },

    #[error("bump support around {center} conflicts with footprints {offending:?}")]
    SupportConflict { center: f64, offending: Vec<f64> },

    #[error("unstable manifold covers {covered} of {bins} phi bins; raise the budget")]
    CoverageFailure { covered: usize, bins: usize },

    #[error("{0}")]
    InvalidInput(String),
}

impl Error {
    pub(crate) fn spec(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidSpec {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn at_step(self, step: i64) -> Self {
        Error::MapFailed {
            step,
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad input rather than a numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidSpec { .. }
                | Error::NonPositiveCurvature { .. }
                | Error::BoundaryAngle { .. }
                | Error::InvalidConfig(_)
                | Error::InvalidInput(_)
                | Error::NotDegenerate { .. }
                | Error::NotHyperbolic { .. }
                | Error::SupportConflict { .. }
        )
    }
}
