use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised by the physics and numerics layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate field: |B| = {magnitude:e} T is below the RWA threshold")]
    DegenerateField { magnitude: f64 },

    #[error("quadrature did not converge: estimated error {error:e} above tolerance {tolerance:e}")]
    QuadratureNonConvergence { error: f64, tolerance: f64 },

    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("integration step failed at t = {t:e} s: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("drive schedule undefined at t = {t:e} s")]
    ScheduleUndefined { t: f64 },

    #[error("minimization failed: {0}")]
    Minimization(String),

    #[error("non-positive curvature {curvature:e} J/m^2 along {direction}")]
    NonPositiveCurvature { curvature: f64, direction: String },

    #[error("inverted trap: cos(offset) = {cosine:e} is not positive")]
    InvertedTrap { cosine: f64 },

    #[error("mismatched grids: {0}")]
    MismatchedGrid(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(vec![msg.into()])
    }

    /// True for errors caused by bad input rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidConfig(_) | Error::ScheduleUndefined { .. })
    }
}
