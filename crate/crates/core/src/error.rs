use thiserror::Error;

/// Errors raised by the numerical pipelines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("mesh failure: {0}")]
    MeshFailure(String),

    #[error("assembly failure: {0}")]
    AssemblyFailure(String),

    #[error("point ({x}, {y}) is outside the computational domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error("singular system: relative sigma_min = {sigma_rel:.3e} ({detail})")]
    SingularSystem { sigma_rel: f64, detail: String },

    #[error("propagative wave number {alpha} coincides with a cut-off value")]
    CutoffCollision { alpha: f64 },

    #[error("mode is not evanescent: propagating content {content:.3e}")]
    NonDecaying { content: f64 },

    #[error("degenerate group-velocity form: eigenvalue {lambda:.3e}")]
    DegenerateForm { lambda: f64 },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("singular constraint matrix: condition number {cond:.3e}")]
    SingularConstraint { cond: f64 },

    #[error("quasi-periodic kernel diverges: order {order} is at cut-off for alpha = {alpha}")]
    CutoffDivergence { order: i64, alpha: f64 },

    #[error("absorbing layer leak: outer/inner period norm ratio {ratio:.3}")]
    AbsorberLeak { ratio: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for configuration and input errors, false for numerical failures.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_) | Error::InvalidProfile(_) | Error::Parse(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
