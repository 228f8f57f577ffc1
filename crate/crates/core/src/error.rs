use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("frame matrix is singular or ill-conditioned (condition estimate {cond:e})")]
    SingularFrame { cond: f64 },
    #[error("point {point:?} lies outside the chart")]
    OutOfChart { point: Vec<f64> },
    #[error("Lagrangian is degenerate: fibre Hessian condition estimate {cond:e}")]
    DegenerateLagrangian { cond: f64 },
    #[error("symplectic 2-section is degenerate (condition estimate {cond:e})")]
    DegenerateSymplectic { cond: f64 },
    #[error("model has no kinetic/potential split registered")]
    NotMechanicalType,
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("period {period} exceeds trajectory span {span}")]
    PeriodExceedsSpan { period: f64, span: f64 },
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid integrator settings: {0}")]
    InvalidSettings(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Failures caused by the numerics rather than the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepSizeUnderflow { .. }
                | Error::DegenerateLagrangian { .. }
                | Error::DegenerateSymplectic { .. }
                | Error::SingularFrame { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { what, expected, got })
    }
}
