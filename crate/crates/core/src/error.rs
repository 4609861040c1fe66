use std::fmt;

use thiserror::Error;

/// A single failed parameter check.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: &'static str,
    pub reason: String,
}

impl FieldError {
    pub fn new(field: &'static str, reason: impl Into<String>) -> Self {
        Self {
            field,
            reason: reason.into(),
        }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldErrors(pub Vec<FieldError>);

impl fmt::Display for FieldErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error in {field}: {reason}")]
    Domain { field: &'static str, reason: String },

    #[error("invalid parameters: {0}")]
    Validation(FieldErrors),

    #[error("invalid sweep axis {axis}: {reason}")]
    InvalidAxis { axis: String, reason: String },

    #[error("steady state did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("steady state residual grew for {streak} consecutive iterations (residual {residual:e}); bistability suspected")]
    Bistability { streak: usize, residual: f64 },

    #[error("drift matrix is unstable (max real part of spectrum {margin:e})")]
    Unstable { margin: f64 },

    #[error("Lyapunov solve ill-conditioned (relative residual {residual:e})")]
    IllConditioned { residual: f64 },

    #[error("time step {dt:e} s exceeds the limit {limit:e} s")]
    StepSize { dt: f64, limit: f64 },

    #[error("integration diverged at t = {time:e} s")]
    Divergence { time: f64 },

    #[error("unphysical covariance: {0}")]
    Unphysical(String),

    #[error("numerical failure in {op}: {reason}")]
    Numerical { op: &'static str, reason: String },

    #[error("no stable point in the search range")]
    NoStablePoint,
}

impl Error {
    pub(crate) fn domain(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            field,
            reason: reason.into(),
        }
    }

    /// Whether the failure comes from input checking rather than from a
    /// numerical procedure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. } | Error::Validation(_) | Error::InvalidAxis { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
