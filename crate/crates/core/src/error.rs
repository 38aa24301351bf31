use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An index exceeds the data the caller supplied.
    #[error("range error: {0}")]
    Range(String),

    /// Inputs are individually valid but insufficient for the request.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("calibration failed for r = {r}, target {target:e}: best achieved relative error {best_error:e}")]
    Calibration {
        r: u32,
        target: f64,
        best_error: f64,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

pub(crate) fn check_positive_mean(mu: f64) -> Result<()> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(domain(format!("mean {mu} must be positive and finite")));
    }
    Ok(())
}
