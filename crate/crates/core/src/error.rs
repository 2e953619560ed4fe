use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("invalid value {value} for `{field}`: {reason}")]
    InvalidParameter {
        field: &'static str,
        value: String,
        reason: &'static str,
    },

    /// The multiplexer topology needs a power-of-two number of units.
    #[error("multiplexer `{kind}` requires a power-of-two unit count, got {units}")]
    NotPowerOfTwo { kind: &'static str, units: u32 },

    /// A counting argument was out of its domain (e.g. more detections than photons).
    #[error("domain error: {0}")]
    Domain(String),

    /// A closed form was requested for a configuration it does not describe.
    #[error("precondition violated: {0}")]
    Precondition(&'static str),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, value: impl ToString, reason: &'static str) -> Self {
        Error::InvalidParameter {
            field,
            value: value.to_string(),
            reason,
        }
    }
}

pub(crate) fn check_unit_interval(field: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::invalid(field, value, "must lie in [0, 1]"))
    }
}
