use thiserror::Error;

/// Errors raised by the simulator and the analytic calculators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the domain of the function it was passed to.
    #[error("{name} out of domain: {reason}")]
    Domain { name: &'static str, reason: String },

    /// A configuration field failed validation. `path` is the dotted field path.
    #[error("invalid configuration at `{path}`: {reason}")]
    Config { path: String, reason: String },

    /// A quantity string such as `"70 ps"` could not be parsed.
    #[error("cannot parse quantity `{input}`: {reason}")]
    Quantity { input: String, reason: String },

    /// Slot-aligned inputs disagree in length.
    #[error("slot lists are misaligned: {left} vs {right} entries")]
    Misaligned { left: usize, right: usize },

    #[error("nothing to estimate: {0}")]
    Empty(&'static str),
}

impl Error {
    pub(crate) fn domain(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
