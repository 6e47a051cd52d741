use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

/// One violated parameter invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamViolation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for ParamViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}", join_violations(.0))]
    InvalidParams(Vec<ParamViolation>),

    #[error("{0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("inconsistent inputs: {0}")]
    Consistency(String),

    #[error("n_paths = {n} is below the minimum of {min} for a Monte Carlo estimate")]
    TooFewPaths { n: usize, min: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Field names of all violated invariants, empty for other error kinds.
    pub fn fields(&self) -> Vec<&'static str> {
        match self {
            Error::InvalidParams(v) => v.iter().map(|p| p.field).collect(),
            _ => Vec::new(),
        }
    }
}

fn join_violations(v: &[ParamViolation]) -> String {
    v.iter()
        .map(|p| p.message.as_str())
        .collect::<Vec<_>>()
        .join("; ")
}
