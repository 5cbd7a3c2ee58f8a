use thiserror::Error;

/// Errors produced anywhere in the crate.
///
/// Variants split into two families: input problems (parse, schema, IO) and
/// numeric problems (domain, singularity, degenerate variance). The CLI maps
/// these onto exit codes 2 and 3 respectively.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    Singular { pivot: usize, value: f64 },

    #[error("matrix is not positive semi-definite (eigenvalue {eigenvalue:e})")]
    NotPsd { eigenvalue: f64 },

    #[error("degenerate variance in coordinate {coordinate} (v = {variance:e})")]
    DegenerateVariance { coordinate: usize, variance: f64 },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("invalid config at {pointer}: {message}")]
    Schema { pointer: String, message: String },

    #[error("incomplete aggregation group {group}: missing cells {missing:?}")]
    IncompleteGroup { group: String, missing: Vec<String> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for malformed inputs (as opposed to numeric failures on
    /// well-formed inputs).
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Schema { .. } | Error::Io(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(x: f64, what: &str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} must be finite, got {x}")))
    }
}

pub(crate) fn ensure_all_finite(xs: &[f64], what: &str) -> Result<()> {
    match xs.iter().position(|x| !x.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::domain(format!(
            "{what}[{i}] must be finite, got {}",
            xs[i]
        ))),
    }
}
