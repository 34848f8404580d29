use thiserror::Error;

/// Errors raised anywhere in the corrosion model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PatinaError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("front ordering violated: gamma={gamma:e}, beta={beta:e}, a={a:e}")]
    FrontOrdering { a: f64, beta: f64, gamma: f64 },

    #[error("degenerate layer: {layer} width {width:e}")]
    DegenerateLayer { layer: &'static str, width: f64 },

    #[error("grid length mismatch: expected {expected}, got {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("zero pivot in tridiagonal solve at row {index}")]
    ZeroPivot { index: usize },

    #[error("singular Robin condition for {species}: coefficient {coefficient:e} (dz={dz:e}, gamma_dot={gamma_dot:e}, b_dot={b_dot:e})")]
    SingularRobin {
        species: &'static str,
        coefficient: f64,
        dz: f64,
        gamma_dot: f64,
        b_dot: f64,
    },

    #[error("{path}: line {line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("{0}")]
    Data(String),

    #[error("io error on {path}: {reason}")]
    Io { path: String, reason: String },

    #[error("solver failed at step {step} (t = {time_hours} h): {source}")]
    Solver {
        step: usize,
        time_hours: f64,
        #[source]
        source: Box<PatinaError>,
    },
}

pub type Result<T> = std::result::Result<T, PatinaError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> PatinaError {
    PatinaError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn io_error(path: &std::path::Path, err: &std::io::Error) -> PatinaError {
    let reason = if err.kind() == std::io::ErrorKind::NotFound {
        "file not found".to_string()
    } else {
        err.to_string()
    };
    PatinaError::Io {
        path: path.display().to_string(),
        reason,
    }
}
