use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("cell ({i}, {j}) is inactive or outside the mesh")]
    InactiveCell { i: usize, j: usize },

    #[error("grid shape mismatch: state is {state_nx}x{state_ny}, mesh is {mesh_nx}x{mesh_ny}")]
    ShapeMismatch {
        state_nx: usize,
        state_ny: usize,
        mesh_nx: usize,
        mesh_ny: usize,
    },

    #[error("step size underflow at t = {time:.6e} s: dt = {dt:.3e} s below dt_min = {dt_min:.3e} s (error ratio {error_ratio:.3e})")]
    Stiffness {
        time: f64,
        dt: f64,
        dt_min: f64,
        error_ratio: f64,
    },

    #[error("texture seeding failed: {0}")]
    Seeding(String),

    #[error("unknown {kind} `{name}` (known: {known})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("texture lost during velocity window: {0}")]
    TextureLost(String),

    #[error("singular Thiele system (q = 0 and alpha*D = 0)")]
    SingularThiele,

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("anomalous outcome needs manual review: {0}")]
    Anomalous(String),

    #[error("phase diagram violates monotonicity: {0}")]
    Monotonicity(String),

    #[error("malformed snapshot {path}: {message}")]
    Snapshot { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv {path}: {message}")]
    Csv { path: PathBuf, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Errors caused by bad user input rather than by a failed simulation.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. } | Error::Config { .. } | Error::UnknownStrategy { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
