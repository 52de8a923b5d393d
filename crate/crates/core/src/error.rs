use thiserror::Error;

/// Coarse error category, used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input or a configuration refused by a regime gate.
    Validation,
    /// A linear solve or series evaluation failed numerically.
    Solver,
    /// Reading or writing an artifact failed.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("regime refused: {0}")]
    Regime(String),

    #[error("resonant denominator: |1 + h a^(1-kappa)| = {magnitude:e}")]
    Resonance { magnitude: f64 },

    #[error("invalid density: N = {value} < 0 at ({x}, {y}, {z})")]
    InvalidDensity { value: f64, x: f64, y: f64, z: f64 },

    #[error("passivity violated: {0}")]
    Passivity(String),

    #[error("unsupported background: {0}")]
    UnsupportedBackground(String),

    #[error("cube {cube:?} needs {requested} particles but its lattice holds only {capacity}")]
    Capacity {
        cube: [usize; 3],
        requested: usize,
        capacity: usize,
    },

    #[error("probe point lies within {guard:e} of particle {particle} (distance {distance:e})")]
    NearField { particle: usize, distance: f64, guard: f64 },

    #[error("solver failure: {message} (condition estimate {condition_estimate:e})")]
    Singular { message: String, condition_estimate: f64 },

    #[error("iterative solve did not converge after {iterations} iterations (last residual {last:e})")]
    NotConverged {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Domain(_)
            | Error::Precondition(_)
            | Error::Regime(_)
            | Error::InvalidDensity { .. }
            | Error::Passivity(_)
            | Error::UnsupportedBackground(_)
            | Error::Capacity { .. }
            | Error::NearField { .. } => ErrorKind::Validation,
            Error::Resonance { .. } | Error::Singular { .. } | Error::NotConverged { .. } => ErrorKind::Solver,
            Error::Parse { .. } | Error::Io(_) => ErrorKind::Io,
            Error::Stage { source, .. } => source.kind(),
        }
    }

    /// Wrap an error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Short machine-readable tag for error records.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Precondition(_) => "precondition",
            Error::Regime(_) => "regime",
            Error::Resonance { .. } => "resonance",
            Error::InvalidDensity { .. } => "invalid_density",
            Error::Passivity(_) => "passivity",
            Error::UnsupportedBackground(_) => "unsupported_background",
            Error::Capacity { .. } => "capacity",
            Error::NearField { .. } => "near_field",
            Error::Singular { .. } => "singular",
            Error::NotConverged { .. } => "not_converged",
            Error::Stage { source, .. } => source.tag(),
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
