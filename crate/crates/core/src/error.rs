use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("representation mismatch: {0}")]
    Representation(String),

    #[error("numerical failure: {message} (jitter reached {jitter:e}, pivot ratio {pivot_ratio:e})")]
    Numerical {
        message: String,
        jitter: f64,
        pivot_ratio: f64,
    },

    #[error("Laplace iterations did not converge: gradient norm {grad_norm:e} after {iterations} iterations")]
    Convergence { grad_norm: f64, iterations: usize },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("SMILES parse error at byte {offset}: {kind}")]
    Parse {
        offset: usize,
        kind: crate::featurization::smiles::ParseErrorKind,
    },

    #[error("missing column `{missing}`; available headers: {available:?}")]
    Schema { missing: String, available: Vec<String> },

    #[error("duplicate ligand id `{0}`")]
    DuplicateId(String),

    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("checkpoint integrity check failed: {0}")]
    Integrity(String),

    #[error("checkpoint format version {found} cannot be migrated to {expected}")]
    Migration { found: u32, expected: u32 },

    #[error("oracle failure for `{id}`: {reason}")]
    Oracle { id: String, reason: String },

    #[error("campaign state error: {0}")]
    State(String),

    #[error("unknown pair `{0}`")]
    UnknownPair(String),

    #[error("pair `{0}` is already labeled")]
    AlreadyLabeled(String),

    #[error("campaign is finished")]
    Finished,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
