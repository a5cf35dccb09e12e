// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

/// Errors produced by the toolkit.
///
/// Variants split into two families: configuration problems (bad paths,
/// unknown names, invalid parameters) and runtime failures on otherwise
/// well-formed input. The CLI maps them to exit codes 2 and 1.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("unresolved id `{0}`")]
    UnresolvedId(String),
    #[error("duplicate entry `{0}`")]
    Duplicate(String),
    #[error("unknown feature `{name}`; valid names: {valid}")]
    UnknownFeature { name: String, valid: String },
    #[error("missing value for `{0}`")]
    MissingLeaf(String),
    #[error("invalid expression `{expr}`: {msg}")]
    Expr { expr: String, msg: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("degenerate label distribution")]
    DegenerateLabels,
    #[error("degenerate target")]
    DegenerateTarget,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("empty stream")]
    EmptyStream,
    #[error("empty query")]
    EmptyQuery,
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("index {index} out of range for {len} neurons")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("missing pair_id `{0}` in activation store")]
    MissingPair(String),
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("unsupported dtype tag {0}")]
    UnsupportedDtype(u8),
    #[error("truncated file")]
    Truncated,
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("length mismatch: expected {expected} bytes, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("probe fitted on layer {layer}, but the final layer is {final_layer}")]
    NotFinalLayer { layer: usize, final_layer: usize },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by the experiment description rather than the data.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::UnknownFeature { .. } | Error::Expr { .. } | Error::MissingLeaf(_) => true,
            Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
