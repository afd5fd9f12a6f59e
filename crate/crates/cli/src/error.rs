use std::fmt;
use std::io;

use dsdist_core::analysis::AnalysisError;
use dsdist_core::distance::DistanceError;
use dsdist_core::embedding_io::EmbeddingError;
use dsdist_core::performance::PerformanceError;
use dsdist_core::projection::ProjectionError;
use dsdist_core::synth::SynthError;

/// Failure of one command. Usage errors exit with 2, everything else with 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data { kind: &'static str, message: String },
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    pub fn data(kind: &'static str, msg: impl Into<String>) -> Self {
        Self::Data { kind, message: msg.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Data { .. } => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "error[UsageError]: {m}"),
            Self::Data { kind, message } => write!(f, "error[{kind}]: {message}"),
        }
    }
}

macro_rules! from_kinded {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Self::data(e.kind(), e.to_string())
            }
        }
    )*};
}

from_kinded!(AnalysisError, DistanceError, EmbeddingError, PerformanceError, ProjectionError, SynthError);

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::data("IoFailure", e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::data("ParseFailure", e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::data("ParseFailure", e.to_string())
    }
}
