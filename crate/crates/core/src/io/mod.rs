//! File formats: scenario (TOML), trace and results (CSV), plus synthetic
//! trace generation.

mod generate;
mod results;
mod scenario;
mod trace;

use std::path::Path;

use thiserror::Error;

pub use generate::{generate_trace, GeneratedTrace, TraceGenConfig};
pub use results::{read_results, result_rows, write_results, ResultRow};
pub use scenario::{
    parse_scenario, parse_scenario_str, write_scenario_string, ChannelSection, LevelEntry, ScenarioFile,
    TimingSection, UserEntry, Variation, VideoSection, SCENARIO_FORMAT,
};
pub use trace::{parse_trace, parse_trace_str, write_trace_string, TRACE_HEADER};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IoError {
    #[error("{}{}{message}", .line.map(|l| format!("line {l}: ")).unwrap_or_default(), .field.as_ref().map(|f| format!("{f}: ")).unwrap_or_default())]
    Parse { line: Option<usize>, field: Option<String>, message: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: {inner}")]
    InFile { path: String, inner: Box<IoError> },
    #[error("similarity target {target} is out of reach; nearest achievable values are {low:.2} and {high:.2}")]
    Unreachable { target: f64, low: f64, high: f64 },
}

impl IoError {
    fn in_file(self, path: &Path) -> Self {
        Self::InFile { path: path.display().to_string(), inner: Box::new(self) }
    }

    /// Innermost error, without file context.
    pub fn root(&self) -> &IoError {
        match self {
            Self::InFile { inner, .. } => inner.root(),
            other => other,
        }
    }
}

fn read(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|e| IoError::Io { path: path.display().to_string(), message: e.to_string() })
}
