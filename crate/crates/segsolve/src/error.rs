use serde_json::{json, Value};
use thiserror::Error;

use segsolve_core::fbanalysis::AnalysisError;
use segsolve_core::{GridError, NonlocalError, PucciError, SolveError};

use crate::validate::ValidationError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("no convergence at eps = {eps} after {iterations} iterations (last delta {last_delta:e})")]
    NotConverged {
        eps: f64,
        iterations: usize,
        last_delta: f64,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed field file {path}: {reason}")]
    FieldFormat { path: String, reason: String },
    #[error(transparent)]
    Solve(SolveError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Pucci(#[from] PucciError),
    #[error(transparent)]
    Nonlocal(#[from] NonlocalError),
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            // Callers that know ε attach it via `CliError::not_converged`.
            SolveError::NotConverged {
                iterations, last_delta, ..
            } => CliError::NotConverged {
                eps: f64::NAN,
                iterations,
                last_delta,
            },
            other => CliError::Solve(other),
        }
    }
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn not_converged(eps: f64, e: SolveError) -> Self {
        match CliError::from(e) {
            CliError::NotConverged {
                iterations, last_delta, ..
            } => CliError::NotConverged {
                eps,
                iterations,
                last_delta,
            },
            other => other,
        }
    }

    /// Process exit status: 2 invalid input, 3 non-convergence, 4 I/O,
    /// 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Validation(_) => 2,
            CliError::NotConverged { .. } | CliError::Solve(SolveError::DirichletNotConverged { .. }) => 3,
            CliError::Io { .. } | CliError::FieldFormat { .. } => 4,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "Config",
            CliError::Validation(v) => v.kind(),
            CliError::NotConverged { .. } => "NotConverged",
            CliError::Io { .. } => "Io",
            CliError::FieldFormat { .. } => "FieldFormat",
            CliError::Solve(SolveError::DirichletNotConverged { .. }) => "DirichletNotConverged",
            CliError::Solve(_) => "Solver",
            CliError::Analysis(_) => "Analysis",
            CliError::Grid(_) => "Grid",
            CliError::Pucci(_) => "Pucci",
            CliError::Nonlocal(_) => "Nonlocal",
        }
    }

    /// Single-line machine-readable error record.
    pub fn to_json(&self) -> Value {
        let mut rec = json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        let details = match self {
            CliError::Validation(v) => v.details(),
            CliError::NotConverged {
                eps,
                iterations,
                last_delta,
            } => {
                json!({ "eps": finite_or_null(*eps), "iterations": iterations, "last_delta": finite_or_null(*last_delta) })
            }
            CliError::Io { path, .. } | CliError::FieldFormat { path, .. } => json!({ "path": path }),
            _ => Value::Null,
        };
        if !details.is_null() {
            rec["details"] = details;
        }
        rec
    }
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}
