use std::fmt;

use qbstab::QbError;
use serde_json::json;

/// Everything that ends a command early, tagged with its exit code.
#[derive(Debug)]
pub enum Failure {
    Infeasible(String),
    Verification(String),
    Input(String),
    Numerical(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Infeasible(_) => 2,
            Failure::Verification(_) => 3,
            Failure::Input(_) => 4,
            Failure::Numerical(_) => 5,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Infeasible(_) => "infeasible",
            Failure::Verification(_) => "verification_failed",
            Failure::Input(_) => "input_error",
            Failure::Numerical(_) => "numerical_failure",
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Infeasible(m) | Failure::Verification(m) | Failure::Input(m) | Failure::Numerical(m) => m,
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        json!({ "error": self.kind(), "message": self.message(), "exit_code": self.code() }).to_string()
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

impl From<QbError> for Failure {
    fn from(e: QbError) -> Self {
        let msg = e.to_string();
        match e {
            QbError::AllInfeasible { .. } => Failure::Infeasible(msg),
            QbError::Solver { .. } | QbError::Sdp(_) => Failure::Numerical(msg),
            _ => Failure::Input(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(format!("I/O error: {e}"))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Input(format!("JSON error: {e}"))
    }
}
