//! Failures and the exit codes they map to.

use std::fmt;

use minimax_core::characteristics::CharError;
use minimax_core::expr::ExprError;
use minimax_core::selector::SelectError;
use minimax_core::viscosity::ViscosityError;

#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    /// Forbidden singularity or a failed comparison.
    Check(String),
    /// Unreadable, malformed or invalid configuration, or an I/O problem.
    Config(String),
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Check(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Check(m) => write!(f, "check failed: {m}"),
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("i/o: {e}"))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Config(format!("json: {e}"))
    }
}

// parse errors are caught while loading the config; anything later is an evaluation failure
impl From<ExprError> for Failure {
    fn from(e: ExprError) -> Self {
        Failure::Numerical(e.to_string())
    }
}

impl From<CharError> for Failure {
    fn from(e: CharError) -> Self {
        match e {
            CharError::InvalidProblem(m) => Failure::Config(m),
            other => Failure::Numerical(other.to_string()),
        }
    }
}

impl From<SelectError> for Failure {
    fn from(e: SelectError) -> Self {
        Failure::Numerical(e.to_string())
    }
}

impl From<ViscosityError> for Failure {
    fn from(e: ViscosityError) -> Self {
        Failure::Numerical(e.to_string())
    }
}

pub type Outcome<T> = Result<T, Failure>;
