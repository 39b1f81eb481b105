//! Crate-wide error type.

use std::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by generation, environments, solvers, and the compute
/// substrate.
#[derive(Debug)]
pub enum Error {
    /// A configuration violates its invariants (zero customers, empty
    /// demand range, non-positive horizon, ...).
    Config(String),
    /// An operation received an instance of the wrong kind.
    Kind { expected: &'static str, got: &'static str },
    /// A mask or step was requested on a finished episode.
    TerminalState,
    /// An action violated the feasibility mask or referenced an invalid node.
    InfeasibleAction { action: usize, reason: String },
    /// A dispatch action referenced a customer that is no longer active.
    StaleAction { customer: usize },
    /// Instance too large for an exact solver.
    SizeLimit { what: &'static str, n: usize, max: usize },
    /// A JSON-Lines record failed to parse.
    Parse { line: usize, detail: String },
    /// A JSON-Lines record is missing or mistypes a required field.
    Schema { line: usize, field: String },
    /// Tensor operands have incompatible shapes.
    Shape { op: &'static str, detail: String },
    /// A forward pass produced a NaN or infinity.
    NumericHealth { context: String },
    /// A checkpoint could not be loaded.
    Checkpoint(String),
    /// An evaluation or benchmark input set is unusable.
    Bench(String),
    /// Underlying I/O failure.
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Self::Kind { expected, got } => {
                write!(f, "expected a {expected} instance, got {got}")
            }
            Self::TerminalState => write!(f, "episode already terminal"),
            Self::InfeasibleAction { action, reason } => {
                write!(f, "infeasible action {action}: {reason}")
            }
            Self::StaleAction { customer } => {
                write!(f, "customer {customer} is no longer active")
            }
            Self::SizeLimit { what, n, max } => {
                write!(f, "{what} supports at most {max} nodes, got {n}")
            }
            Self::Parse { line, detail } => write!(f, "parse error on line {line}: {detail}"),
            Self::Schema { line, field } => {
                write!(f, "schema error on line {line}: missing or invalid field `{field}`")
            }
            Self::Shape { op, detail } => write!(f, "shape error in {op}: {detail}"),
            Self::NumericHealth { context } => {
                write!(f, "non-finite value produced in {context}")
            }
            Self::Checkpoint(msg) => write!(f, "checkpoint error: {msg}"),
            Self::Bench(msg) => write!(f, "benchmark error: {msg}"),
            Self::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}
