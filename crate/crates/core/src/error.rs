//! Error type shared across the simulator.

use std::fmt;

/// Everything that can go wrong while configuring or advancing a simulation.
#[derive(Debug)]
pub enum SimError {
    /// Invalid configuration (bad grid parameters, malformed config file, ...).
    Config(String),
    /// A caller broke an API contract (length mismatch, incomplete history, ...).
    Contract(String),
    /// An input left the mathematical domain of an operation (negative
    /// concentration, non-positive time, ...).
    Domain(String),
    /// A time step was rejected by a stability or positivity bound.
    /// `dt_max` is the largest admissible step for the offending sub-step.
    StepRejected {
        step: &'static str,
        dt: f64,
        dt_max: f64,
    },
    /// The turning operator violates the positivity assumption on its rate
    /// (lower rate bound is not strictly positive).
    DegenerateOperator(String),
    /// The null space of the turning operator is not one-dimensional, so no
    /// unique normalized equilibrium exists.
    AmbiguousEquilibrium(String),
    /// A linear problem `Q(f) = phi` was posed with a right-hand side outside
    /// the solvable (mean-zero) class.
    NotSolvable(String),
    Io(std::io::Error),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Config(msg) => write!(f, "configuration error: {msg}"),
            SimError::Contract(msg) => write!(f, "contract violation: {msg}"),
            SimError::Domain(msg) => write!(f, "domain error: {msg}"),
            SimError::StepRejected { step, dt, dt_max } => write!(
                f,
                "{step} rejected dt = {dt:.6e}; largest admissible dt is {dt_max:.6e}"
            ),
            SimError::DegenerateOperator(msg) => write!(f, "degenerate turning operator: {msg}"),
            SimError::AmbiguousEquilibrium(msg) => write!(f, "ambiguous equilibrium: {msg}"),
            SimError::NotSolvable(msg) => write!(f, "not solvable: {msg}"),
            SimError::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for SimError {}

impl From<std::io::Error> for SimError {
    fn from(err: std::io::Error) -> Self {
        SimError::Io(err)
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
