use thiserror::Error;

/// Errors raised across the toolkit.
///
/// The variants are grouped by how the runner maps them onto exit codes:
/// model/argument validation, failed hypotheses, and numeric or budget
/// failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid offspring law: {0}")]
    InvalidLaw(String),
    #[error("invalid environment model: {0}")]
    InvalidModel(String),
    #[error("supercriticality fails: mu = {mu} <= 0")]
    NotSupercritical { mu: f64 },
    #[error("hypothesis H2 fails: gamma = {gamma} >= 1")]
    H2Violated { gamma: f64 },
    #[error("nonlattice required: log A is concentrated on a lattice")]
    LatticeEnvironment,
    #[error("hypothesis {0} fails")]
    Hypothesis(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("quadrature did not converge: achieved error {achieved:e}")]
    Quadrature { achieved: f64 },
    #[error("attempt budget exceeded: {attempted} attempts for {survivors} survivors (target {target})")]
    BudgetExceeded {
        attempted: u64,
        survivors: usize,
        target: usize,
    },
    #[error("truncation tail too heavy: tail mass {tail_mass:e}")]
    TailTooHeavy { tail_mass: f64 },
    #[error("branch tracking of log lambda failed between s = {from} and s = {to}")]
    BranchTracking { from: f64, to: f64 },
    #[error("imaginary residue {residue:e} above tolerance in Q_{k}")]
    ImaginaryResidue { k: usize, residue: f64 },
    #[error("empty sample")]
    EmptySample,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Process exit code for this error: 1 configuration, 2 hypothesis, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidLaw(_) | Error::InvalidModel(_) | Error::InvalidArgument(_) | Error::Config(_) => 1,
            Error::NotSupercritical { .. } | Error::H2Violated { .. } | Error::LatticeEnvironment | Error::Hypothesis(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
