use thiserror::Error;

/// Errors raised anywhere in the workbench.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("time {t} lies outside the pulse interval [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },
    #[error("a delta pulse has no pointwise amplitude")]
    DeltaPointwise,
    #[error("invalid pulse shape: {0}")]
    InvalidShape(String),
    #[error("quadrature did not converge: doubling the node count changed {quantity} by {residual:.3e}")]
    QuadratureNotConverged { quantity: &'static str, residual: f64 },
    #[error("design did not converge after {iterations} iterations; best residual {residual:.3e}")]
    DesignNotConverged { iterations: usize, residual: f64 },
    #[error("ill-conditioned design Jacobian (condition estimate {condition:.3e}); try more quadrature nodes or a different seed")]
    IllConditioned { condition: f64 },
    #[error("root search failed: {0}")]
    RootNotFound(String),
    #[error("operator is not Hermitian (|H - H^dag| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("cannot parse sequence: {0}")]
    SequenceParse(String),
    #[error("no analytic effective Hamiltonian for sequence `{0}`")]
    NoAnalyticForm(String),
    #[error("shape parameters do not describe a symmetric pi pulse: {0}")]
    NotPiPulse(String),
    #[error("integrator self-check failed: step halving changed the propagator by {deviation:.3e} (limit {limit:.1e}) at {steps} steps per pulse")]
    StepConvergence { steps: usize, deviation: f64, limit: f64 },
    #[error("trace carries no reduced states for initial qubit state {0}")]
    MissingReducedStates(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

impl Error {
    /// Whether the error comes from a numerical method failing to converge
    /// (as opposed to bad input).
    pub fn is_convergence(&self) -> bool {
        matches!(
            self,
            Error::QuadratureNotConverged { .. }
                | Error::DesignNotConverged { .. }
                | Error::IllConditioned { .. }
                | Error::RootNotFound(_)
                | Error::StepConvergence { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
