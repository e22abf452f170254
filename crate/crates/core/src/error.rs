use thiserror::Error;

/// Errors raised by validation, numerics and the solvers.
///
/// Numeric payloads are stored as `f64` regardless of the working scalar.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid exponent p = {p}: expected p in (1,2) or (2,inf)")]
    InvalidExponent { p: f64 },

    #[error("p = 2 is only handled by the oracle path (use `verify` for the Poisson anchor)")]
    OracleOnlyExponent,

    #[error("invalid dimension n = {dim}: expected n >= 2")]
    InvalidDimension { dim: usize },

    #[error("degenerate annulus: inner radius {r_inner} must be positive")]
    DegenerateAnnulus { r_inner: f64 },

    #[error("invalid annulus: need 0 < r_inner < r_outer, got [{r_inner}, {r_outer}]")]
    InvalidGeometry { r_inner: f64, r_outer: f64 },

    #[error("p = {p} < 2 requires epsilon > 0")]
    MissingRegularization { p: f64 },

    #[error("invalid regularization epsilon = {epsilon}")]
    InvalidRegularization { epsilon: f64 },

    #[error("source changes sign: f > 0 near r = {r_positive}, f < 0 near r = {r_negative}")]
    MixedSignSource { r_positive: f64, r_negative: f64 },

    #[error("source vanishes at r = {r}")]
    VanishingSource { r: f64 },

    #[error("invalid source term: {0}")]
    InvalidSource(String),

    #[error("{quantity} = {value} is outside its domain")]
    Domain { quantity: &'static str, value: f64 },

    #[error("non-finite value {value} while evaluating at x = {x}")]
    NumericalEvaluation { x: f64, value: f64 },

    #[error("invalid bracket [{lo}, {hi}] with f(lo) = {f_lo}, f(hi) = {f_hi}")]
    InvalidBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("{what} did not converge within {iterations} iterations")]
    Convergence { what: &'static str, iterations: usize },

    #[error("no sign change found from seed {seed} within {steps} doublings")]
    BracketNotFound { seed: f64, steps: usize },

    #[error("shooting mismatch is not monotone: no sign change of M(y) found on the fallback scan")]
    MonotonicityViolation,

    #[error("invalid quadrature rule: order {order}, panels {panels}")]
    InvalidQuadrature { order: usize, panels: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("unsupported oracle: {0}")]
    UnsupportedOracle(String),

    #[error(
        "Newton minimizer stalled after {iterations} iterations (objective {objective}, gradient {gradient_norm})"
    )]
    NewtonStalled { iterations: usize, objective: f64, gradient_norm: f64 },

    #[error("malformed profile data: {0}")]
    Profile(String),
}

impl Error {
    /// Stable kebab-case identifier used in machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidExponent { .. } => "invalid-exponent",
            Error::OracleOnlyExponent => "oracle-only-exponent",
            Error::InvalidDimension { .. } => "invalid-dimension",
            Error::DegenerateAnnulus { .. } => "degenerate-annulus",
            Error::InvalidGeometry { .. } => "invalid-geometry",
            Error::MissingRegularization { .. } => "missing-regularization",
            Error::InvalidRegularization { .. } => "invalid-regularization",
            Error::MixedSignSource { .. } => "mixed-sign-source",
            Error::VanishingSource { .. } => "vanishing-source",
            Error::InvalidSource(_) => "invalid-source",
            Error::Domain { .. } => "domain",
            Error::NumericalEvaluation { .. } => "numerical-evaluation",
            Error::InvalidBracket { .. } => "bracket",
            Error::Convergence { .. } => "convergence",
            Error::BracketNotFound { .. } => "bracket-not-found",
            Error::MonotonicityViolation => "monotonicity-violation",
            Error::InvalidQuadrature { .. } => "invalid-quadrature",
            Error::InvalidGrid(_) => "invalid-grid",
            Error::UnsupportedOracle(_) => "unsupported-oracle",
            Error::NewtonStalled { .. } => "convergence",
            Error::Profile(_) => "profile",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
