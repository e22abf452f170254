//! Analytic radially symmetric solutions of the regularized p-Laplacian
//! Dirichlet problem on an annulus `R1 < |x| < R2` in `n` dimensions:
//!
//! ```text
//! div((|∇u|² + χ(p) ε²)^((p-2)/2) ∇u) + f = 0,   u = 0 on both spheres,
//! ```
//!
//! obtained through the canonical dual transformation. The pointwise
//! dual algebraic equation `|θ|² = E(λ)` turns the radial problem into a
//! one-dimensional shooting problem for a single positive constant, after
//! which the solution is an explicit quadrature.
//!
//! Every solution can be certified: the primal potential energy and the
//! pure complementary energy must agree (zero duality gap), the second
//! variations must carry the right signs, and an independent Newton
//! minimizer of the discretized energy must agree with the analytic
//! profile.
//!
//! The numerical core is generic over the scalar type ([`Scalar`], `f32` or
//! `f64`); the aliases at the crate root fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0)` deliberately rejects NaN

pub mod certify;
pub mod duality;
pub mod energy;
pub mod error;
pub mod io;
pub mod numerics;
pub mod oracle;
pub mod problem;
pub mod radial;
pub mod scalar;

/// Version of this crate, echoed in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use certify::{Check, VerificationReport, VerifyOptions};
pub use duality::CanonicalState;
pub use energy::{EnergyReport, ProbeResult, SecondVariationSample, TestFunction, VariationKind};
pub use numerics::{Monotonicity, QuadratureRule, RootBracket};
pub use oracle::{DiscreteEnergyState, FieldDistance, GridFunction};
pub use problem::{ProblemSpec, RadialGrid, Sign, SourceTerm};
pub use radial::{FluxField, ShootingResult, SolutionProfile};

/// Problem instance in double precision.
pub type Problem = problem::ProblemSpec<f64>;
/// Source term in double precision.
pub type Source = problem::SourceTerm<f64>;
/// Radial grid in double precision.
pub type Grid = problem::RadialGrid<f64>;
/// Analytic solution profile in double precision.
pub type Profile = radial::SolutionProfile<f64>;
/// Flux field in double precision.
pub type Flux = radial::FluxField<f64>;
/// Energy report in double precision.
pub type Energies = energy::EnergyReport<f64>;
/// Newton oracle state in double precision.
pub type OracleState = oracle::DiscreteEnergyState<f64>;
/// Verification report in double precision.
pub type Verification = certify::VerificationReport<f64>;
