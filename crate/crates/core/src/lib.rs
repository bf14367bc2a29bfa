//! Numerical laboratory for linear transmission problems with a
//! discontinuous-coefficient interface.
//!
//! The crate solves
//!
//! ```text
//! div((A + (B - A) χ_D) ∇u) = 0            (elliptic, in B_1)
//! ∂_t u = div((A + (B - A) χ_D) ∇u)        (parabolic, in Q_1)
//! ```
//!
//! for vector-valued u on a uniform Q1 grid over [-1,1]^n, and measures
//! the dyadic quantities that drive Lipschitz-propagation arguments:
//! affine fits of ∇u over balls, BMO constants, rescaled domain
//! densities and their decay, frozen-coefficient comparisons, dichotomy
//! classification, and Hölder-in-time exponents.
//!
//! Module map:
//! - [`modulus`]: moduli of continuity and the Dini calculus.
//! - [`problem`]: coefficient tensors, indicator domains, problem instances.
//! - [`fem`]: Q1 assembly, sparse matrices, preconditioned CG.
//! - [`elliptic`], [`parabolic`]: solver front ends.
//! - [`regularity`]: the dyadic analysis harness.
//! - [`oracle`]: closed-form reference solutions.
//! - [`field_io`]: the on-disk field format.

pub mod elliptic;
pub mod error;
pub mod fem;
pub mod field_io;
pub mod lowdisc;
pub mod modulus;
pub mod oracle;
pub mod parabolic;
pub mod problem;
pub mod quad;
pub mod regularity;

pub use error::{Error, Result};
pub use fem::{DiscreteField, Grid, SparseSystem};
pub use modulus::Modulus;
pub use problem::{CoefficientTensor, IndicatorDomain, TransmissionProblem};
pub use regularity::{AffineFit, CaseTag, DyadicReport};
