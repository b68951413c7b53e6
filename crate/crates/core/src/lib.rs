//! Planar two-phase conductivity toolkit.
//!
//! Everything here works on real 2x2 matrices. A measurable conductivity
//! taking two values sigma1, sigma2 on a partition of the plane has three
//! equivalent descriptions:
//!
//! * the matrix sigma itself (possibly non-symmetric),
//! * a pair of complex dilatations (mu, nu) for the associated Beltrami
//!   equation `f_zbar = mu f_z + nu conj(f_z)`,
//! * a pair (G, H) of symmetric determinant-one matrices with
//!   `Df^T H Df = G det Df`.
//!
//! The crate converts freely among the three ([`translate`]), measures
//! ellipticity and distortion ([`ellipticity`]), computes the minimal
//! distortion `K_min` achievable by affine changes of variables in domain
//! and target together with the critical-pair classification ([`kmin`]),
//! builds staircase laminates whose `p_K`-th matrix moments diverge
//! ([`laminate`]), applies fractional-linear transforms of conductivities
//! ([`milton`]), and runs desk-scale finite element experiments on
//! two-phase grids ([`fieldlab`]).
//!
//! The distortion `K` controls the critical gradient-integrability
//! exponent `p_K = 2K/(K-1)`; the sharp exponent for a two-phase pair is
//! `p_{K_min}`, and the laminate and PDE modules probe exactly that
//! threshold numerically.

pub mod ellipticity;
pub mod fieldlab;
pub mod kmin;
pub mod laminate;
pub mod mat2;
pub mod milton;
pub mod oracle;
pub mod sampling;
pub mod solver;
pub mod translate;

pub use ellipticity::EllipticityReport;
pub use kmin::{KminReport, TwoPhase};
pub use laminate::{ConeSpec, Laminate};
pub use mat2::{Mat2, SpdMat2};
pub use translate::{BeltramiPair, GHPair};

/// Library-wide error type. Variant names follow the failure they report;
/// the payload carries enough context to print a useful message.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A matrix required to be symmetric was not, within tolerance.
    #[error("matrix is not symmetric within tolerance: |a12 - a21| = {0:.3e}")]
    NonSymmetric(f64),
    /// A matrix required to be symmetric positive definite was not.
    #[error("matrix is not symmetric positive definite ({0})")]
    NonSpd(String),
    /// A conductivity failed the uniform ellipticity bounds.
    #[error("matrix is not uniformly elliptic ({0})")]
    NotElliptic(String),
    /// An argument fell outside the documented domain.
    #[error("argument outside domain: {0}")]
    DomainError(String),
    /// A closed-form intermediate left its theoretical range; indicates
    /// invalid input or numerical trouble, never expected on valid data.
    #[error("numerical guard tripped: {0}")]
    NumericalError(String),
    /// Simultaneous diagonalization requested for a pair with K_min
    /// strictly below K_hat; informative, not a failure.
    #[error("pair is not tight: K_min = {kmin:.12} < K_hat = {khat:.12}")]
    NotTight { kmin: f64, khat: f64 },
    /// Laminate split whose parent is not on the segment [B, C].
    #[error("split target is not collinear with the proposed pair (residual {0:.3e})")]
    NotCollinear(f64),
    /// Laminate split whose pair difference is not rank one.
    #[error("split pair difference is not rank one (|det| = {0:.3e} vs scale {1:.3e})")]
    NotRankOne(f64, f64),
    /// Split weight outside (0, 1), or a malformed tree edit.
    #[error("bad split parameter: {0}")]
    BadParameter(String),
    /// No rank-one connection to a diagonal matrix inside the cone.
    #[error("no feasible diagonal connection: {0}")]
    Infeasible(String),
    /// Fractional-linear transform with a singular resolvent.
    #[error("transform is singular: |det(cI + dJ sigma)| = {0:.3e}")]
    SingularTransform(f64),
    /// Iterative linear solver failed to reach the residual contract.
    #[error("linear solver failed: {0}")]
    SolverFailure(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
