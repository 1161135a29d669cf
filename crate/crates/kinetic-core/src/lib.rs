//! Kinetic trajectories, mollification, and verification tooling for the
//! hypoelliptic Kolmogorov equation `(∂t + v·∇x) f = ∇v·(a ∇v f)`.
//!
//! The library is organized around the geometry of the kinetic group on
//! `R^{1+2n}` and a family of two-point trajectories driven by logarithmic
//! oscillation forcings. On top of those sit the almost-exponential map, the
//! kinetic mollification operator, closed-form oracle solutions, a small
//! finite-difference solver, the De Giorgi–Moser iteration constants, and a
//! noncriticality auditor for power-expansion forcings.

pub mod audit;
pub mod error;
pub mod geometry;
pub mod highorder;
pub mod iteration;
pub mod mollifier;
pub mod numerics;
pub mod oracles;
pub mod pde;
pub mod trajectory;

pub use error::KineticError;

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, KineticError>;
