//! Numerical engine for checking harmonicity and potentiality of maps between
//! Riemannian manifolds: energy densities, Euler-Lagrange residual operators,
//! first-order geometric dynamics, theorem hypothesis checkers and the Gauss /
//! jet-bundle machinery for integral submanifolds.
//!
//! Everything is evaluated pointwise on rectangular parameter grids; no PDE is
//! ever solved implicitly. Residuals of an exact solution shrink at O(h^2)
//! under grid refinement, which is what the `verify` tooling measures.

pub mod cli;
pub mod dynamics;
pub mod elresidual;
pub mod energies;
pub mod error;
pub mod exprdsl;
pub mod gaussjet;
pub mod geomcore;
pub mod report;
pub mod scenario;
pub mod verify;

pub use error::Error;
pub type Result<T> = std::result::Result<T, Error>;
