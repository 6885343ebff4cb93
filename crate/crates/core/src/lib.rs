//! Adaptive stochastic Galerkin finite elements for elliptic problems with
//! affine-parametric diffusion coefficients.
//!
//! The crate is organised bottom-up:
//!
//! * [`meshkit`]: conforming triangle meshes, newest vertex bisection and the
//!   uniform-refinement overlay used by the two-level estimator.
//! * [`paramkit`]: multi-indices, index sets, detail index sets and the
//!   orthonormal Legendre basis.
//! * [`model`]: the coefficient family, right-hand side and contrast constants.
//! * [`galerkin`]: Kronecker-structured assembly, PCG solves, prolongation and
//!   energies.
//! * [`estimators`]: two-level spatial and hierarchical parametric indicators.
//! * [`marking`]: Dörfler and maximum marking and the four composite criteria.
//! * [`driver`]: the adaptive loop, traces, reference solutions and rates.

pub mod driver;
pub mod error;
pub mod estimators;
pub mod galerkin;
pub mod marking;
pub mod meshkit;
pub mod model;
pub mod paramkit;

pub use error::{Error, Result};
