//! Numerical potential theory on weighted planar domains.
//!
//! The crate computes p-harmonic Green functions, condenser capacities and
//! uniqueness diagnostics for radial weights on the plane, under both the
//! Euclidean metric and an ℓ¹-type Finsler metric whose cotangent norm is
//! `max(|∂_r u|, |∂_θ u|/r)`.
//!
//! Module map:
//! - [`weights`]: radial weight models and ball-measure profiles
//! - [`criterion`]: tail integrals, criterion factor, singleton capacity sign
//! - [`capacity`]: closed-form radial capacities and normalization constants
//! - [`finsler`]: polar grids, gradient norms, discrete p-energy, grid distances
//! - [`solver`]: convex minimization of the discrete p-energy
//! - [`green`]: the explicit Green-function family and its witnesses
//! - [`harnack`]: iterated Harnack constants and oscillation decay
//! - [`io`], [`report`], [`cli`]: file formats, bundled reports, command line

pub mod capacity;
pub mod cli;
pub mod criterion;
pub mod error;
pub mod finsler;
pub mod green;
pub mod harnack;
pub mod io;
pub mod quad;
pub mod report;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
