//! Quasi-static evolution of edge dislocations confined to horizontal slip
//! planes in a bounded two-dimensional elastic body.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernels`] evaluates the single-dislocation strain fields and the
//!   stress action of the isotropic elasticity tensor.
//! * [`interaction`] computes the pair interaction potential on the bounded
//!   domain and the discrete and continuum interaction energies.
//! * [`corrector`] minimises the boundary-corrector functional with a Ritz
//!   polynomial space and assembles the total energy.
//! * [`transport`] implements the slip-plane-confined transport distance and
//!   its relaxations.
//! * [`evolution`] runs the incremental minimisation scheme and its
//!   diagnostics.
//! * [`recovery`] builds admissible discrete approximations of limit
//!   measures.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod corrector;
pub mod error;
pub mod evolution;
pub mod geometry;
pub mod interaction;
pub mod kernels;
pub mod material;
pub mod measure;
pub mod quadrature;
pub mod recovery;
pub mod transport;

pub use config::{DislocationConfig, ScalingSchedule};
pub use error::{Error, Result};
pub use geometry::{Disk, Geometry, Rect};
pub use material::Material;

/// A point or vector in the plane.
pub type Point = nalgebra::Vector2<f64>;
/// A real 2×2 matrix (strains, stresses).
pub type Matrix2 = nalgebra::Matrix2<f64>;

/// Shorthand constructor for a [`Point`].
#[inline]
pub fn pt(x: f64, y: f64) -> Point {
    Point::new(x, y)
}
