//! Billiard dynamics inside strictly convex planar curves.
//!
//! The crate is `no_std` (with `alloc`) and purely computational: curve
//! geometry, the billiard map and its tangent map, variational search for
//! periodic orbits, monodromy and trace decompositions, invariant manifolds
//! of hyperbolic orbits, constructive curve perturbations, and instability
//! regions with their islands. File formats and the command line live in
//! the `obl` crate.
//!
//! Phase space is the open cylinder of pairs `(phi, theta)`, where `phi` is
//! the tangent angle of the boundary (its angle with the x axis) and `theta`
//! the angle of the outgoing ray measured from the oriented tangent.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod billiard;
pub mod config;
pub mod curve;
mod error;
pub mod genericity;
pub mod manifolds;
pub mod math;
pub mod quadrature;
pub mod regions;
pub mod stability;
pub mod variational;

pub use billiard::{LiftedPhasePoint, PhasePoint, TangentMap};
pub use config::Tolerances;
pub use curve::{CurvePoint, Harmonic, NormalBump, Oval, OvalSpec};
pub use error::{Error, Result};
pub use stability::{OrbitClass, PeriodicOrbit};
