//! Numerical laboratory for multilinear Strichartz estimates, joint spectral
//! projector bounds and torus exponential sums on products of spheres and
//! tori.
//!
//! Modules build on each other roughly bottom-up: [`regularity`] is pure
//! exponent arithmetic, [`specialfn`] and [`quadrature`] evaluate and
//! integrate sphere eigenfunctions, [`lattice`] handles frequency sets,
//! [`expsum`] and [`packets`] run the estimates, [`experiments`] fits
//! exponents over sweeps and [`cli`] drives everything from the command line.

// Guards like `!(x > 0.0)` are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod experiments;
pub mod expsum;
pub mod lattice;
pub mod numeric;
pub mod packets;
pub mod quadrature;
pub mod regularity;
pub mod specialfn;

pub use error::{Error, Result};
pub use regularity::{LpExponent, ManifoldSpec, Q};
