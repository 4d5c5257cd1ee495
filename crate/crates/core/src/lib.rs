//! Nodal sets of Laplacian eigenfunctions on the flat torus `T^2 = R^2 / Z^2`.
//!
//! The crate builds exact eigenfunctions from lattice points on circles,
//! samples them on periodic grids, extracts their nodal lines, and measures
//! how nodal length and `L^2` mass distribute over small balls.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod balls;
pub mod cover;
pub mod doubling;
pub mod eigen;
pub mod error;
pub mod growth;
pub mod harness;
pub mod nodal;
pub mod report;
pub mod svg;
pub mod testfn;
pub mod torus;

pub use error::{Error, Result};
