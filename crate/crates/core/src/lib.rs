//! Desk-scale computational harmonic analysis on uniform grids: m-linear
//! fractional kernels and their singular integrals, the maximal-function
//! family, Calderon-Zygmund decompositions, Muckenhoupt and multiple
//! weights, and variable-exponent Luxemburg norms.
//!
//! Everything numeric is generic over the scalar type through [`Real`];
//! the `*64` aliases below fix `f64`, which is what the experiment harness
//! uses throughout.

pub mod error;
pub mod czdecomp;
pub mod grid;
pub mod kernel;
pub mod operators;
pub mod real;
pub mod rng;
pub mod sums;
pub mod weights;

pub use error::{CoreError, Result};
pub use real::Real;

/// `f64` concrete aliases for the core types.
pub type Grid64 = grid::Grid<f64>;
pub type BoxDomain64 = grid::BoxDomain<f64>;
pub type GridFunction64 = grid::GridFunction<f64>;
pub type Kernel64 = kernel::Kernel<f64>;
pub type Modulus64 = kernel::Modulus<f64>;
