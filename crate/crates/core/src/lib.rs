//! Numerical laboratory for Dirichlet Laplacians on planar waveguides.

pub mod banded;
pub mod cross_section;
pub mod discretize;
pub mod dtn;
pub mod error;
pub mod geometry;
pub mod identities;
pub mod resonance;
pub mod riemann;
pub mod waves;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
