//! Monotone finite-difference discretisations of divergence-form elliptic
//! operators with discontinuous coefficients.

pub mod coeff;
pub mod embed;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod operator;
pub mod problems;
pub mod quad;
pub mod rhs;
pub mod solver;
pub mod stencil;
pub mod study;

pub use error::{Error, Result};
