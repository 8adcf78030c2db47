//! Certification and numerical analysis of linear port-Hamiltonian boundary
//! control systems on the interval `(0, 1)`.

// Parameter checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod discretize;
pub mod error;
pub mod hybrid;
pub mod linalg;
pub mod model;
pub mod poly;
pub mod presets;
pub mod quadrature;
pub mod report;
pub mod simulate;
pub mod spectral;
pub mod wellposed;

pub use error::{PhsError, Result};
