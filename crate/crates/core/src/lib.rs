//! Numerical laboratory for a Lagrangian incompressible fluid coupled to a
//! variable-coefficient wave equation across a dissipative interface.

pub mod compat;
pub mod config;
pub mod coupled;
pub mod diagnostics;
pub mod discretization;
pub mod error;
pub mod fem;
pub mod fields;
pub mod fluid;
pub mod mesh;
pub mod metric;
pub mod mms;
pub mod output;
pub mod poly;
pub mod quadrature;
pub mod simulation;
pub mod sparse;
pub mod wave;

pub use error::{FsiError, Result};
