//! Reconstruction of a spatial heat source in the 1-D heat equation with
//! dynamic boundary conditions from final-time measurements.

pub mod adjoint;
pub mod artifacts;
pub mod error;
pub mod experiment;
pub mod field;
pub mod forward;
pub mod landweber;
pub mod objective;
pub mod tridiag;
pub mod verification;

pub use error::{Error, Result};
