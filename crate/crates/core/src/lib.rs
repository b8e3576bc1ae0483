//! Gaussian beam superpositions for the wave equation with random speed and
//! initial data, and the localized quadratic quantities of interest built on
//! them.

pub mod beam;
pub mod error;
pub mod exact;
pub mod export;
pub mod fd;
pub mod field;
pub mod model;
pub mod ode;
pub mod qoi;
pub mod quad;
pub mod sweep;

pub use error::{GbError, Result};
