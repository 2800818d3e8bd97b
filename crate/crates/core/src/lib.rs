//! Semiclassical functional calculus on warped ends: exact symbol composition,
//! resolvent parametrices, Helffer–Sjöstrand quadrature on discretized ends and
//! weighted operator-norm probes.

pub mod discrete;
pub mod error;
pub mod funcs;
pub mod geometry;
pub mod norms;
pub mod quad;
pub mod symbol;
pub mod workbench;

pub use error::{Error, Result};
