//! Discrete Sobolev extension laboratory.
//!
//! Finite metric measure spaces built from grids, Whitney coverings and the
//! partition-of-unity extension operators built on them, Hajłasz gradients and
//! the sharp functional, Schauder truncations and Lipschitz approximants, and
//! Poincaré constant estimation.

pub mod approx;
pub mod cli;
pub mod domains;
pub mod error;
pub mod extension;
pub mod gradients;
pub mod norms;
pub mod poincare;
pub mod space;
pub mod whitney;

pub use error::{Error, Result};

/// Library version embedded in every artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
