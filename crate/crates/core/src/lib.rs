//! Synthesis and verification of alternating square-pulse control protocols
//! for finite-dimensional quantum systems.

pub mod error;
pub mod model;
pub mod numkernel;
pub mod propagator;
pub mod simulator;
pub mod synthesis;
pub mod analysis;
pub mod cli;
pub(crate) mod serde_complex;

pub use error::{Error, Result};
