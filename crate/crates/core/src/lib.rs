//! Design-space exploration for millimeter-wave transmitter arrays.
//!
//! Compares digital (DA), sub-array (SA) and fully-connected hybrid (FH)
//! transmitters on spectral efficiency, DAC and phase-shifter precision,
//! and the power and silicon area of their circuit blocks.

pub mod channel;
pub mod cli;
pub mod dump;
pub mod error;
pub mod evaluation;
pub mod hardware;
pub mod linalg;
pub mod plot;
pub mod link_budget;
pub mod precoding;
pub mod quantization;
pub mod rng;

pub use error::{Error, Result};
