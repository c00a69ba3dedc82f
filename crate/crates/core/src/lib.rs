//! Entanglement detection for states carrying at most a few excitations spread
//! over several optical modes.
//!
//! The witness is the variance of outcome probabilities when the single-excitation
//! part of a state is projected onto a W-like basis. Separable and biseparable
//! states cannot push the variance below class-specific boundary curves, so a
//! measured variance below a curve certifies entanglement of the corresponding
//! depth.

pub mod atlas;
pub mod certify;
pub mod error;
pub mod families;
pub mod fock;
pub mod numeric;
pub mod optics;
pub mod seeds;
pub mod witness;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Version string embedded into generated files.
pub const TOOL_VERSION: &str = concat!("wmode ", env!("CARGO_PKG_VERSION"));
