//! Link-level analytics and Monte Carlo simulation of single-user MISO
//! time-reversal (TR) beamforming and equalized time reversal (ETR) over
//! indoor Rayleigh tapped-delay-line channels.
//!
//! The crate is organized bottom-up:
//!
//! - [`channel`]: power-delay profiles, presets and Rayleigh CIR draws.
//! - [`dsp`]: convolution, arbitrary-length DFT and related kernels.
//! - [`beamformer`]: TR pre-filters, the zero-forcing pre-equalizer and the
//!   end-to-end composite channel seen by a receiver.
//! - [`analytics`]: closed-form power, focusing and error-probability
//!   expressions.
//! - [`sim`]: the Monte Carlo engine measuring BER and power statistics.
//! - [`stream`]: counter-based random streams keyed per realization.

pub mod analytics;
pub mod beamformer;
pub mod channel;
pub mod dsp;
mod error;
pub mod sim;
pub mod stream;

pub use error::{Error, Result};
pub use num_complex::Complex64;
