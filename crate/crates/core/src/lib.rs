//! Simulator and security calculator for frequency-time coded quantum key
//! distribution.
//!
//! Photons carry a key either in their center frequency or in their arrival
//! time. The crate models the sources (prepare-and-measure pulses and
//! energy-time entangled pairs), the fiber link, the detectors and the
//! dispersive frequency measurement, then turns matched-basis readings into
//! bits with mod-√π distillation and evaluates the resulting QBER and key
//! rate.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod distillation;
pub mod error;
pub mod measurement;
pub mod optics;
pub mod rng;
pub mod security;
pub mod session;
pub mod stats;
pub mod units;

pub use error::{Error, Result};
