//! End-to-end learned transceivers for intensity-modulation / direct-detection
//! optical fiber links.
//!
//! The transmitter network, a differentiable model of the fiber channel and
//! the receiver network form a single computation graph, trained jointly with
//! Adam on block cross-entropy.
//!
//! * [`autodiff`]: tape-based reverse-mode engine with gradient checking.
//! * [`channel`]: low-pass filters, converter noise, modulator, dispersion,
//!   square-law detection and receiver noise.
//! * [`transceiver`]: message encoding, transmitter/receiver networks, Gray
//!   bit mapping.
//! * [`link`]: transmitter, channel and receiver composed into one chain.
//! * [`training`]: Adam, end-to-end and receiver-only training, validation.
//! * [`eval`]: Monte-Carlo error rates, distance sweeps, PAM/FFE and other
//!   reference systems, waveform and spectrum export.
//! * [`persist`]: model files, run configuration and trace files.
//! * [`cli`]: the `imdd-e2e` command-line front end.

pub mod autodiff;
pub mod channel;
pub mod cli;
pub mod error;
pub mod eval;
pub mod link;
pub mod persist;
pub mod rng;
pub mod training;
pub mod transceiver;

pub use error::{Error, Result};
