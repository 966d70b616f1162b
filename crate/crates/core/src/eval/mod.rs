//! Error-rate estimation, reference systems and waveform export.

pub mod baselines;
pub mod export;
pub mod ffe;
pub mod pam;
pub mod rates;

pub use rates::{distance_sweep, estimate_rates, SweepRecord};
