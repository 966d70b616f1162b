//! Reverse-mode differentiation over the handful of operations the
//! transceiver graph needs: dense layers, ReLU/clipping/softmax activations,
//! cross-entropy, unitary DFTs, constant complex multipliers, square-law
//! detection and additive noise.

pub mod fft;
mod gradcheck;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, relative_error, GradCheckReport, REL_ERROR_FLOOR};
pub use rustfft::num_complex::Complex64;
pub use tape::{Grads, Parameter, Tape, Var, PROB_FLOOR};
pub use tensor::{Data, Kind, Tensor};
