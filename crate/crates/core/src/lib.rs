//! Learned probabilistic, geometric and joint constellation shaping.
//!
//! A transmitter made of an SNR-conditioned symbol distribution and a
//! trainable constellation is trained end to end with a neural demodulator
//! through a stochastic channel, and evaluated with exact mutual-information
//! oracles against classical baselines.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod autodiff;
pub mod baselines;
pub mod channel;
pub mod demodulator;
pub mod diagnostics;
mod error;
pub mod export;
pub mod modulator;
pub mod objectives;
pub mod sampler;
pub mod trainer;

pub use error::{Error, Result};
