//! Adaptive real-time selection for QKD over turbulent free-space links.
//!
//! A bright probe beam shares the path of the quantum signal, so its received
//! amplitude tracks the instantaneous channel transmissivity. Keeping only the
//! packets whose probe exceeds a threshold discards low-transmission slots
//! that are dominated by background clicks, trading sifted bits for a lower
//! QBER. This crate provides:
//!
//! - [`fading`]: the log-normal scintillation model (survival integrals,
//!   sampling, maximum-likelihood fit)
//! - [`arts`]: empirical selection over traces, the analytic predictions of
//!   the selected statistics, asymptotic BB84 rate and threshold optimization
//! - [`channel`]: Monte Carlo traces with Poisson detections and background
//! - [`strategies`]: count-threshold and no-selection baselines and the
//!   strategy comparison sweep
//! - [`trace_io`]: CSV trace files and JSON result documents
//! - [`cli`]: the `arts` command-line front end

// `!(x > 0.0)` is how validation rejects NaN alongside out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arts;
pub mod channel;
pub mod cli;
mod error;
pub mod fading;
pub mod strategies;
pub mod trace_io;

pub use arts::{
    binary_entropy, key_rate, ModelInputs, OptimalThreshold, PacketRecord, PredictionCurve,
    SearchRange, SelectionOutcome, Trace, QBER_SECURITY_LIMIT,
};
pub use channel::{ChannelSpec, Correlation};
pub use error::{Error, Result};
pub use fading::{sigma_sq_from_moments, LognormalFade};
