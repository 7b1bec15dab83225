//! Probe-threshold post-selection: empirical selection over traces, the
//! analytic model of the selected statistics, and threshold optimization.

mod keyrate;
mod model;
pub mod search;
mod selection;
mod trace;

pub use keyrate::{binary_entropy, key_rate, QBER_SECURITY_LIMIT};
pub use model::{ModelInputs, OptimalThreshold, PredictionCurve, SearchRange};
pub use selection::SelectionOutcome;
pub use trace::{PacketRecord, Trace, DEFAULT_PACKET_DURATION};
