//! Joint transmit beamforming and reflecting-surface phase optimization.

pub mod alt_opt;
pub mod beamforming;
pub mod channel_model;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod phase;
pub mod rng;
pub mod scenario;
pub mod sdp;
pub mod sinr_metrics;

pub use error::{Error, Result};
