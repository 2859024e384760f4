use thiserror::Error;

use crate::sdp::SdpStatus;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A configuration or scenario field failed validation. `path` is a
    /// dotted JSON-style path such as `system.sinr_targets`.
    #[error("invalid value at `{path}`: {message}")]
    InvalidConfig { path: String, message: String },

    #[error("{what} index {index} out of range (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("matrix is not Hermitian (max asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },

    #[error("malformed SDP: {0}")]
    MalformedSdp(String),

    #[error("SDP block of size {size} exceeds the dimension cap {cap}")]
    DimensionCap { size: usize, cap: usize },

    #[error("SINR targets are infeasible for the given phase profile")]
    InfeasibleTargets,

    #[error("no feasible rank-one beamformer recovered (SDR bound {sdr_bound:e})")]
    RandomizationFailed { sdr_bound: f64 },

    #[error("SDP solver failed with status {status:?}")]
    SolverFailure { status: SdpStatus },

    #[error("exhaustive enumeration of {combinations} combinations exceeds cap {cap}")]
    CombinatorialCap { combinations: u128, cap: u128 },
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            path: path.into(),
            message: message.into(),
        }
    }
}
