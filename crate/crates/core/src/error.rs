use std::path::PathBuf;

/// Errors produced by the design-space exploration library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid array geometry: {0}")]
    InvalidGeometry(String),

    #[error("empty or inverted angle range [{lo}, {hi}]")]
    EmptyAngleRange { lo: f64, hi: f64 },

    #[error("invalid array design: {0}")]
    InvalidDesign(String),

    #[error("{groups} sub-array groups cannot be split evenly across {streams} streams")]
    NonIntegerGrouping { groups: usize, streams: usize },

    #[error("effective channel Gram matrix is singular (alpha = {alpha})")]
    SingularEffectiveChannel { alpha: f64 },

    #[error("channel matrix is identically zero")]
    ZeroChannel,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("target SE {target:.3} bps/Hz not reachable: {achieved:.3} bps/Hz at {p_out_dbm:.1} dBm")]
    NotAchievable {
        target: f64,
        achieved: f64,
        p_out_dbm: f64,
    },

    #[error("distribution budget cannot deliver {required_dbm} dBm to the PA input: {reason}")]
    UnreachablePaInput { required_dbm: f64, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed matrix dump: {0}")]
    MalformedDump(String),

    #[error("config error in {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
