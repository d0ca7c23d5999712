use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("code table: {0}")]
    Table(String),
    #[error("invalid cell configuration: {0}")]
    Config(String),
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("odd bit count {0} cannot be QPSK mapped")]
    OddLength(usize),
    #[error("payload length must be at least 1")]
    EmptyPayload,
    #[error("unsupported turbo block size {0}")]
    UnsupportedBlockSize(usize),
    #[error("no cell found (quality {quality:.2} below threshold)")]
    NoCell { quality: f64 },
    #[error("secondary sync decision ambiguous (margin {margin:.3})")]
    SssAmbiguous { margin: f64 },
    #[error("MIB CRC failed on all four phases")]
    MibFailure,
    #[error("CRC check failed: {0}")]
    Crc(String),
    #[error("RNTI {0:#06x} outside the C-RNTI range")]
    RntiRange(u16),
    #[error("scheduling error at subframe {abs_sf}: {detail}")]
    Schedule { abs_sf: u32, detail: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
