use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("rank deficient generator matrix (rank {rank}, expected {expected})")]
    RankDeficient { rank: usize, expected: usize },
    #[error("enumeration too large: {0}")]
    TooLarge(String),
    #[error("decoder {decoder} cannot decode a {code} construction")]
    Incompatible { decoder: String, code: String },
    #[error("target BLER {target} not reached in [{lo_db}, {hi_db}] dB: {detail}")]
    Unreachable {
        target: f64,
        lo_db: f64,
        hi_db: f64,
        detail: String,
    },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("stale forward cache (params version {params}, cache version {cache})")]
    StaleCache { params: u64, cache: u64 },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
