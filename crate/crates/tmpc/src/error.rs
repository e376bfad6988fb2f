use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed model or tensor container (bad magic, truncated blob, unknown op, ...).
    #[error("container error: {0}")]
    Container(String),

    /// Graph-level validation failure (dangling inputs, bad attributes, arity).
    #[error("validation error: {0}")]
    Validation(String),

    /// Tensor shape mismatch detected during shape inference or evaluation.
    #[error("shape error: {0}")]
    Shape(String),

    /// Fixed-point overflow: a quantized magnitude left the 2^62 guard band.
    #[error("overflow error: {0}")]
    Overflow(String),

    /// Protocol-level failure: desync, handshake mismatch, stream reuse.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// Network failure: timeout, connection reset, unreachable peer.
    #[error("network error: {0}")]
    Network(String),

    /// Command-line usage error (missing/inconsistent flags).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 0 success, 2 usage, 3 validation,
    /// 4 protocol/network, 5 overflow.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Container(_) | Error::Validation(_) | Error::Shape(_) | Error::Json(_) => 3,
            Error::Protocol(_) | Error::Network(_) | Error::Io(_) => 4,
            Error::Overflow(_) => 5,
        }
    }
}
