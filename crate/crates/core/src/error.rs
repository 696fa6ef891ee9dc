use thiserror::Error;

/// Errors surfaced by the simulator core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate qubit label {0} in register")]
    DuplicateQubit(crate::quantum::QubitId),

    #[error("qubit {0} is not part of this register")]
    UnknownQubit(crate::quantum::QubitId),

    #[error("registers do not match: expected the same qubit labels in the same order")]
    RegisterMismatch,

    #[error("amplitude array length {got} is not 2^{qubits}")]
    BadAmplitudeCount { got: usize, qubits: usize },

    #[error("state norm {norm} differs from 1 beyond tolerance")]
    NotNormalized { norm: f64 },

    #[error("matrix is not unitary: max |U†U - I| entry is {deviation:.3e}")]
    NotUnitary { deviation: f64 },

    #[error("rotation parameters not normalized: alpha^2 + beta^2 = {norm}")]
    BadRotation { norm: f64 },

    #[error("swap registers must have the same nonzero length (got {len_a} and {len_b})")]
    RegisterLengthMismatch { len_a: usize, len_b: usize },

    #[error("qubits passed to a multi-qubit gate must be distinct")]
    OverlappingRegisters,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("pair {index} of source {origin} was already consumed by {consumer}")]
    PairConsumed {
        origin: crate::protocol::Source,
        index: usize,
        consumer: &'static str,
    },

    #[error("no diagonal-control trials recorded for reference {0}; cannot estimate")]
    InsufficientData(crate::protocol::Reference),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
