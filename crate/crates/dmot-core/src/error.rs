use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    // --- metric ingestion ---
    #[error("points {0} and {1} are at distance zero")]
    DuplicatePoint(usize, usize),
    #[error("matrix is asymmetric at ({0}, {1})")]
    AsymmetricMatrix(usize, usize),
    #[error("negative or non-finite distance at ({0}, {1})")]
    NegativeDistance(usize, usize),
    #[error("triangle inequality violated on triple ({0}, {1}, {2})")]
    TriangleViolation(usize, usize, usize),
    #[error("invalid point id {0}")]
    InvalidId(usize),
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("inconsistent input: {0}")]
    MalformedInput(String),

    // --- partition configuration ---
    #[error("inadmissible partition config: {0}")]
    ConfigInadmissible(String),
    #[error("invalid level {0}")]
    InvalidLevel(i64),

    // --- tries ---
    #[error("key {key} outside universe of {bits} bits")]
    KeyOutOfUniverse { key: u64, bits: u32 },

    // --- tree queries ---
    #[error("invalid node id {0}")]
    InvalidNode(usize),
    #[error("invalid point id {0}")]
    InvalidPoint(usize),
    #[error("no meeting at or above level {0} on this root walk")]
    NoMeetingAbove(i64),
    #[error("invalid level range [{0}, {1}]")]
    InvalidRange(i64, i64),

    // --- extraction / applications ---
    #[error("empty query set")]
    EmptyQuery,
    #[error("point {0} is not part of the preprocessed ground set")]
    UnknownPoint(usize),
    #[error("pair endpoint {0} is not in the query set")]
    EndpointNotInQuery(usize),
    #[error("center count {0} out of range")]
    InvalidR(usize),
    #[error("no facilities given")]
    NoFacilities,
    #[error("spanner is disconnected (internal error)")]
    DisconnectedSpanner,

    // --- dynamic MST ---
    #[error("point set is empty")]
    EmptyX,
    #[error("point {0} already present")]
    AlreadyPresent(usize),
    #[error("point {0} not present")]
    NotPresent(usize),

    // --- persistence ---
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("checksum mismatch: stored {stored:#x}, computed {computed:#x}")]
    ChecksumMismatch { stored: u64, computed: u64 },
    #[error("unsupported format version {0}")]
    VersionUnsupported(u16),
    #[error("file truncated or malformed: {0}")]
    Truncated(String),
}

pub type Result<T> = std::result::Result<T, Error>;
