use alloc::string::String;

use crate::dataset::ImageShape;

/// Everything that can go wrong inside the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid image shape {height}x{width}x{channels} (channels must be 1 or 3)")]
    InvalidShape {
        height: usize,
        width: usize,
        channels: usize,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("image shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch {
        expected: ImageShape,
        found: ImageShape,
    },
    #[error("pixel value {value} in row {row} is outside [0, 1]")]
    PixelOutOfRange { row: usize, value: f64 },
    #[error("image set must contain at least one image")]
    EmptySet,
    #[error("{expected} ids supplied for {found} rows")]
    IdCount { expected: usize, found: usize },
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
    #[error("split fraction {fraction} leaves one side empty for n = {n}")]
    EmptySplit { n: usize, fraction: f64 },
    #[error("rank {rank} outside 1..={max}")]
    RankOutOfRange { rank: usize, max: usize },
    #[error("data has zero total variance")]
    DegenerateData,
    #[error("nearest-neighbour search needs at least one target")]
    EmptyTargets,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("iteration {iteration}: only {found} best buddies, need at least {required}")]
    TooFewBuddies {
        iteration: usize,
        found: usize,
        required: usize,
    },
    #[error("least-squares system is rank deficient; add a ridge")]
    RankDeficient,
    #[error("pairing is empty")]
    EmptyPairing,
    #[error("pair ({a}, {b}) is out of range or repeats an index")]
    InvalidPair { a: usize, b: usize },
    #[error("ids do not align at row {row}: `{pred}` vs `{target}`")]
    IdMismatch {
        row: usize,
        pred: String,
        target: String,
    },
    #[error("image {height}x{width} is smaller than the {window}x{window} SSIM window")]
    ImageTooSmall {
        height: usize,
        width: usize,
        window: usize,
    },
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("need at least 2 paired samples, found {0}")]
    TooFewPairs(usize),
    #[error("matrix is not orthogonal: |QtQ - I|_F = {0:e}")]
    NotOrthogonal(f64),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
