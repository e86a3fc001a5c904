use std::fmt;

use thiserror::Error;

/// One violated configuration invariant, keyed by the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("missing key: {0}")]
    MissingKey(String),
    #[error("unknown key: {0}")]
    UnknownKey(String),
    #[error("duplicate key: {0}")]
    DuplicateKey(String),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{key}: cannot parse {value:?}")]
    BadValue { key: String, value: String },
}

impl ConfigError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ConfigError::Invalid(v) => v,
            _ => &[],
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

/// Problems with a `TTG1` time-tag file or with a stream's invariants.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic {0:?}, expected \"TTG1\"")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("{0} trailing bytes after payload")]
    TrailingData(u64),
    #[error("tags not strictly increasing at index {0}")]
    Unsorted(usize),
    #[error("tag out of window: {tag} >= duration {duration_ps} ps")]
    TagOutOfWindow { tag: u64, duration_ps: u64 },
}

/// Violated preconditions of the analysis routines.
#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("bin width must be positive")]
    ZeroBinWidth,
    #[error("bin width {bin_width_ps} ps exceeds window {duration_ps} ps")]
    BinWiderThanWindow { bin_width_ps: u64, duration_ps: u64 },
    #[error("mismatched durations: {0} ps vs {1} ps")]
    MismatchedDuration(u64, u64),
    #[error("mismatched bin widths: {0} ps vs {1} ps")]
    MismatchedBinWidth(u64, u64),
    #[error("mismatched series lengths: {0} vs {1}")]
    MismatchedLength(usize, usize),
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("shift {shift} out of range for series of length {len}")]
    ShiftOutOfRange { shift: i64, len: usize },
    #[error("tau range {tau_range} must be below half the series length {len}")]
    TauRangeTooLarge { tau_range: u64, len: usize },
    #[error("insufficient singles")]
    InsufficientSingles,
    #[error("no sweep points below the dark-floor threshold of {0} Hz")]
    NoDarkPoints(f64),
    #[error("no sweep point lies within the allowed deviation from the shot-noise reference")]
    NoCompliantPoints,
    #[error("sweep must be sorted by ascending flux")]
    UnsortedSweep,
    #[error("insufficient sweep: {0} point(s), need at least 2")]
    InsufficientSweep(usize),
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("empty flux list")]
    EmptyFluxList,
}

/// Umbrella error for callers that drive whole pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
