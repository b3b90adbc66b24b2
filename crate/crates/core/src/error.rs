use thiserror::Error;

use crate::quantize::FixedPointFormat;

/// Which stored array of a region an entry belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataClass {
    H,
    K,
    F,
    G,
}

impl std::fmt::Display for DataClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            DataClass::H => "H",
            DataClass::K => "K",
            DataClass::F => "F",
            DataClass::G => "G",
        };
        f.write_str(s)
    }
}

#[derive(Error, Debug)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed document: {0}")]
    Malformed(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("region {region}: row {row} has a zero normal")]
    ZeroNormal { region: usize, row: usize },

    #[error("region {region} is empty (no witness point found inside the state box)")]
    EmptyRegion { region: usize },

    #[error("region {region}: witness point lies outside the state box")]
    WitnessOutsideBox { region: usize },

    #[error("invalid state box: {0}")]
    InvalidBox(String),

    #[error(
        "continuity violation across facet between regions {i} and {j}: residual {residual:e} at {at:?}"
    )]
    ContinuityViolation {
        i: usize,
        j: usize,
        residual: f64,
        at: Vec<f64>,
    },

    #[error("region index {index} out of range (partition has {count} regions)")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("invalid fixed-point format a={a}, b={b} (need 2 <= a <= 64, 0 <= b <= a-1)")]
    InvalidFormat { a: u32, b: u32 },

    #[error("value {value} overflows format {fmt}")]
    Overflow { value: f64, fmt: FixedPointFormat },

    #[error("region {region}: {class}[{row},{col}] = {value} overflows format {fmt}")]
    RegionOverflow {
        region: usize,
        class: DataClass,
        row: usize,
        col: usize,
        value: f64,
        fmt: FixedPointFormat,
    },

    #[error("state {0:?} lies outside the partition")]
    StateOutsidePartition(Vec<f64>),

    #[error("sample at {x:?}: {source}")]
    SampleFailed {
        x: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// Process exit code: 2 for I/O and parse failures, 1 for domain-rule violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Malformed(_) => 2,
            Error::SampleFailed { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(e.into())
        } else {
            Error::Malformed(e.to_string())
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
