use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cover gap at chart {chart}, point {point:?}")]
    CoverGap { chart: usize, point: Vec<f64> },
    #[error("invalid partition: weights sum to {sum} at {point:?}")]
    InvalidPartition { sum: f64, point: Vec<f64> },
    #[error("tube too tight: achieved sup distance {achieved:e}, best ratio {ratio}")]
    TubeTooTight { achieved: f64, ratio: f64 },
    #[error("point {point:?} is outside the overlap of charts {from} and {to}")]
    OutOfOverlap { from: usize, to: usize, point: Vec<f64> },
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("seam mismatch of {deviation:e} at chart {chart}, point {point:?}")]
    SeamMismatch { chart: usize, point: Vec<f64>, deviation: f64 },
    #[error("cover construction failed on chart {chart}, box {region}")]
    CoverConstructionFailed { chart: usize, region: String },
    #[error("neighbourhood W_{j} violated at chart {chart}, point {point:?}")]
    NeighborhoodViolation { j: usize, chart: usize, point: Vec<f64> },
    #[error("homotopy endpoints mismatch at junction {junction}")]
    ConcatMismatch { junction: usize },
    #[error("endpoint section is not smooth: {0}")]
    NotSmoothEndpoints(String),
    #[error("section leaves the fibre chart at chart {chart}, point {point:?}")]
    ChartOverflow { chart: usize, point: Vec<f64> },
    #[error("grid too coarse: angle increment {increment} exceeds pi/2")]
    CoarseResolution { increment: f64 },
    #[error("postcondition ({condition}) failed: {detail}")]
    Postcondition { condition: String, detail: String },
    #[error("step {index}: {source}")]
    Step { index: usize, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;
