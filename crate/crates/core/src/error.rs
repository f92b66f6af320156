use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid cavity parameters: {0}")]
    InvalidParams(String),

    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("grid spacing {spacing:e} is too coarse for gamma = {gamma:e} (limit {limit:e})")]
    GridTooCoarse { spacing: f64, gamma: f64, limit: f64 },

    #[error("offset grid half-span {half_span:e} is narrower than the required {required:e}")]
    GridTooNarrow { half_span: f64, required: f64 },

    #[error("empty comb range [{m_min}, {m_max}]")]
    EmptyCombRange { m_min: i32, m_max: i32 },

    #[error("invalid sample model: {0}")]
    InvalidSample(String),

    #[error("value {value} outside domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("spectrum cannot be normalized (integral {0:e})")]
    CannotNormalize(f64),

    #[error("low statistics: {counts} counts in mode {mode} bin (need at least {required})")]
    LowStatistics { mode: i32, counts: u64, required: u64 },

    #[error("invalid spectrometer: {0}")]
    InvalidSpectrometer(String),
}
