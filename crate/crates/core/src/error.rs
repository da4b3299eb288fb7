use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Domain(String),
    #[error("drive is not finite at t = {t}")]
    NonFiniteDrive { t: f64 },
    #[error("time grid: {0}")]
    Grid(String),
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("truncation too small: tail weight {tail:e} at t = {t} exceeds {tolerance:e}")]
    Truncation { t: f64, tail: f64, tolerance: f64 },
    #[error("no Krylov complexity at a pole of the chart (t = {t})")]
    Pole { t: f64 },
    #[error("unitarity defect {defect:e} at t = {t}")]
    Unitarity { t: f64, defect: f64 },
    #[error("sector {index}: {source}")]
    Sector {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub fn in_sector(self, index: usize) -> Self {
        Error::Sector {
            index,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
