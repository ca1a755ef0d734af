use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntervalError {
    #[error("interval endpoints must be finite, got [{start}, {end}]")]
    NonFinite { start: f64, end: f64 },
    #[error("interval endpoints must be non-negative, got [{start}, {end}]")]
    Negative { start: f64, end: f64 },
    #[error("interval start exceeds end: [{start}, {end}]")]
    Reversed { start: f64, end: f64 },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("alpha must be a finite non-negative number, got {0}")]
    Alpha(f64),
    #[error("beta must lie in [0, 1], got {0}")]
    Beta(f64),
    #[error("timestamp tolerance must be finite and non-negative, got {0}")]
    Tolerance(f64),
    #[error("unknown config keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("invalid simulation parameter: {0}")]
    Simulation(String),
    #[error("failed to read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("group advantages need at least two rewards, got {0}")]
    DegenerateGroup(usize),
    #[error("rollouts and advantages differ in length ({rollouts} vs {advantages})")]
    LengthMismatch { rollouts: usize, advantages: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("no evaluation records")]
    Empty,
    #[error("IoU threshold must lie in (0, 1], got {0}")]
    Threshold(f64),
}
