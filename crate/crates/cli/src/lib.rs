//! Command implementations behind the `toxscore` binary, plus the two
//! real-time scoring surfaces: a line-oriented REPL and an HTTP service.

pub mod pipeline;
pub mod repl;
pub mod server;

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Environment variable that replaces `--model` wherever a bundle is read.
pub const MODEL_ENV: &str = "TOXSCORE_MODEL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
    Trace,
}

impl LogLevel {
    pub fn filter(self) -> log::LevelFilter {
        match self {
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warn => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
            LogLevel::Trace => log::LevelFilter::Trace,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppConfig {
    pub model_path: PathBuf,
    pub host: String,
    pub port: u16,
    pub limit_rows: Option<usize>,
    pub seed: u64,
    pub log_level: LogLevel,
}

impl AppConfig {
    pub fn validate(&self) -> Result<(), UsageError> {
        if self.port == 0 {
            return Err(UsageError("port must be in 1..=65535".into()));
        }
        Ok(())
    }
}

/// An error that maps to exit code 2: bad arguments or a missing input file.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn require_file(path: &Path) -> Result<(), UsageError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(UsageError(format!("file not found: {}", path.display())))
    }
}

/// The bundle path to use: `TOXSCORE_MODEL` when set, else the flag.
pub fn resolve_model_path(flag: Option<PathBuf>) -> Result<PathBuf, UsageError> {
    match std::env::var_os(MODEL_ENV) {
        Some(p) if !p.is_empty() => Ok(PathBuf::from(p)),
        _ => flag.ok_or_else(|| UsageError(format!("no model given: pass --model or set {MODEL_ENV}"))),
    }
}

/// Display-only score bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bands {
    /// Scores below this are `low`.
    pub low: f64,
    /// Scores at or above this are `high`.
    pub high: f64,
}

impl Default for Bands {
    fn default() -> Self {
        Self { low: 0.3, high: 0.6 }
    }
}

impl Bands {
    pub fn new(low: f64, high: f64) -> Result<Self, UsageError> {
        if !(low.is_finite() && high.is_finite() && low <= high) {
            return Err(UsageError(format!("band thresholds must satisfy low <= high, got {low} and {high}")));
        }
        Ok(Self { low, high })
    }

    pub fn label(&self, score: f64) -> &'static str {
        if score < self.low {
            "low"
        } else if score >= self.high {
            "high"
        } else {
            "medium"
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_edges() {
        let b = Bands::default();
        assert_eq!(b.label(0.2999), "low");
        assert_eq!(b.label(0.3), "medium");
        assert_eq!(b.label(0.5999), "medium");
        assert_eq!(b.label(0.6), "high");
        assert_eq!(b.label(-1.0), "low");
        assert!(Bands::new(0.7, 0.2).is_err());
    }

    #[test]
    fn port_zero_rejected() {
        let cfg = AppConfig {
            model_path: "m.toxb".into(),
            host: "127.0.0.1".into(),
            port: 0,
            limit_rows: None,
            seed: 42,
            log_level: LogLevel::Info,
        };
        assert!(cfg.validate().is_err());
    }
}
