//! Harness library behind the `otfsim` binary: configuration, seeded
//! Monte Carlo BER sweeps, SINR validation runs, complexity reports, and
//! self-tests, all emitting reproducible CSV.

pub mod config;
pub mod report;
pub mod selftest;
pub mod sweep;

use thiserror::Error;

/// Harness failures, mapped to process exit codes by the binary.
#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad configuration file, flag, or parameter combination (exit 1).
    #[error("configuration error: {0}")]
    Config(String),
    /// Numerical failure during a run (exit 2).
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// One or more self-test suites failed (exit 3).
    #[error("{0} self-test suite(s) failed")]
    Selftest(usize),
    /// I/O failure writing results (exit 2).
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Numerical(_) | HarnessError::Io(_) => 2,
            HarnessError::Selftest(_) => 3,
        }
    }
}

impl From<otfsim_core::Error> for HarnessError {
    fn from(e: otfsim_core::Error) -> Self {
        match e {
            otfsim_core::Error::InvalidConfig(msg) => HarnessError::Config(msg),
            other => HarnessError::Numerical(other.to_string()),
        }
    }
}

/// Render a float with 10 significant digits, the fixed CSV convention.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.9e}")
}
