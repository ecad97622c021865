//! Error type shared across the crate.

use std::fmt;

#[derive(Debug)]
pub enum Error {
    /// A vector or matrix did not match the instance shape (wrong length, bad
    /// device id, ...).
    Shape(String),
    /// A transmission plan was malformed (empty combination, splitting a
    /// vector that cannot be split, ...).
    InvalidPlan(String),
    /// Bad scenario, experiment config, or CLI arguments. Exit code 2.
    Config(String),
    /// A run exceeded its slot cap; signals a scheduler bug. Exit code 3.
    Runaway { slots: u32, cap: u32 },
    /// A hard invariant failed at runtime. Exit code 3.
    Invariant(String),
    /// Instance too large for the exhaustive search.
    TooLarge(String),
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(msg) => write!(f, "shape mismatch: {msg}"),
            Error::InvalidPlan(msg) => write!(f, "invalid plan: {msg}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Runaway { slots, cap } => {
                write!(f, "run did not terminate after {slots} slots (cap {cap})")
            }
            Error::Invariant(msg) => write!(f, "invariant violation: {msg}"),
            Error::TooLarge(msg) => write!(f, "instance too large: {msg}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl Error {
    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::TooLarge(_) => 2,
            Error::Runaway { .. } | Error::Invariant(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
