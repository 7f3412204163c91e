//! Error type shared by all modules.

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Invalid input for a mathematically defined operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configurable resource cap would be exceeded. Operations never
    /// silently subsample; they fail naming the cap.
    #[error("resource cap exceeded: {what} needs {needed} but cap is {cap}")]
    Resource {
        what: String,
        needed: u128,
        cap: u128,
    },

    /// Operands built over different field contexts.
    #[error("context mismatch: {0}")]
    CtxMismatch(String),

    /// Polynomial text did not conform to the grammar.
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    /// A guarded brute-force search was asked for an instance outside its
    /// hard limits.
    #[error("intractable: {0}")]
    Intractable(String),

    /// The regularization decomposer could not express a low-rank
    /// combination; carries the stuck combination.
    #[error("decomposer stuck at degree {degree}, coefficients {coeffs:?}: {msg}")]
    DecomposerStuck {
        degree: usize,
        coeffs: Vec<u8>,
        msg: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
