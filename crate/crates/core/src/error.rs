//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("position {pos} out of range 1..={n}")]
    PositionOutOfRange { pos: u64, n: u64 },

    #[error("position set must be non-empty")]
    BadPositionSet,

    #[error("text length {n} exceeds supported maximum {limit}")]
    TextTooLarge { n: u64, limit: u64 },

    #[error("required modulus {required} exceeds supported range (max prime {limit})")]
    ModulusRange { required: u128, limit: u128 },

    #[error("alphabet bound {sigma} exceeds modulus {p}")]
    AlphabetTooWide { sigma: u64, p: u128 },

    #[error("inconsistent fingerprint lengths: |u|={lu}, |v|={lv}, |w|={lw}")]
    FingerprintLengths { lu: u64, lv: u64, lw: u64 },

    #[error("{what} {value} not aligned for round {r} (block length {g})")]
    NotAligned { r: u32, g: u32, what: &'static str, value: u64 },

    #[error("{0}")]
    Invalid(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}

pub type Result<T> = std::result::Result<T, Error>;
