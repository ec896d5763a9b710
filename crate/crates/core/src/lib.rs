//! Exact computations with higher-order derivations, multilinear differential
//! operators, operad multifiltrations and deformation brackets.
//!
//! Everything is computed over the rationals with arbitrary-precision
//! integers. Algebras are truncated at a word-length bound and every order
//! certificate records the window in which it was checked.

pub mod brackets;
pub mod config;
pub mod diffop;
pub mod graded_poly;
pub mod linalg;
pub mod multifilt;
pub mod operad;
pub mod selftest;

use num_bigint::BigInt;
use num_traits::Zero;

/// Exact rational scalars.
pub type Q = num_rational::BigRational;

pub const DEFAULT_TRUNCATION: usize = 6;
pub const DEFAULT_H_TRUNCATION: usize = 3;
pub const DEFAULT_MAX_ARITY: usize = 5;
pub const SCHEMA: &str = "odlab/1";

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("context mismatch: {0}")]
    ContextMismatch(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("not homogeneous: {0}")]
    NotHomogeneous(String),
    #[error("arguments exceed the exact window: {0}")]
    Truncation(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("antisymmetry violated: {0}")]
    Antisymmetry(String),
    #[error("presentation is not simply connected: {0}")]
    NotSimplyConnected(String),
    #[error("arity {0} exceeds the configured bound {1}")]
    ArityBound(usize, usize),
    #[error("unknown stability bound")]
    UnknownStability,
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Parses `3`, `-7/4` and similar.
pub fn parse_rational(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || Error::Parse(format!("bad rational `{s}`"));
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(Q::new(n, d))
}

pub fn q(n: i64) -> Q {
    Q::from_integer(n.into())
}

pub fn qr(n: i64, d: i64) -> Q {
    Q::new(n.into(), d.into())
}
