//! Numerical verification lab for a Clifford-Wolf homogeneous quotient of
//! Sp(2) under a deformed left-invariant metric.

pub mod ck;
pub mod config;
pub mod error;
pub mod geodesy;
pub mod harness;
pub mod linalg;
pub mod metric;
pub mod quat;
pub mod report;
pub mod rng;
pub mod so7;
pub mod sp2;

pub use error::{Error, Result};
