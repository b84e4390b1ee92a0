//! Mutual-information optimal post-randomization (PRAM) under α-differential
//! privacy for a single categorical key variable.
//!
//! The retention vector `q` parametrizes a PRAM matrix that keeps category
//! `k` with probability `q_k` and otherwise moves the record uniformly to one
//! of the other `S - 1` categories. The crate builds the linear constraints
//! that make such a matrix α-differentially private, enumerates the vertices
//! of the resulting polytope, picks the vertex maximizing `I(X; Z)`, applies
//! the matrix to microdata, and estimates the original distribution and
//! disclosure risk from the released column.

pub mod dp;
pub mod error;
pub mod inference;
pub mod info;
pub mod mechanism;
pub mod optimizer;
pub mod polytope;
pub mod types;

pub use error::{Error, Result};
pub use types::*;
