//! Entropy-regularized semi-discrete optimal transport.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod applications;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod maps;
pub mod measures;
pub mod solver;

pub use error::{Error, Result};

/// Coordinates in R^d, zero-padded to three components.
pub type Point = [f64; 3];
