//! Thermomechanical low-cycle fatigue reliability and shape optimization.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod diagnose;
pub mod elasticity;
pub mod error;
pub mod expr;
pub mod fem;
pub mod fields;
pub mod geometry;
pub mod material;
pub mod optimize;
pub mod reliability;
pub mod roots;
pub mod thermal;

pub use error::{Error, Result};
