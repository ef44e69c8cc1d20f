//! Tail stratified sampling for rare-event reliability analysis.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmarks;
pub mod designpoint;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod limit_state;
pub mod model;
pub mod probmath;
pub mod sampling;
pub mod stratification;
pub mod sus;

pub use error::{Error, Result};
