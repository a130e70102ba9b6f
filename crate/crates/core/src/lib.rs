// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amalgam;
pub mod comparison;
pub mod error;
pub mod frame;
pub mod group;
pub mod hap;
pub mod hilbert;
pub mod linalg;
pub mod report;

pub use error::{Error, Result};
