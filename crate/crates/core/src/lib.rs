// Tensor code indexes components directly; NaN-rejecting comparisons are deliberate.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod catalog;
pub mod cli;
pub mod config;
pub mod diffgeo;
pub mod effective;
pub mod error;
pub mod field;
pub mod jet;
pub mod lbfgs;
pub mod banded;
pub mod bending;
pub mod metric;
pub mod nematic;
pub mod scaling;
pub mod stencil;

pub use error::{Error, Result};
