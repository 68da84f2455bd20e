//! Covariance-mismatch-robust detection and power allocation for a
//! monostatic integrated sensing and communication (ISAC) base station.

// `!(x > 0.0)` guards reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod detectors;
pub mod error;
pub mod powalloc;
pub mod randmat;
pub mod specfun;

pub use error::{Error, Result};
