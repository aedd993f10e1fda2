#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analytic;
pub mod channel;
pub mod error;
pub mod feedback;
pub mod goodput;
pub mod montecarlo;
pub mod quadrature;
pub mod scheduler;
pub mod specfun;
pub mod summation;

pub use error::{Error, Result};
