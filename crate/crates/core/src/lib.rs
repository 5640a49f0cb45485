#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod control;
pub mod delta;
pub mod error;
pub mod export;
pub mod leitmann;
pub mod oracle;
pub mod quadrature;
pub mod timescale;
pub mod variational;
pub mod verify;

pub use error::{Error, Result};
