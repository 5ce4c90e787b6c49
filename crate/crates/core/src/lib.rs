#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bf;
pub mod error;
pub mod linalg;
pub mod rng;
pub mod sim;
pub mod special;
pub mod verify;
pub mod wchisq;

pub use error::{Error, Result};
