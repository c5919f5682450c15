// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fdm;
pub mod forward;
pub mod inverse;
mod hash;
pub mod linalg;
pub mod mesh;
pub mod scenarios;
pub mod sensitivity;

pub use error::{Error, Result};
pub use hash::sha256_hex;
