// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equivariant;
pub mod error;
pub mod fit;
pub mod operator;
pub mod par;
pub mod povm;
pub mod quantization;
pub mod smearing;
pub mod sphere;
pub mod unsharpness;

pub use error::{Error, Result};
