//! Weighted spaces of holomorphic functions on the polydisk and the
//! Toeplitz, Hankel and Berezin operators acting on them.

pub mod error;
pub mod operators;
pub mod probes;
pub mod pseries;
pub mod quad;
pub mod special;
pub mod weights;

pub use error::{Error, Result};
pub use num_complex::Complex64;
