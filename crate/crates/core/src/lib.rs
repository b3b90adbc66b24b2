//! Fixed-point quantization of explicit-MPC piecewise-affine (PWA) control
//! laws, with rigorous bounds on the resulting control error.
//!
//! The pipeline is: load a partition ([`partition`]), quantize its data and the
//! state to fixed point ([`quantize`]), bound the control error ([`bounds`]),
//! optionally rescale the state first ([`rescale`]), and run sampled
//! experiments ([`harness`]).

pub mod bounds;
pub mod error;
pub mod fixtures;
pub mod harness;
pub mod norms;
pub mod partition;
pub mod quantize;
pub mod rescale;

pub use error::{Error, Result};
