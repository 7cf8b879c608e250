//! Minimal reverse-mode automatic differentiation.
//!
//! Just enough machinery to train the small convolutional networks in this
//! workspace: dense f32 tensors, a [`tape::Tape`] that records one forward
//! pass as a flat topologically ordered list, reverse accumulation, and Adam.
//! There is no broadcasting, no views, no graph reuse: every training
//! iteration builds a fresh tape, which keeps lifetimes and correctness easy
//! to reason about at the sizes involved.
//!
//! Conventions that matter:
//! * `conv2d` is cross-correlation (the deep-learning convention), NCHW.
//! * Reductions (`sum`, `mean`) accumulate in f64 and round once at the end.
//! * Every op validates shapes and checks its output for NaN/Inf; a
//!   non-finite value is a hard error carrying the op name.

pub mod adam;
pub mod error;
pub mod tape;
pub mod tensor;
pub mod wts;

pub use adam::{AdamParams, ParamId, ParamStore};
pub use error::AdError;
pub use tape::{NodeId, Tape};
pub use tensor::Tensor;

pub type Result<T> = std::result::Result<T, AdError>;
