//! Core image primitives for the degforge pipeline.
//!
//! Everything downstream (kernel estimation, dataset synthesis, domain
//! analytics, NIQE) is built on the handful of types defined here: planar
//! float rasters in `[0, 1]`, explicit 2-D kernels with a bit-exact text
//! format, true convolution with pinned border semantics, exact-size centered
//! DFT magnitudes, and deterministic seed derivation. All randomness anywhere
//! in the workspace flows through [`seed::derive_seed`] and a counter-based
//! stream cipher RNG, so repeated runs are byte-identical.

pub mod codec;
pub mod error;
pub mod kernel;
pub mod metrics;
pub mod ops;
pub mod parallel;
pub mod patches;
pub mod raster;
pub mod resize;
pub mod seed;
pub mod spectrum;
pub mod synth;

pub use error::CoreError;
pub use kernel::Kernel2d;
pub use raster::{ImageGray, ImageRgb};

/// Convenience alias used across the workspace.
pub type Result<T> = std::result::Result<T, CoreError>;
