//! Data-aided shrinkage regularization of the direct-estimate uplink
//! combiner in a distributed (cell-free) MIMO system.
//!
//! The crate is organised bottom-up:
//!
//! - [`scenario`]: geometry, unit conventions and channel draws.
//! - [`airframe`]: pilots, constellations and received-signal synthesis.
//! - [`regcov`]: sample covariance, the shrinkage family `R(α)` with an
//!   eigen-cached inverse, and the closed-form shrinkage coefficients.
//! - [`combine`]: direct-estimate and perfect-CSI combiners.
//! - [`detect`]: minimum-distance decisions, SER and the sample MSE.
//! - [`shrinkfit`]: iterative gradient fit of `α` and the genie grid search.
//! - [`harness`]: Monte-Carlo trials, sweeps, CSV/SVG output.

pub mod airframe;
pub mod combine;
pub mod detect;
mod error;
pub mod harness;
pub mod linalg;
pub mod regcov;
pub mod scenario;
pub mod seed;
pub mod shrinkfit;
pub mod validate;

pub use error::{Error, Result};

/// Dense complex matrix used throughout the crate.
pub type CMat = nalgebra::DMatrix<num_complex::Complex64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<num_complex::Complex64>;
