//! Certification of smoothed classifiers against semantic image transformations.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure numerical code:
//!
//! * [`tensor`]: images, bilinear interpolation and image distances.
//! * [`statfn`]: normal CDF/quantile and exact binomial confidence bounds.
//! * [`transforms`]: Gaussian blur, brightness/contrast, translation, rotation, scaling.
//! * [`radii`]: closed-form robust radii per smoothing distribution and the
//!   brightness/contrast confidence shift.
//! * [`smoothing`]: Monte-Carlo `predict` / `certify` / progressive certification.
//! * [`aliasing`]: Lipschitz-based upper bounds on the interpolation sampling error
//!   for rotation and scaling.
//! * [`pipeline`]: end-to-end certification per transform family.
//! * [`classifiers`]: linear and analytic synthetic base classifiers.
//!
//! IO, the command line and wall-clock timing live in the `semcert` crate.

#![cfg_attr(not(test), no_std)]
// Rational-approximation coefficients are kept as published; negated comparisons also reject NaN.
#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod aliasing;
pub mod classifiers;
mod error;
mod noise;
pub mod pipeline;
pub mod radii;
pub mod smoothing;
pub mod statfn;
pub mod tensor;
pub mod transforms;

pub use error::{Error, Result};
pub use noise::DrawRng;
