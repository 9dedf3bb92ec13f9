//! Impulsive juggling of a planar devil-stick.
//!
//! The stick is struck alternately at two fixed orientations and flies
//! ballistically in between. A discrete virtual holonomic constraint ties the
//! center-of-mass position at each strike to the orientation; the resulting
//! zero dynamics admit a one-parameter family of 2-periodic orbits, any of
//! which can be selected and stabilized through a Poincare return map whose
//! control arguments are the impulse and its point of application.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// tests use the initial orientation as quoted, 0.5236
#![cfg_attr(test, allow(clippy::approx_constant))]

pub mod cli;
pub mod dvhc;
pub mod dynamics;
pub mod dzd;
pub mod error;
pub mod harness;
pub mod model;
pub mod stabilizer;

pub use error::{Error, Result};
pub use model::{FullState, ImpulseCmd, ImpulseIndex, JuggleSpec, StickParams};
