//! Desk-scale experiments on integral points of affine homogeneous varieties:
//! norm-ball enumeration, reduction and lifting mod q, subvariety counting,
//! almost-prime sieving, and exact evaluation of the closed-form exponents
//! that govern those experiments.
//!
//! The `cli` crate exposes each experiment as a `homocount` subcommand; this
//! crate holds all algorithms and shared types.

pub mod budget;
pub mod enumerate;
pub mod error;
pub mod exponents;
pub mod geometry;
pub mod lift;
pub mod modular;
pub mod numeric;
pub mod restrict;
pub mod sift;

pub use budget::Budget;
pub use error::{Error, Result};
