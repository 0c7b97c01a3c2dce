//! Ergodic nulling: suppressing an arbitrary number of interferers with two
//! receive chains by choosing which pair of antennas of a large uniform
//! linear array feeds them.
//!
//! The crate is organised bottom-up:
//!
//! * [`array_manifold`] holds steering vectors and beam-pattern gains,
//! * [`channel`] builds line-of-sight, specular multipath and ray-based MIMO
//!   interference channels together with antenna selection,
//! * [`nulling`] implements the spacing searches and the support-constrained
//!   beamformers,
//! * [`rates`] turns beamformers and channels into achievable rates and
//!   benchmarks,
//! * [`mimo`] covers per-stream antenna pairing and the equivalent MIMO
//!   channel,
//! * [`harness`] runs seeded Monte-Carlo experiments and writes CSV curves.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array_manifold;
pub mod channel;
pub mod error;
pub mod harness;
mod linalg;
pub mod mimo;
pub mod nulling;
pub mod rates;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector};
pub use num_complex::Complex64;
