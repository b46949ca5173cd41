//! Springback prediction for rotary-draw-bent bi-layer metallic tubes (BMT).
//!
//! The crate is organised bottom-up:
//!
//! - [`section`]: transformed-section equivalence of a two-layer annulus to a
//!   single-material tube. This is the theory map used to pre-explore ES-NET.
//! - [`oracle`]: an elastic-plastic pure-bending springback model, Latin
//!   hypercube sampling and CSV datasets. It stands in for finite-element data.
//! - [`nn`]: a small dense network with exact backpropagation, Adam and a
//!   seeded minibatch training loop.
//! - [`penet`]: ES-NET / SP-NET / PE-NET, the two-stage training protocol and
//!   the dynamic-weight composite loss.
//! - [`harness`]: multi-seed experiments, ablations and report emission.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod nn;
pub mod oracle;
pub mod penet;
pub mod section;
pub(crate) mod seed;

pub use error::{Error, Result};
