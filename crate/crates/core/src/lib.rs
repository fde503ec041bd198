//! Federated hyperdimensional computing.
//!
//! The crate is organised by subsystem:
//!
//! * [`hdc`]: random-projection encoding, class prototypes, one-shot training,
//!   perceptron-style retraining and the linear-discriminant / SGD reference
//!   routines the retraining rule is checked against.
//! * [`fed`]: client partitioning and sampling, local updates, aggregation and
//!   the round loop.
//! * [`channel`]: uplink corruption (AWGN, bit flips, packet loss), the model
//!   bit codec and the scale-up / scale-down quantizer.
//! * [`strategy`]: uplink size reduction (binarized differences, subsampling,
//!   sparsification) and wire-size accounting.
//! * [`data`]: dataset formats, normalisation and synthetic generators.
//!
//! Data-parallel loops go through [`exec::Exec`], which is backed by rayon when
//! the `parallel` feature is enabled and by plain iterators otherwise. Results
//! never depend on the execution mode.

pub mod channel;
pub mod data;
pub mod error;
pub mod exec;
pub mod fed;
pub mod hdc;
pub mod rng;
pub mod strategy;

pub use error::{Error, Result};
pub use exec::Exec;
