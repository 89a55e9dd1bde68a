//! Hardware-aware multi-objective architecture search over enumerable spaces.
//!
//! A single [`hypernet::MetaHypernet`], conditioned on a preference vector and a
//! device feature vector, emits architecture logits. During search those logits
//! are sampled into one-hot architectures by a straight-through estimator
//! ([`architect`]), scored by an accuracy surrogate and frozen hardware
//! predictors ([`predictor`]), scalarized, and the per-device gradients are
//! combined with multiple gradient descent ([`moo`]). After search, sweeping the
//! preference vector profiles a Pareto front for any device, including devices
//! never seen during search ([`search::profile_pareto`]).
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. File formats and
//! the command-line front end live in the companion `hwpareto` crate.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod architect;
pub mod archspace;
pub mod error;
pub mod hypernet;
pub mod moo;
pub mod numerics;
pub mod pipeline;
pub mod pareto;
pub mod predictor;
pub mod rng;
pub mod search;

pub use error::{Error, Result};
