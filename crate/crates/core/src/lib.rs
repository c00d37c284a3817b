//! Play-outcome prediction workbench for American-football play-by-play
//! data: description parsing, labelling, one-hot encoding, six model
//! families fitted from scratch, evaluation, and a play-ranking service.

#![cfg_attr(test, allow(clippy::needless_range_loop))]

pub mod dataset;
pub mod encode;
pub mod error;
pub mod eval;
pub mod kernel;
pub mod labels;
pub mod linear;
pub mod matrix;
pub mod model;
pub mod neural;
pub mod playparse;
pub mod rng;
pub mod serve;
pub mod stats;
pub mod synth;
pub mod trees;

pub use error::{Error, Result};
