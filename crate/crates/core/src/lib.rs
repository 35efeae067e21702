//! Core of a desk-scale laboratory for neural scaling laws of DLRM-style
//! click-through-rate models.
//!
//! Everything in this crate is pure computation and runs without `std`
//! (an allocator is required):
//!
//! - [`synthgen`]: seeded synthetic CTR data from a hidden logistic teacher,
//!   with Zipf-distributed categorical features.
//! - [`dlrm`]: the model (embedding tables, bottom MLP, interaction,
//!   overarch MLP), manual backprop, Adagrad, and exact parameter/flop
//!   accounting plus the four width-scaling schemes.
//! - [`trainer`]: one-epoch training and normalized-entropy evaluation.
//! - [`runs`]: run specifications, run records, grid construction and
//!   execution of a single run.
//! - [`scalefit`]: fitting `alpha * x^-beta + gamma`, knee detection and
//!   phase labels.
//! - [`analysis`]: Pareto frontiers, tandem compute views, scheme
//!   comparison, best-dimension tables and train/test exponent gaps.
//!
//! IO, sweeps over many runs, report files and the command line live in the
//! `recscale-lab` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod dlrm;
mod error;
mod math;
pub mod runs;
pub mod scalefit;
pub mod seed;
pub mod synthgen;
pub mod trainer;

pub use error::{Error, Result};
