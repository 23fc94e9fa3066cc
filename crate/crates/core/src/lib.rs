//! Modular pseudo-spectral solvers for periodic domains, with outputs,
//! restart files and benchmarking tools.
//!
//! A simulation is described by a [`params::ParamTree`] obtained from
//! [`solver_core::create_default_params`], edited, and passed to
//! [`solver_core::build_simulation`].

// Stage loops index several buffers at once, and `!(x > 0.0)` is used on
// purpose so that NaN fails validation.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod error;
pub mod fft;
pub mod operators;
pub mod output;
pub mod params;
pub mod solver_core;
pub mod solvers;
pub mod time_stepping;
pub mod timers;

pub use error::{Error, Result};
pub use solver_core::{build_simulation, create_default_params, Simulation};
