//! Planning with learned ReLU transition networks as mixed-integer linear programs.
//!
//! The crate is `no_std` (it needs `alloc`). It contains:
//!
//! - [`nn`]: feed-forward ReLU networks, evaluation and interval bound propagation.
//! - [`problem`]: factored planning instances, rewards, simulation and plan checking.
//! - [`milp`]: a model builder with a dense bounded simplex, branch-and-bound, a
//!   diagonal convex QP solver and an LP-format writer/reader.
//! - [`compiler`]: the big-M planning encoding and its potential-based strengthening.
//! - [`potentials`]: reward potentials for hidden units via constraint generation, with a
//!   brute-force enumeration oracle.
//! - [`domains`]: seeded synthetic instances (navigation, reservoir, hvac, random).
//!
//! Timing is abstracted behind [`Clock`] so the solvers stay free of `std`.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod compiler;
pub mod domains;
pub mod milp;
pub mod nn;
pub mod potentials;
pub mod problem;

mod clock;
pub mod interval;

pub use clock::{Clock, NoClock};
pub use interval::Interval;
