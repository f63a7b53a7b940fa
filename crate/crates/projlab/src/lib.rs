//! A desk-scale laboratory for random projections of small-depth Boolean
//! circuits.
//!
//! The crate builds the read-once monotone Sipser formulas and their
//! truncations, block-structured restrictions with refinement / composition /
//! lift operators, the adaptive multi-stage random projection and its exact
//! probability mass functions, the canonical projection decision tree with
//! the bad-restriction encode/decode injection, and a set of end-to-end
//! experiments (completion to uniform, target collapse, typicality, bias,
//! switching decay, base case, correlation) that are exact wherever the
//! supports are enumerable.
//!
//! Start with the runnable programs under `examples/`; the `projlab` binary
//! exposes the same machinery as a subcommand CLI.

pub mod circuits;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod params;
pub mod restrictions;
pub mod samplers;
pub mod switching;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod testutil;
