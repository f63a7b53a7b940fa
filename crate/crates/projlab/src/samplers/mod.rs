//! Samplers and exact enumerators for the restriction distributions: the
//! initial stage, the adaptive refinement stages, the multi-stage chain,
//! their probability mass functions, and the percolation completion of a
//! chain outcome to a full input.

mod psi;
mod rng;
mod stage;

pub use psi::{
    bits_to_index, complete_to_assignment, for_each_psi, sample_psi, y_mass, PsiOutcome,
};
pub use rng::{u64_below, RngStream};
pub use stage::{
    Branch, BlockDistribution, StageDist, StageKind, DEFAULT_BLOCK_ENUM_CAP,
    MAX_JOINT_SUPPORT,
};

use crate::error::Result;
use crate::params::ToyParams;
use crate::restrictions::Restriction;
use num::BigRational;

/// Draw from the initial stage (level d).
pub fn sample_r_init(params: &ToyParams, rng: &mut RngStream) -> Result<Restriction> {
    StageDist::init(params)?.sample(rng)
}

/// Draw a refinement of `tau` from the subsequent stage at tau's level.
pub fn sample_r_tau(
    params: &ToyParams,
    tau: &Restriction,
    rng: &mut RngStream,
) -> Result<Restriction> {
    StageDist::subsequent(params, tau)?.sample(rng)
}

/// Exact mass of `rho` under the initial stage.
pub fn pmf_r_init(params: &ToyParams, rho: &Restriction) -> Result<BigRational> {
    StageDist::init(params)?.pmf(rho)
}

/// Exact mass of `rho` under the refinement stage over `tau`.
pub fn pmf_r_tau(
    params: &ToyParams,
    tau: &Restriction,
    rho: &Restriction,
) -> Result<BigRational> {
    StageDist::subsequent(params, tau)?.pmf(rho)
}

/// Full support of one block of a stage with exact masses, capped at the
/// default enumeration width.
pub fn enumerate_block_support(
    params: &ToyParams,
    tau: Option<&Restriction>,
    block: usize,
) -> Result<BlockDistribution> {
    let stage = match tau {
        None => StageDist::init(params)?,
        Some(t) => StageDist::subsequent(params, t)?,
    };
    stage.enumerate_block(block, DEFAULT_BLOCK_ENUM_CAP)
}
