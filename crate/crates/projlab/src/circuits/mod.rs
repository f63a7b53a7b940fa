//! Boolean circuits: the Sipser family, layered AND/OR formulas, two-level
//! formulas, decision trees, truth tables, and the measures on them
//! (bias, disagreement, total influence).

mod address;
mod circuit;
mod dtree;
mod formula;
mod sipser;
mod table;

pub use address::{AddressSpace, GateKind};
pub use circuit::{LayeredCircuit, Node, SimplifyTrace};
pub use dtree::{optimal_dt_depth, DecisionTree, DtNode};
pub use formula::{Literal, Polarity, TwoLevelFormula};
pub use sipser::{build_sipser, truncate_sipser};
pub use table::{ProductDistribution, TruthTable, MAX_TT_VARS};

use crate::error::{Error, Result};
use num::BigRational;

/// Variable-count cap for exact total-influence computation.
pub const MAX_INFLUENCE_VARS: usize = 20;

/// Exact total influence of a circuit under the uniform distribution:
/// the sum over coordinates of the probability that flipping the
/// coordinate flips the output.
pub fn total_influence(circuit: &LayeredCircuit) -> Result<BigRational> {
    if circuit.num_vars() > MAX_INFLUENCE_VARS {
        return Err(Error::ScaleExceeded {
            what: "total influence variables",
            size: circuit.num_vars() as u128,
            cap: MAX_INFLUENCE_VARS as u128,
        });
    }
    Ok(circuit.truth_table()?.total_influence())
}

/// bias(f, D) = min(Pr_D[f = 0], Pr_D[f = 1]), exactly.
pub fn bias(circuit: &LayeredCircuit, dist: &ProductDistribution) -> Result<BigRational> {
    Ok(circuit.truth_table()?.bias(dist))
}

/// Pr_D[f != g], exactly.
pub fn disagreement(
    f: &LayeredCircuit,
    g: &LayeredCircuit,
    dist: &ProductDistribution,
) -> Result<BigRational> {
    f.truth_table()?.disagreement(&g.truth_table()?, dist)
}
