use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// AND/OR gate kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    And,
    Or,
}

impl GateKind {
    pub fn dual(self) -> Self {
        match self {
            GateKind::And => GateKind::Or,
            GateKind::Or => GateKind::And,
        }
    }

    /// The constant that forces a gate of this kind (0 for AND, 1 for OR).
    pub fn dominant(self) -> bool {
        matches!(self, GateKind::Or)
    }
}

/// The block-structured index space of a depth-`d` formula with fan-in
/// sequence `w_0, ..., w_{d-1}`.
///
/// Level `k` holds `|A_k| = w_0 * ... * w_{k-1}` addresses; an address at
/// level `k` is flattened lexicographically, so the level-`k` string
/// coordinate `a * w_{k-1} + i` is coordinate `i` of block `a` for
/// `a` in `A_{k-1}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddressSpace {
    fan_ins: Vec<usize>,
}

impl AddressSpace {
    pub fn new(fan_ins: Vec<usize>) -> Result<Self> {
        if fan_ins.len() < 2 {
            return Err(Error::InvalidProfile(format!(
                "depth must be at least 2, got {}",
                fan_ins.len()
            )));
        }
        if fan_ins.iter().any(|&w| w < 1) {
            return Err(Error::InvalidProfile(format!(
                "all fan-ins must be positive, got {fan_ins:?}"
            )));
        }
        let mut n: u128 = 1;
        for &w in &fan_ins {
            n = n
                .checked_mul(w as u128)
                .ok_or_else(|| Error::InvalidProfile("leaf count overflows".into()))?;
        }
        Ok(AddressSpace { fan_ins })
    }

    pub fn depth(&self) -> usize {
        self.fan_ins.len()
    }

    pub fn fan_ins(&self) -> &[usize] {
        &self.fan_ins
    }

    /// Fan-in `w_j` of gates at depth `j` (0 = root).
    pub fn fan_in(&self, depth: usize) -> usize {
        self.fan_ins[depth]
    }

    /// `|A_k|` for `0 <= k <= d`.
    pub fn level_size(&self, k: usize) -> usize {
        self.fan_ins[..k].iter().product()
    }

    pub fn leaf_count(&self) -> usize {
        self.level_size(self.depth())
    }

    /// Gate kind at depth `j`; the bottom layer (depth `d-1`) is AND.
    pub fn gate_kind(&self, depth: usize) -> GateKind {
        if (self.depth() - 1 - depth) % 2 == 0 {
            GateKind::And
        } else {
            GateKind::Or
        }
    }

    /// Numeric value of the `circ` symbol for level-`k` strings: 1 when the
    /// gates one level up are AND, 0 when they are OR.
    pub fn circ_at(&self, k: usize) -> bool {
        (self.depth() - k) % 2 == 0
    }

    /// Numeric value of the `bullet` symbol for level-`k` strings.
    pub fn bullet_at(&self, k: usize) -> bool {
        !self.circ_at(k)
    }

    /// Split a flat level-`k` coordinate into `(block, within)`.
    pub fn block_of(&self, k: usize, flat: usize) -> (usize, usize) {
        let w = self.fan_ins[k - 1];
        (flat / w, flat % w)
    }

    pub fn check_level(&self, k: usize) -> Result<()> {
        if k > self.depth() {
            return Err(Error::LevelOutOfRange {
                level: k,
                depth: self.depth(),
            });
        }
        Ok(())
    }
}
