use super::address::AddressSpace;
use super::circuit::{LayeredCircuit, Node};
use crate::error::{Error, Result};

/// Leaf-count cap for constructed formulas.
pub const MAX_SIPSER_LEAVES: usize = 1 << 24;

/// The depth-`d` read-once monotone alternating formula with the given
/// fan-in sequence: bottom layer AND, every variable at exactly one leaf,
/// leaves indexed in flattened address order.
pub fn build_sipser(space: &AddressSpace) -> Result<LayeredCircuit> {
    truncate_sipser(space, space.depth())
}

/// The depth-`k` truncation: gates at depths `0..k` keep their kinds and
/// fan-ins, and each depth-`k` gate is replaced by a fresh variable indexed
/// by its address. `k = d` returns the full formula; `k = 1` is the single
/// top gate.
pub fn truncate_sipser(space: &AddressSpace, k: usize) -> Result<LayeredCircuit> {
    if k < 1 || k > space.depth() {
        return Err(Error::LevelOutOfRange {
            level: k,
            depth: space.depth(),
        });
    }
    let n = space.level_size(k);
    if n > MAX_SIPSER_LEAVES {
        return Err(Error::ScaleExceeded {
            what: "formula leaves",
            size: n as u128,
            cap: MAX_SIPSER_LEAVES as u128,
        });
    }
    fn node(space: &AddressSpace, k: usize, depth: usize, base: usize) -> Node {
        if depth == k {
            return Node::Literal {
                var: base,
                negated: false,
            };
        }
        let w = space.fan_in(depth);
        let children = (0..w)
            .map(|i| node(space, k, depth + 1, base * w + i))
            .collect();
        Node::Gate {
            kind: space.gate_kind(depth),
            children,
        }
    }
    LayeredCircuit::new(node(space, k, 0, 0), n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{GateKind, Node};

    #[test]
    fn toy_depth3_profile_has_top_and() {
        let sp = AddressSpace::new(vec![2, 2, 2]).unwrap();
        let f = build_sipser(&sp).unwrap();
        assert_eq!(f.num_vars(), 8);
        assert_eq!(f.depth(), 3);
        assert!(f.is_layered() && f.is_alternating());
        match f.root() {
            Node::Gate { kind, children } => {
                assert_eq!(*kind, GateKind::And); // d odd
                assert_eq!(children.len(), 2);
                for c in children {
                    match c {
                        Node::Gate { kind, .. } => assert_eq!(*kind, GateKind::Or),
                        _ => panic!("expected OR layer"),
                    }
                }
            }
            _ => panic!("expected a gate at the root"),
        }
        // monotone formula is 1 at the top of the cube
        assert!(f.evaluate((1 << 8) - 1));
        assert!(!f.evaluate(0));
    }

    #[test]
    fn bottom_fanin_is_last_profile_entry() {
        let sp = AddressSpace::new(vec![3, 4, 2]).unwrap();
        let f = build_sipser(&sp).unwrap();
        assert_eq!(f.bottom_fanin(), 2);
    }

    #[test]
    fn depth2_profile_matches_hand_built_formula() {
        // OR of 3 ANDs of fan-in 2, 6 leaves; checked on all 64 inputs
        let sp = AddressSpace::new(vec![3, 2]).unwrap();
        let f = build_sipser(&sp).unwrap();
        assert_eq!(f.num_vars(), 6);
        for x in 0u64..64 {
            let want = (0..3).any(|a| (0..2).all(|i| x >> (2 * a + i) & 1 == 1));
            assert_eq!(f.evaluate(x), want, "x = {x:#b}");
        }
    }

    #[test]
    fn truncation_levels() {
        let sp = AddressSpace::new(vec![2, 2, 2]).unwrap();
        // k = d is the formula itself
        let full = build_sipser(&sp).unwrap();
        let td = truncate_sipser(&sp, 3).unwrap();
        assert_eq!(
            full.truth_table().unwrap(),
            td.truth_table().unwrap()
        );
        // k = 1 is the top gate alone: a 2-way AND here (d odd)
        let t1 = truncate_sipser(&sp, 1).unwrap();
        assert_eq!(t1.num_vars(), 2);
        assert_eq!(t1.depth(), 1);
        for x in 0u64..4 {
            assert_eq!(t1.evaluate(x), x == 3);
        }
        // d even: top gate is a w0-way OR
        let sp4 = AddressSpace::new(vec![3, 2, 2, 2]).unwrap();
        let t1 = truncate_sipser(&sp4, 1).unwrap();
        for x in 0u64..8 {
            assert_eq!(t1.evaluate(x), x != 0);
        }
        // k = 2 of the toy: AND of two 2-way ORs over 4 variables
        let t2 = truncate_sipser(&sp, 2).unwrap();
        for x in 0u64..16 {
            let want = (x & 3 != 0) && (x >> 2 & 3 != 0);
            assert_eq!(t2.evaluate(x), want);
        }
        assert!(truncate_sipser(&sp, 0).is_err());
        assert!(truncate_sipser(&sp, 4).is_err());
    }

    #[test]
    fn monotone_under_bit_raises() {
        let sp = AddressSpace::new(vec![2, 2, 2]).unwrap();
        let f = build_sipser(&sp).unwrap();
        for x in 0u64..256 {
            for i in 0..8 {
                if x >> i & 1 == 0 && f.evaluate(x) {
                    assert!(f.evaluate(x | 1 << i), "raising bit {i} of {x:#b}");
                }
            }
        }
    }

    #[test]
    fn satisfying_count_matches_exhaustive_enumeration() {
        let sp = AddressSpace::new(vec![2, 2, 2]).unwrap();
        let f = build_sipser(&sp).unwrap();
        let direct = (0u64..256).filter(|&x| f.evaluate(x)).count() as u64;
        assert_eq!(f.truth_table().unwrap().count_ones(), direct);
        // AND of two copies of OR(AND,AND): per half, OR of two 2-ANDs has
        // 7 satisfying of 16; whole formula: 7 * 7 = 49.
        assert_eq!(direct, 49);
    }
}
