use super::formula::{Literal, Polarity, TwoLevelFormula};
use super::table::TruthTable;
use crate::error::{Error, Result};
use std::collections::HashMap;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DtNode {
    Leaf(bool),
    Query {
        var: usize,
        zero: Box<DtNode>,
        one: Box<DtNode>,
    },
}

/// A binary decision tree; no variable is queried twice on any
/// root-to-leaf path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecisionTree {
    root: DtNode,
    num_vars: usize,
}

impl DecisionTree {
    pub fn new(root: DtNode, num_vars: usize) -> Result<Self> {
        fn check(node: &DtNode, num_vars: usize, path: &mut Vec<usize>) -> Result<()> {
            match node {
                DtNode::Leaf(_) => Ok(()),
                DtNode::Query { var, zero, one } => {
                    if *var >= num_vars {
                        return Err(Error::IndexMismatch(format!(
                            "query variable {var} >= {num_vars}"
                        )));
                    }
                    if path.contains(var) {
                        return Err(Error::IndexMismatch(format!(
                            "variable {var} queried twice on a path"
                        )));
                    }
                    path.push(*var);
                    check(zero, num_vars, path)?;
                    check(one, num_vars, path)?;
                    path.pop();
                    Ok(())
                }
            }
        }
        check(&root, num_vars, &mut Vec::new())?;
        Ok(DecisionTree { root, num_vars })
    }

    pub fn leaf(num_vars: usize, value: bool) -> Self {
        DecisionTree {
            root: DtNode::Leaf(value),
            num_vars,
        }
    }

    pub fn root(&self) -> &DtNode {
        &self.root
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn depth(&self) -> usize {
        fn d(node: &DtNode) -> usize {
            match node {
                DtNode::Leaf(_) => 0,
                DtNode::Query { zero, one, .. } => 1 + d(zero).max(d(one)),
            }
        }
        d(&self.root)
    }

    pub fn evaluate(&self, x: u64) -> bool {
        let mut node = &self.root;
        loop {
            match node {
                DtNode::Leaf(b) => return *b,
                DtNode::Query { var, zero, one } => {
                    node = if x >> var & 1 == 1 { one } else { zero };
                }
            }
        }
    }

    pub fn truth_table(&self) -> Result<TruthTable> {
        TruthTable::from_fn(self.num_vars, |x| self.evaluate(x))
    }

    /// Express the tree as a two-level formula of the requested polarity:
    /// a DNF collects the 1-leaves' paths as terms, a CNF collects the
    /// 0-leaves' negated paths as clauses. Width is at most the tree depth.
    pub fn to_two_level(&self, polarity: Polarity) -> TwoLevelFormula {
        let mut terms = Vec::new();
        let want_leaf = matches!(polarity, Polarity::Dnf);
        fn walk(
            node: &DtNode,
            want_leaf: bool,
            negate: bool,
            path: &mut Vec<Literal>,
            terms: &mut Vec<Vec<Literal>>,
        ) {
            match node {
                DtNode::Leaf(b) => {
                    if *b == want_leaf {
                        terms.push(path.clone());
                    }
                }
                DtNode::Query { var, zero, one } => {
                    path.push(Literal {
                        var: *var,
                        negated: !negate,
                    });
                    walk(zero, want_leaf, negate, path, terms);
                    path.pop();
                    path.push(Literal {
                        var: *var,
                        negated: negate,
                    });
                    walk(one, want_leaf, negate, path, terms);
                    path.pop();
                }
            }
        }
        // DNF terms assert the path taken; CNF clauses negate it.
        walk(
            &self.root,
            want_leaf,
            !matches!(polarity, Polarity::Dnf),
            &mut Vec::new(),
            &mut terms,
        );
        TwoLevelFormula::new(polarity, terms, self.num_vars, 1)
            .expect("paths use valid variables")
    }
}

/// Exact minimum decision-tree depth of a function, by memoized search over
/// cofactors. Brute force: intended for at most 12 variables.
pub fn optimal_dt_depth(table: &TruthTable) -> Result<usize> {
    const CAP: usize = 12;
    if table.nvars() > CAP {
        return Err(Error::ScaleExceeded {
            what: "optimal decision tree variables",
            size: table.nvars() as u128,
            cap: CAP as u128,
        });
    }
    let n = table.nvars();
    let bits: Vec<bool> = (0..table.len()).map(|x| table.get(x)).collect();
    let mut memo: HashMap<(Vec<bool>, u64), usize> = HashMap::new();
    // fixed: pairs (var, value) encoded in masks
    fn rec(
        bits: &[bool],
        n: usize,
        fixed_mask: u64,
        fixed_vals: u64,
        memo: &mut HashMap<(Vec<bool>, u64), usize>,
    ) -> usize {
        let live: Vec<u64> = (0..bits.len() as u64)
            .filter(|x| x & fixed_mask == fixed_vals)
            .collect();
        let first = bits[live[0] as usize];
        if live.iter().all(|&x| bits[x as usize] == first) {
            return 0;
        }
        let key_bits: Vec<bool> = live.iter().map(|&x| bits[x as usize]).collect();
        if let Some(&d) = memo.get(&(key_bits.clone(), fixed_mask)) {
            return d;
        }
        let mut best = usize::MAX;
        for v in 0..n {
            let bit = 1u64 << v;
            if fixed_mask & bit != 0 {
                continue;
            }
            let d0 = rec(bits, n, fixed_mask | bit, fixed_vals, memo);
            let d1 = rec(bits, n, fixed_mask | bit, fixed_vals | bit, memo);
            best = best.min(1 + d0.max(d1));
        }
        memo.insert((key_bits, fixed_mask), best);
        best
    }
    Ok(rec(&bits, n, 0, 0, &mut memo))
}
