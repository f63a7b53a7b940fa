use crate::circuits::{DecisionTree, DtNode, Literal, Polarity, TwoLevelFormula};
use crate::error::{Error, Result};
use crate::restrictions::{Restriction, Sym};

/// Status of one term under a partial assignment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermStatus {
    /// Some literal is fixed false, or the term holds a variable and its
    /// negation (identically zero).
    Falsified,
    /// Every literal is fixed true.
    Satisfied,
    Live,
}

pub fn term_status(term: &[Literal], assign: &[Sym]) -> TermStatus {
    // a term containing x and !x is identically 0; literals are sorted by
    // variable, so complementary pairs are adjacent
    for pair in term.windows(2) {
        if pair[0].var == pair[1].var && pair[0].negated != pair[1].negated {
            return TermStatus::Falsified;
        }
    }
    let mut all_fixed_true = true;
    for l in term {
        match assign[l.var].bit() {
            Some(b) => {
                if b == l.negated {
                    return TermStatus::Falsified;
                }
            }
            None => all_fixed_true = false,
        }
    }
    if all_fixed_true {
        TermStatus::Satisfied
    } else {
        TermStatus::Live
    }
}

/// First term that is not falsified, with its status.
pub fn first_nonfalsified(
    f: &TwoLevelFormula,
    assign: &[Sym],
) -> Option<(usize, TermStatus)> {
    for (i, term) in f.terms().iter().enumerate() {
        match term_status(term, assign) {
            TermStatus::Falsified => continue,
            status => return Some((i, status)),
        }
    }
    None
}

/// Blocks of the unfixed literals of a term, ascending and distinct.
pub fn eta_blocks(term: &[Literal], assign: &[Sym], width: usize) -> Vec<usize> {
    let mut blocks: Vec<usize> = term
        .iter()
        .filter(|l| assign[l.var].is_star())
        .map(|l| l.var / width)
        .collect();
    blocks.sort_unstable();
    blocks.dedup();
    blocks
}

/// Set every starred coordinate of `block` to `bit` (composition
/// semantics: fixed coordinates stay fixed).
pub fn assign_block(assign: &mut [Sym], width: usize, block: usize, bit: bool) {
    for i in 0..width {
        let v = block * width + i;
        if assign[v].is_star() {
            assign[v] = Sym::from_bit(bit);
        }
    }
}

fn require_dnf(f: &TwoLevelFormula) -> Result<()> {
    if f.polarity() != Polarity::Dnf {
        return Err(Error::StructuralMismatch(
            "canonical projection tree takes a DNF; dualize a CNF first".into(),
        ));
    }
    Ok(())
}

fn start_assign(f: &TwoLevelFormula, rho: Option<&Restriction>) -> Result<Vec<Sym>> {
    match rho {
        None => Ok(vec![Sym::Star; f.num_vars()]),
        Some(r) => {
            if r.len() != f.num_vars() {
                return Err(Error::IndexMismatch(format!(
                    "restriction has {} coordinates, formula has {} variables",
                    r.len(),
                    f.num_vars()
                )));
            }
            Ok(r.syms().to_vec())
        }
    }
}

/// The canonical projection decision tree of `f` restricted by `rho`: a
/// tree over the block variables computing proj(f restricted by rho).
///
/// Recursively: take the first non-falsified term, query every block that
/// holds one of its unfixed literals (ascending block order), and recurse
/// on each whole-block assignment. `depth_cap` bounds the number of
/// queried variables per path; exceeding it is a diagnostic error, not a
/// correctness failure (the recursion consumes at least one fresh block
/// per step, so the number of blocks always suffices).
pub fn canonical_proj_dt(
    f: &TwoLevelFormula,
    rho: Option<&Restriction>,
    depth_cap: usize,
) -> Result<DecisionTree> {
    require_dnf(f)?;
    let width = f.block_width();
    let mut assign = start_assign(f, rho)?;
    let node = build(f, &mut assign, width, 0, depth_cap)?;
    DecisionTree::new(node, f.num_blocks())
}

fn build(
    f: &TwoLevelFormula,
    assign: &mut Vec<Sym>,
    width: usize,
    depth: usize,
    cap: usize,
) -> Result<DtNode> {
    match first_nonfalsified(f, assign) {
        None => Ok(DtNode::Leaf(false)),
        Some((_, TermStatus::Satisfied)) => Ok(DtNode::Leaf(true)),
        Some((idx, TermStatus::Live)) => {
            if depth >= cap {
                return Err(Error::DepthCapExceeded { cap });
            }
            let blocks = eta_blocks(&f.terms()[idx], assign, width);
            debug_assert!(!blocks.is_empty());
            group(f, assign, width, &blocks, 0, depth, cap)
        }
        Some((_, TermStatus::Falsified)) => unreachable!("skipped above"),
    }
}

fn group(
    f: &TwoLevelFormula,
    assign: &mut Vec<Sym>,
    width: usize,
    blocks: &[usize],
    j: usize,
    depth: usize,
    cap: usize,
) -> Result<DtNode> {
    if j == blocks.len() {
        return build(f, assign, width, depth, cap);
    }
    if depth >= cap {
        return Err(Error::DepthCapExceeded { cap });
    }
    let branch = |bit: bool| -> Result<DtNode> {
        let mut sub = assign.clone();
        assign_block(&mut sub, width, blocks[j], bit);
        group(f, &mut sub, width, blocks, j + 1, depth + 1, cap)
    };
    Ok(DtNode::Query {
        var: blocks[j],
        zero: Box::new(branch(false)?),
        one: Box::new(branch(true)?),
    })
}

/// The leftmost root-to-leaf path of length at least `s` in the canonical
/// projection decision tree (depth-first, 0-branch before 1-branch), or
/// `None` when the tree has depth < s. Only the path bits are returned.
pub fn leftmost_deep_path(
    f: &TwoLevelFormula,
    rho: Option<&Restriction>,
    s: usize,
) -> Result<Option<Vec<bool>>> {
    require_dnf(f)?;
    let width = f.block_width();
    let mut assign = start_assign(f, rho)?;
    let mut path = Vec::new();
    if dfs(f, &mut assign, width, s as isize, &mut path) {
        Ok(Some(path))
    } else {
        Ok(None)
    }
}

fn dfs(
    f: &TwoLevelFormula,
    assign: &mut Vec<Sym>,
    width: usize,
    need: isize,
    path: &mut Vec<bool>,
) -> bool {
    match first_nonfalsified(f, assign) {
        None | Some((_, TermStatus::Satisfied)) => need <= 0,
        Some((idx, TermStatus::Live)) => {
            let blocks = eta_blocks(&f.terms()[idx], assign, width);
            dfs_group(f, assign, width, &blocks, 0, need, path)
        }
        Some((_, TermStatus::Falsified)) => unreachable!(),
    }
}

fn dfs_group(
    f: &TwoLevelFormula,
    assign: &mut Vec<Sym>,
    width: usize,
    blocks: &[usize],
    j: usize,
    need: isize,
    path: &mut Vec<bool>,
) -> bool {
    if j == blocks.len() {
        return dfs(f, assign, width, need, path);
    }
    for bit in [false, true] {
        let mut sub = assign.clone();
        assign_block(&mut sub, width, blocks[j], bit);
        path.push(bit);
        if dfs_group(f, &mut sub, width, blocks, j + 1, need - 1, path) {
            return true;
        }
        path.pop();
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{Literal, Polarity, TwoLevelFormula};

    fn lit(var: usize, negated: bool) -> Literal {
        Literal { var, negated }
    }

    fn dnf(terms: Vec<Vec<Literal>>, num_vars: usize, width: usize) -> TwoLevelFormula {
        TwoLevelFormula::new(Polarity::Dnf, terms, num_vars, width).unwrap()
    }

    #[test]
    fn constant_formulas_give_constant_trees() {
        let zero = dnf(vec![], 4, 2);
        let t = canonical_proj_dt(&zero, None, 8).unwrap();
        assert_eq!(t.depth(), 0);
        assert!(!t.evaluate(0));
        let one = dnf(vec![vec![]], 4, 2);
        let t = canonical_proj_dt(&one, None, 8).unwrap();
        assert_eq!(t.depth(), 0);
        assert!(t.evaluate(0));
    }

    #[test]
    fn complementary_literals_in_one_block_collapse_to_zero() {
        // x_{a,1} AND !x_{a,2}: the tree queries y_a and both leaves are 0
        let f = dnf(vec![vec![lit(0, false), lit(1, true)]], 2, 2);
        let t = canonical_proj_dt(&f, None, 8).unwrap();
        assert_eq!(t.depth(), 1);
        assert!(!t.evaluate(0) && !t.evaluate(1));
        // and it computes proj f
        let proj = f.to_circuit().project(2).unwrap();
        assert_eq!(t.truth_table().unwrap(), proj.truth_table().unwrap());
    }

    #[test]
    fn two_block_or_queries_blocks_in_order() {
        // x_{a,1} OR x_{b,1}: query y_a; its 1-branch is a 1-leaf, its
        // 0-branch queries y_b
        let f = dnf(vec![vec![lit(0, false)], vec![lit(2, false)]], 4, 2);
        let t = canonical_proj_dt(&f, None, 8).unwrap();
        match t.root() {
            DtNode::Query { var, zero, one } => {
                assert_eq!(*var, 0);
                assert_eq!(**one, DtNode::Leaf(true));
                match &**zero {
                    DtNode::Query { var, .. } => assert_eq!(*var, 1),
                    other => panic!("expected query, got {other:?}"),
                }
            }
            other => panic!("expected query at root, got {other:?}"),
        }
        let proj = f.to_circuit().project(2).unwrap();
        assert_eq!(t.truth_table().unwrap(), proj.truth_table().unwrap());
    }

    #[test]
    fn tree_computes_projection_on_random_dnfs() {
        use crate::samplers::RngStream;
        let mut rng = RngStream::new(77);
        for round in 0..200 {
            let width = 1 + (rng.next_u64() % 3) as usize;
            let blocks = 1 + (rng.next_u64() % 3) as usize;
            let nv = width * blocks;
            let nterms = (rng.next_u64() % 4) as usize;
            let mut terms = Vec::new();
            for _ in 0..nterms {
                let len = 1 + (rng.next_u64() % 3) as usize;
                let mut term = Vec::new();
                for _ in 0..len {
                    term.push(lit(
                        (rng.next_u64() % nv as u64) as usize,
                        rng.next_u64() % 2 == 0,
                    ));
                }
                term.sort();
                term.dedup();
                terms.push(term);
            }
            let f = dnf(terms, nv, width);
            let t = canonical_proj_dt(&f, None, 16).unwrap();
            let proj = f.to_circuit().project(width).unwrap();
            assert_eq!(
                t.truth_table().unwrap(),
                proj.truth_table().unwrap(),
                "round {round}: {f}"
            );
        }
    }

    #[test]
    fn leftmost_path_prefers_zero_branches() {
        let f = dnf(vec![vec![lit(0, false)], vec![lit(2, false)]], 4, 2);
        // depth 2 is reached along (y_a = 0, y_b = *), leftmost leaf 00
        let path = leftmost_deep_path(&f, None, 2).unwrap().unwrap();
        assert_eq!(path, vec![false, false]);
        // no path of length 3 exists: only two blocks
        assert_eq!(leftmost_deep_path(&f, None, 3).unwrap(), None);
    }

    #[test]
    fn restricting_can_kill_depth() {
        let f = dnf(vec![vec![lit(0, false)], vec![lit(2, false)]], 4, 2);
        let rho = Restriction::parse("L2: 0*/**").unwrap().0;
        // first term dies under rho, only y_b is ever queried
        let t = canonical_proj_dt(&f, Some(&rho), 8).unwrap();
        assert_eq!(t.depth(), 1);
        assert!(leftmost_deep_path(&f, Some(&rho), 2).unwrap().is_none());
    }
}
