use crate::circuits::{
    optimal_dt_depth, DecisionTree, DtNode, GateKind, LayeredCircuit, Literal, Node,
    Polarity, TwoLevelFormula,
};
use crate::error::{Error, Result};
use crate::params::ToyParams;
use crate::restrictions::Restriction;
use crate::samplers::PsiOutcome;
use num::BigRational;
use serde::Serialize;

/// Which lower-bound pipeline drives the collapse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CollapseRoute {
    /// Small bottom fan-in: every stage switches bottom depth-2 subcircuits
    /// to canonical projection trees.
    BottomFanin,
    /// Opposite alternation: trim the bottom fan-in first, apply the first
    /// projection as-is, then switch on the remaining stages.
    OppositeAlternation,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageCollapse {
    pub level: usize,
    pub subcircuits: usize,
    pub switched: usize,
    pub failed: usize,
    pub depth_after: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CollapseOutcome {
    pub route: CollapseRoute,
    pub stages: Vec<StageCollapse>,
    pub all_switched: bool,
    pub final_depth: usize,
    pub final_bottom_fanin: usize,
    /// brute-force optimal decision-tree depth of the final function, when
    /// it has at most 12 variables
    pub final_dt_depth: Option<usize>,
    pub final_class: String,
    /// the final circuit computes exactly the full projection of the
    /// (possibly trimmed) input
    pub semantics_match: bool,
    pub trim_bound: Option<String>,
    pub trim_disagreement: Option<String>,
    #[serde(skip)]
    pub final_circuit: LayeredCircuit,
}

fn dual_tree_node(node: &DtNode) -> DtNode {
    match node {
        DtNode::Leaf(b) => DtNode::Leaf(!b),
        DtNode::Query { var, zero, one } => DtNode::Query {
            var: *var,
            // dual(g)(y) = !g(!y): swap the branches and negate the leaves
            zero: Box::new(dual_tree_node(one)),
            one: Box::new(dual_tree_node(zero)),
        },
    }
}

fn node_height(node: &Node) -> usize {
    match node {
        Node::Const(_) | Node::Literal { .. } => 0,
        Node::Gate { children, .. } => 1 + children.iter().map(node_height).max().unwrap_or(0),
    }
}

/// Read a height <= 2 subtree as a two-level formula whose polarity matches
/// its top gate.
fn subtree_to_two_level(
    node: &Node,
    num_vars: usize,
    width: usize,
) -> Result<TwoLevelFormula> {
    let leaf_literal = |n: &Node| -> Result<Literal> {
        match n {
            Node::Literal { var, negated } => Ok(Literal {
                var: *var,
                negated: *negated,
            }),
            other => Err(Error::StructuralMismatch(format!(
                "expected a literal in a bottom subcircuit, found {other:?}"
            ))),
        }
    };
    match node {
        Node::Gate { kind, children } => {
            let polarity = match kind {
                GateKind::Or => Polarity::Dnf,
                GateKind::And => Polarity::Cnf,
            };
            let mut terms = Vec::with_capacity(children.len());
            for c in children {
                match c {
                    Node::Gate { children: leaves, .. } => {
                        terms.push(
                            leaves
                                .iter()
                                .map(&leaf_literal)
                                .collect::<Result<Vec<_>>>()?,
                        );
                    }
                    leaf => terms.push(vec![leaf_literal(leaf)?]),
                }
            }
            TwoLevelFormula::new(polarity, terms, num_vars, width)
        }
        leaf => {
            // a bare literal: a single one-literal term
            TwoLevelFormula::new(
                Polarity::Dnf,
                vec![vec![leaf_literal(leaf)?]],
                num_vars,
                width,
            )
        }
    }
}

/// Switch one bottom depth-2 subcircuit under rho: returns the replacement
/// node over the projected variables and whether the canonical tree stayed
/// within depth s.
fn switch_subcircuit(
    node: &Node,
    num_vars: usize,
    rho: &Restriction,
    width: usize,
    s: usize,
) -> Result<(Node, bool)> {
    if let Node::Const(b) = node {
        return Ok((Node::Const(*b), true));
    }
    let f = subtree_to_two_level(node, num_vars, width)?;
    let cap = f.num_blocks() + 1;
    let tree = match f.polarity() {
        Polarity::Dnf => crate::switching::canonical_proj_dt(&f, Some(rho), cap)?,
        Polarity::Cnf => {
            // proj_rho F is the dual of proj_{complement(rho)} dual(F)
            let t = crate::switching::canonical_proj_dt(
                &f.dual(),
                Some(&rho.complement_fixed()),
                cap,
            )?;
            DecisionTree::new(dual_tree_node(t.root()), t.num_vars())?
        }
    };
    let success = tree.depth() <= s;
    let replacement = if success {
        // express the tree with the polarity dual to the subcircuit's own
        // top gate so it merges with the layer above
        let polarity = match f.polarity() {
            Polarity::Dnf => Polarity::Cnf,
            Polarity::Cnf => Polarity::Dnf,
        };
        tree.to_two_level(polarity).to_circuit().root().clone()
    } else {
        // keep exact semantics; the stage merely fails to shrink this gate
        LayeredCircuit::new(node.clone(), num_vars)?
            .proj_restrict(rho, width)?
            .root()
            .clone()
    };
    Ok((replacement, success))
}

/// One projection stage over the whole circuit: every bottom depth-2
/// subcircuit is replaced by its switched form; gates higher up survive
/// unchanged (their children just move one level down).
fn collapse_stage(
    circuit: &LayeredCircuit,
    rho: &Restriction,
    width: usize,
    s: usize,
) -> Result<(LayeredCircuit, usize, usize)> {
    let num_vars = circuit.num_vars();
    let mut switched = 0usize;
    let mut failed = 0usize;
    fn rebuild(
        node: &Node,
        num_vars: usize,
        rho: &Restriction,
        width: usize,
        s: usize,
        switched: &mut usize,
        failed: &mut usize,
    ) -> Result<Node> {
        if node_height(node) <= 2 {
            let (replacement, ok) = switch_subcircuit(node, num_vars, rho, width, s)?;
            if ok {
                *switched += 1;
            } else {
                *failed += 1;
            }
            return Ok(replacement);
        }
        match node {
            Node::Gate { kind, children } => Ok(Node::Gate {
                kind: *kind,
                children: children
                    .iter()
                    .map(|c| rebuild(c, num_vars, rho, width, s, switched, failed))
                    .collect::<Result<_>>()?,
            }),
            _ => unreachable!("leaves have height 0"),
        }
    }
    let root = rebuild(
        circuit.root(),
        num_vars,
        rho,
        width,
        s,
        &mut switched,
        &mut failed,
    )?;
    let out = LayeredCircuit::new(root, num_vars / width)?.simplify();
    Ok((out, switched, failed))
}

/// Drive an approximator through all projection stages of one chain
/// outcome, switching bottom depth-2 subcircuits after each stage.
pub fn collapse_under_psi(
    params: &ToyParams,
    psi: &PsiOutcome,
    circuit: &LayeredCircuit,
    s: usize,
    route: CollapseRoute,
) -> Result<CollapseOutcome> {
    let space = params.space();
    let d = space.depth();
    let simplified = circuit.simplify();
    let (mut current, trim_bound, trim_disagreement, reference) = match route {
        CollapseRoute::BottomFanin => (simplified.clone(), None, None, simplified),
        CollapseRoute::OppositeAlternation => {
            let size = simplified.size().max(2);
            let eps = BigRational::new(1.into(), size.into());
            let (trimmed, bound) = simplified.trim_bottom_fanin(&eps)?;
            let disagreement = crate::circuits::disagreement(
                &simplified,
                &trimmed,
                &crate::circuits::ProductDistribution::uniform(simplified.num_vars()),
            )?;
            (trimmed.clone(), Some(bound), Some(disagreement), trimmed)
        }
    };
    let mut stages = Vec::new();
    for (i, rho) in psi.rho.iter().enumerate() {
        let k = d - i;
        let width = space.fan_in(k - 1);
        let skip_switch =
            route == CollapseRoute::OppositeAlternation && k == d && d > 2;
        let (next, switched, failed) = if skip_switch || current.depth() <= 1 {
            (current.proj_restrict(rho, width)?, 0, 0)
        } else {
            collapse_stage(&current, rho, width, s)?
        };
        stages.push(StageCollapse {
            level: k,
            subcircuits: switched + failed,
            switched,
            failed,
            depth_after: next.depth(),
        });
        current = next;
    }
    // exactness: when every sub-switch succeeded the pipeline computed the
    // projection exactly; stage failures also preserve semantics here since
    // failed subcircuits are projected outright
    let direct = psi.apply(&space, &reference)?;
    let semantics_match = current.truth_table()? == direct.truth_table()?;
    let all_switched = stages.iter().all(|st| st.failed == 0);
    let final_dt_depth = if current.num_vars() <= 12 {
        Some(optimal_dt_depth(&current.truth_table()?)?)
    } else {
        None
    };
    let final_class = match (current.depth(), final_dt_depth) {
        (0, _) => "constant".to_string(),
        (_, Some(dd)) if dd <= s => format!("decision tree of depth {dd} <= s = {s}"),
        (dep, _) if dep <= 2 => format!(
            "depth-{dep} two-level formula of bottom fan-in {}",
            current.bottom_fanin()
        ),
        (dep, _) => format!("depth-{dep} circuit (collapse incomplete)"),
    };
    Ok(CollapseOutcome {
        route,
        all_switched,
        final_depth: current.depth(),
        final_bottom_fanin: current.bottom_fanin(),
        final_dt_depth,
        final_class,
        semantics_match,
        trim_bound: trim_bound.map(|b| b.to_string()),
        trim_disagreement: trim_disagreement.map(|b| b.to_string()),
        stages,
        final_circuit: current,
    })
}
