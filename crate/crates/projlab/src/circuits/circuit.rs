use super::address::GateKind;
use super::table::TruthTable;
use crate::error::{Error, Result};
use crate::restrictions::{Restriction, Sym};
use serde::{Deserialize, Serialize};

/// One node of an AND/OR formula tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Node {
    Const(bool),
    Literal { var: usize, negated: bool },
    Gate { kind: GateKind, children: Vec<Node> },
}

/// Counters for the simplification rules applied while restricting or
/// projecting; kept for debugging, not semantics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SimplifyTrace {
    pub constant_collapses: usize,
    pub dropped_identities: usize,
    pub unit_collapses: usize,
    pub deduplications: usize,
    pub complementary_collapses: usize,
    pub flattenings: usize,
}

/// An alternating, layered AND/OR formula over variables `0..num_vars`.
///
/// Constructors produce alternating layered circuits; `restrict` and
/// `project` apply eager constant propagation, so their outputs may have
/// non-uniform leaf depth (use `normalize_layered` to restore the layered
/// form, which inserts unary pass-through gates).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayeredCircuit {
    root: Node,
    num_vars: usize,
}

impl LayeredCircuit {
    pub fn new(root: Node, num_vars: usize) -> Result<Self> {
        fn check(node: &Node, num_vars: usize) -> Result<()> {
            match node {
                Node::Const(_) => Ok(()),
                Node::Literal { var, .. } => {
                    if *var >= num_vars {
                        return Err(Error::IndexMismatch(format!(
                            "literal variable {var} >= {num_vars}"
                        )));
                    }
                    Ok(())
                }
                Node::Gate { children, .. } => {
                    children.iter().try_for_each(|c| check(c, num_vars))
                }
            }
        }
        check(&root, num_vars)?;
        Ok(LayeredCircuit { root, num_vars })
    }

    pub fn constant(num_vars: usize, value: bool) -> Self {
        LayeredCircuit {
            root: Node::Const(value),
            num_vars,
        }
    }

    pub fn literal(num_vars: usize, var: usize, negated: bool) -> Result<Self> {
        Self::new(Node::Literal { var, negated }, num_vars)
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn depth(&self) -> usize {
        fn d(node: &Node) -> usize {
            match node {
                Node::Const(_) | Node::Literal { .. } => 0,
                Node::Gate { children, .. } => {
                    1 + children.iter().map(d).max().unwrap_or(0)
                }
            }
        }
        d(&self.root)
    }

    /// Number of gates.
    pub fn size(&self) -> usize {
        fn s(node: &Node) -> usize {
            match node {
                Node::Const(_) | Node::Literal { .. } => 0,
                Node::Gate { children, .. } => 1 + children.iter().map(s).sum::<usize>(),
            }
        }
        s(&self.root)
    }

    /// Maximum fan-in over gates whose children are all leaves.
    pub fn bottom_fanin(&self) -> usize {
        fn walk(node: &Node, best: &mut usize) {
            if let Node::Gate { children, .. } = node {
                if children
                    .iter()
                    .all(|c| !matches!(c, Node::Gate { .. }))
                {
                    *best = (*best).max(children.len());
                } else {
                    children.iter().for_each(|c| walk(c, best));
                }
            }
        }
        let mut best = 0;
        walk(&self.root, &mut best);
        best
    }

    /// True when every root-to-leaf path has the same length.
    pub fn is_layered(&self) -> bool {
        fn depths(node: &Node) -> (usize, usize) {
            match node {
                Node::Const(_) | Node::Literal { .. } => (0, 0),
                Node::Gate { children, .. } => {
                    let (lo, hi) = children
                        .iter()
                        .map(depths)
                        .fold((usize::MAX, 0), |(a, b), (lo, hi)| (a.min(lo), b.max(hi)));
                    if children.is_empty() {
                        (1, 1)
                    } else {
                        (lo + 1, hi + 1)
                    }
                }
            }
        }
        let (lo, hi) = depths(&self.root);
        lo == hi
    }

    /// True when no gate has a child gate of the same kind.
    pub fn is_alternating(&self) -> bool {
        fn alt(node: &Node) -> bool {
            match node {
                Node::Const(_) | Node::Literal { .. } => true,
                Node::Gate { kind, children } => children.iter().all(|c| match c {
                    Node::Gate { kind: ck, .. } => ck != kind && alt(c),
                    _ => true,
                }),
            }
        }
        alt(&self.root)
    }

    pub fn evaluate(&self, x: u64) -> bool {
        fn ev(node: &Node, x: u64) -> bool {
            match node {
                Node::Const(b) => *b,
                Node::Literal { var, negated } => (x >> var & 1 == 1) != *negated,
                Node::Gate { kind, children } => match kind {
                    GateKind::And => children.iter().all(|c| ev(c, x)),
                    GateKind::Or => children.iter().any(|c| ev(c, x)),
                },
            }
        }
        ev(&self.root, x)
    }

    pub fn evaluate_bits(&self, bits: &[bool]) -> Result<bool> {
        if bits.len() != self.num_vars {
            return Err(Error::ArityMismatch {
                expected: self.num_vars,
                got: bits.len(),
            });
        }
        let mut x = 0u64;
        for (i, &b) in bits.iter().enumerate() {
            if b {
                x |= 1 << i;
            }
        }
        Ok(self.evaluate(x))
    }

    pub fn truth_table(&self) -> Result<TruthTable> {
        TruthTable::from_fn(self.num_vars, |x| self.evaluate(x))
    }

    /// Eager simplification: constant propagation, identity dropping,
    /// same-kind flattening, duplicate removal, complementary-literal
    /// collapse, unit-gate collapse.
    pub fn simplify(&self) -> Self {
        self.simplify_traced().0
    }

    pub fn simplify_traced(&self) -> (Self, SimplifyTrace) {
        let mut trace = SimplifyTrace::default();
        let root = simp(self.root.clone(), &mut trace);
        (
            LayeredCircuit {
                root,
                num_vars: self.num_vars,
            },
            trace,
        )
    }

    /// f restricted by a leaf-level restriction: fixed variables become
    /// constants, then the circuit is simplified. The variable space is
    /// unchanged, so the result equals `f` on every completion of the
    /// restriction.
    pub fn restrict(&self, rho: &Restriction) -> Result<Self> {
        self.restrict_traced(rho).map(|(c, _)| c)
    }

    pub fn restrict_traced(&self, rho: &Restriction) -> Result<(Self, SimplifyTrace)> {
        if rho.len() != self.num_vars {
            return Err(Error::IndexMismatch(format!(
                "restriction has {} coordinates, circuit has {} variables",
                rho.len(),
                self.num_vars
            )));
        }
        fn apply(node: &Node, rho: &Restriction) -> Node {
            match node {
                Node::Const(b) => Node::Const(*b),
                Node::Literal { var, negated } => match rho.get(*var) {
                    Sym::Star => Node::Literal {
                        var: *var,
                        negated: *negated,
                    },
                    Sym::Zero => Node::Const(*negated),
                    Sym::One => Node::Const(!*negated),
                },
                Node::Gate { kind, children } => Node::Gate {
                    kind: *kind,
                    children: children.iter().map(|c| apply(c, rho)).collect(),
                },
            }
        }
        let mut trace = SimplifyTrace::default();
        let root = simp(apply(&self.root, rho), &mut trace);
        Ok((
            LayeredCircuit {
                root,
                num_vars: self.num_vars,
            },
            trace,
        ))
    }

    /// The projection operator: every variable of block `a` (a run of
    /// `group` consecutive indices) is replaced by one fresh variable `y_a`,
    /// with simplification (a gate seeing both `y_a` and its negation
    /// collapses to a constant).
    pub fn project(&self, group: usize) -> Result<Self> {
        if group == 0 || self.num_vars % group != 0 {
            return Err(Error::MissingBlockStructure(format!(
                "cannot split {} variables into blocks of {}",
                self.num_vars, group
            )));
        }
        fn apply(node: &Node, group: usize) -> Node {
            match node {
                Node::Const(b) => Node::Const(*b),
                Node::Literal { var, negated } => Node::Literal {
                    var: var / group,
                    negated: *negated,
                },
                Node::Gate { kind, children } => Node::Gate {
                    kind: *kind,
                    children: children.iter().map(|c| apply(c, group)).collect(),
                },
            }
        }
        let mut trace = SimplifyTrace::default();
        let root = simp(apply(&self.root, group), &mut trace);
        Ok(LayeredCircuit {
            root,
            num_vars: self.num_vars / group,
        })
    }

    /// proj_rho f = proj (f restricted by rho), where rho lives at a level
    /// whose blocks have width `group`.
    pub fn proj_restrict(&self, rho: &Restriction, group: usize) -> Result<Self> {
        self.restrict(rho)?.project(group)
    }

    /// Boolean dual dual(f)(x) = !f(!x): AND/OR swapped, constants negated,
    /// literals unchanged (negating both the output and the inputs cancels
    /// on every literal). An involution: `dual(dual(f)) == f`.
    pub fn dual(&self) -> Self {
        fn d(node: &Node) -> Node {
            match node {
                Node::Const(b) => Node::Const(!b),
                Node::Literal { var, negated } => Node::Literal {
                    var: *var,
                    negated: *negated,
                },
                Node::Gate { kind, children } => Node::Gate {
                    kind: kind.dual(),
                    children: children.iter().map(d).collect(),
                },
            }
        }
        LayeredCircuit {
            root: d(&self.root),
            num_vars: self.num_vars,
        }
    }

    /// Replace every bottom-level gate whose fan-in exceeds log2(size/eps)
    /// with its forcing constant (0 for AND, 1 for OR). Returns the trimmed
    /// circuit and the union-bound disagreement mass, which is at most eps.
    pub fn trim_bottom_fanin(
        &self,
        eps: &num::BigRational,
    ) -> Result<(Self, num::BigRational)> {
        use num::{BigInt, BigRational, One, Zero};
        if eps <= &BigRational::zero() || eps >= &BigRational::one() {
            return Err(Error::DomainMismatch(format!(
                "eps must be in (0,1), got {eps}"
            )));
        }
        let simplified = self.simplify();
        let size = BigRational::from(BigInt::from(simplified.size().max(1)));
        // fan-in phi is too large iff 2^phi > size/eps, i.e. 2^phi * eps > size
        let mut bound = BigRational::zero();
        fn walk(
            node: &Node,
            eps: &BigRational,
            size: &BigRational,
            bound: &mut BigRational,
        ) -> Node {
            match node {
                Node::Gate { kind, children }
                    if children.iter().all(|c| !matches!(c, Node::Gate { .. })) =>
                {
                    let phi = children.len();
                    let two_phi = BigRational::from(BigInt::one() << phi);
                    if &two_phi * eps > *size {
                        *bound += BigRational::new(BigInt::one(), BigInt::one() << phi);
                        Node::Const(matches!(kind, GateKind::Or))
                    } else {
                        node.clone()
                    }
                }
                Node::Gate { kind, children } => Node::Gate {
                    kind: *kind,
                    children: children
                        .iter()
                        .map(|c| walk(c, eps, size, bound))
                        .collect(),
                },
                _ => node.clone(),
            }
        }
        let root = walk(&simplified.root, eps, &size, &mut bound);
        let mut trace = SimplifyTrace::default();
        Ok((
            LayeredCircuit {
                root: simp(root, &mut trace),
                num_vars: self.num_vars,
            },
            bound,
        ))
    }

    /// Insert unary pass-through gates so that the circuit is layered and
    /// alternating with every leaf at the same depth.
    pub fn normalize_layered(&self) -> Self {
        let depth = self.depth().max(1);
        let top_kind = match &self.root {
            Node::Gate { kind, .. } => *kind,
            _ => GateKind::And,
        };
        fn pad(node: &Node, kind: GateKind, remaining: usize) -> Node {
            if remaining == 0 {
                debug_assert!(!matches!(node, Node::Gate { .. }));
                return node.clone();
            }
            let children = match node {
                Node::Gate { kind: k, children } if *k == kind => children
                    .iter()
                    .map(|c| pad(c, kind.dual(), remaining - 1))
                    .collect(),
                _ => vec![pad(node, kind.dual(), remaining - 1)],
            };
            Node::Gate { kind, children }
        }
        LayeredCircuit {
            root: pad(&self.root, top_kind, depth),
            num_vars: self.num_vars,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let normal = self.normalize_layered();
        let depth = normal.depth();
        let mut layers: Vec<LayerJson> = Vec::new();
        let mut leaves: Vec<LeafJson> = Vec::new();
        // Breadth-first over layers; children indices point into the next
        // layer (or into `leaves` for the last gate layer).
        let mut frontier: Vec<&Node> = vec![&normal.root];
        for level in 0..depth {
            let mut kind = None;
            let mut gates = Vec::new();
            let mut next: Vec<&Node> = Vec::new();
            for node in &frontier {
                match node {
                    Node::Gate { kind: k, children } => {
                        if kind.is_none() {
                            kind = Some(*k);
                        }
                        let mut idxs = Vec::with_capacity(children.len());
                        for c in children {
                            if level + 1 == depth {
                                idxs.push(leaves.len());
                                leaves.push(match c {
                                    Node::Const(b) => LeafJson::Const { value: *b },
                                    Node::Literal { var, negated } => LeafJson::Lit {
                                        var: *var,
                                        sign: if *negated { -1 } else { 1 },
                                    },
                                    Node::Gate { .. } => unreachable!("normalized"),
                                });
                            } else {
                                idxs.push(next.len());
                                next.push(c);
                            }
                        }
                        gates.push(idxs);
                    }
                    _ => unreachable!("normalized circuit has gates above leaves"),
                }
            }
            layers.push(LayerJson {
                kind: kind.unwrap_or(GateKind::And),
                gates,
            });
            frontier = next;
        }
        if depth == 0 {
            // constant or single-literal circuit: emit a single leaf
            leaves.push(match &normal.root {
                Node::Const(b) => LeafJson::Const { value: *b },
                Node::Literal { var, negated } => LeafJson::Lit {
                    var: *var,
                    sign: if *negated { -1 } else { 1 },
                },
                _ => unreachable!(),
            });
        }
        let doc = CircuitJson {
            depth,
            num_vars: self.num_vars,
            fan_ins: None,
            layers,
            leaves,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CircuitJson = serde_json::from_str(text)?;
        let leaf_nodes: Vec<Node> = doc
            .leaves
            .iter()
            .map(|l| match l {
                LeafJson::Const { value } => Node::Const(*value),
                LeafJson::Lit { var, sign } => Node::Literal {
                    var: *var,
                    negated: *sign < 0,
                },
            })
            .collect();
        let mut below: Vec<Node> = leaf_nodes;
        for layer in doc.layers.iter().rev() {
            let mut built = Vec::with_capacity(layer.gates.len());
            for gate in &layer.gates {
                let children: Result<Vec<Node>> = gate
                    .iter()
                    .map(|&i| {
                        below.get(i).cloned().ok_or_else(|| {
                            Error::Parse(format!("gate child index {i} out of range"))
                        })
                    })
                    .collect();
                built.push(Node::Gate {
                    kind: layer.kind,
                    children: children?,
                });
            }
            below = built;
        }
        if below.len() != 1 {
            return Err(Error::Parse(format!(
                "expected one root, found {}",
                below.len()
            )));
        }
        LayeredCircuit::new(below.pop().unwrap(), doc.num_vars)
    }
}

/// Circuit file format: layers of gates with children indices into the next
/// layer, and a final leaf array of signed literals or constants.
#[derive(Serialize, Deserialize)]
struct CircuitJson {
    depth: usize,
    num_vars: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    fan_ins: Option<Vec<usize>>,
    layers: Vec<LayerJson>,
    leaves: Vec<LeafJson>,
}

#[derive(Serialize, Deserialize)]
struct LayerJson {
    kind: GateKind,
    gates: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LeafJson {
    Lit { var: usize, sign: i8 },
    Const { value: bool },
}

fn simp(node: Node, trace: &mut SimplifyTrace) -> Node {
    match node {
        Node::Const(_) | Node::Literal { .. } => node,
        Node::Gate { kind, children } => {
            let mut flat: Vec<Node> = Vec::with_capacity(children.len());
            for child in children {
                let c = simp(child, trace);
                match c {
                    Node::Gate {
                        kind: ck,
                        children: gc,
                    } if ck == kind => {
                        trace.flattenings += 1;
                        flat.extend(gc);
                    }
                    other => flat.push(other),
                }
            }
            let dominant = kind.dominant();
            let mut kept: Vec<Node> = Vec::with_capacity(flat.len());
            for c in flat {
                match c {
                    Node::Const(b) if b == dominant => {
                        trace.constant_collapses += 1;
                        return Node::Const(dominant);
                    }
                    Node::Const(_) => {
                        trace.dropped_identities += 1;
                    }
                    other => {
                        if kept.contains(&other) {
                            trace.deduplications += 1;
                        } else {
                            kept.push(other);
                        }
                    }
                }
            }
            // a gate holding a literal and its negation is forced
            for c in &kept {
                if let Node::Literal { var, negated } = c {
                    let opposite = Node::Literal {
                        var: *var,
                        negated: !negated,
                    };
                    if kept.contains(&opposite) {
                        trace.complementary_collapses += 1;
                        return Node::Const(dominant);
                    }
                }
            }
            match kept.len() {
                0 => Node::Const(!dominant),
                1 => {
                    trace.unit_collapses += 1;
                    kept.pop().unwrap()
                }
                _ => Node::Gate {
                    kind,
                    children: kept,
                },
            }
        }
    }
}
