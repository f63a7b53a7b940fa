use super::address::GateKind;
use super::circuit::{LayeredCircuit, Node};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Dnf,
    Cnf,
}

impl Polarity {
    pub fn dual(self) -> Polarity {
        match self {
            Polarity::Dnf => Polarity::Cnf,
            Polarity::Cnf => Polarity::Dnf,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub var: usize,
    pub negated: bool,
}

/// A DNF or CNF over block-structured variables: variable `a * width + i`
/// is coordinate `i` of block `a`. Literals inside every term are kept
/// sorted by variable index; term order is the file order. Both orderings
/// are part of the format contract (the switching-lemma encoder and decoder
/// rely on them).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwoLevelFormula {
    polarity: Polarity,
    terms: Vec<Vec<Literal>>,
    num_vars: usize,
    block_width: usize,
}

impl TwoLevelFormula {
    pub fn new(
        polarity: Polarity,
        mut terms: Vec<Vec<Literal>>,
        num_vars: usize,
        block_width: usize,
    ) -> Result<Self> {
        if block_width == 0 || num_vars % block_width != 0 {
            return Err(Error::MissingBlockStructure(format!(
                "{num_vars} variables do not split into blocks of {block_width}"
            )));
        }
        for term in &mut terms {
            if term.iter().any(|l| l.var >= num_vars) {
                return Err(Error::IndexMismatch(format!(
                    "literal variable out of range (num_vars = {num_vars})"
                )));
            }
            term.sort();
        }
        Ok(TwoLevelFormula {
            polarity,
            terms,
            num_vars,
            block_width,
        })
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn terms(&self) -> &[Vec<Literal>] {
        &self.terms
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_blocks(&self) -> usize {
        self.num_vars / self.block_width
    }

    pub fn block_width(&self) -> usize {
        self.block_width
    }

    /// Maximum term/clause length.
    pub fn width(&self) -> usize {
        self.terms.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Boolean dual dual(F)(x) = !F(!x): polarity swapped with the literal
    /// sets unchanged, so a width-r DNF becomes a width-r CNF and vice
    /// versa.
    pub fn dual(&self) -> TwoLevelFormula {
        TwoLevelFormula {
            polarity: self.polarity.dual(),
            terms: self.terms.clone(),
            num_vars: self.num_vars,
            block_width: self.block_width,
        }
    }

    pub fn to_circuit(&self) -> LayeredCircuit {
        let (top, bottom) = match self.polarity {
            Polarity::Dnf => (GateKind::Or, GateKind::And),
            Polarity::Cnf => (GateKind::And, GateKind::Or),
        };
        let children: Vec<Node> = self
            .terms
            .iter()
            .map(|term| Node::Gate {
                kind: bottom,
                children: term
                    .iter()
                    .map(|l| Node::Literal {
                        var: l.var,
                        negated: l.negated,
                    })
                    .collect(),
            })
            .collect();
        let root = Node::Gate {
            kind: top,
            children,
        };
        LayeredCircuit::new(root, self.num_vars).expect("literals validated at construction")
    }

    pub fn evaluate(&self, x: u64) -> bool {
        let term_val = |term: &[Literal]| {
            term.iter()
                .all(|l| (x >> l.var & 1 == 1) != l.negated)
        };
        match self.polarity {
            Polarity::Dnf => self.terms.iter().any(|t| term_val(t)),
            // a CNF clause is an OR: satisfied unless every literal is false
            Polarity::Cnf => self
                .terms
                .iter()
                .all(|t| t.iter().any(|l| (x >> l.var & 1 == 1) != l.negated)),
        }
    }

    /// Text format: one term per line, literals as signed 1-based
    /// `block.index` pairs, e.g. `a1.2 -a3.1`. The `a` prefix is optional on
    /// input and emitted on output.
    pub fn parse(text: &str, polarity: Polarity, block_width: usize, num_blocks: usize) -> Result<Self> {
        let mut terms = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut term = Vec::new();
            for tok in line.split_whitespace() {
                let (negated, body) = match tok.strip_prefix('-') {
                    Some(rest) => (true, rest),
                    None => (false, tok),
                };
                let body = body.strip_prefix('a').unwrap_or(body);
                let (b, i) = body.split_once('.').ok_or_else(|| {
                    Error::Parse(format!("literal {tok:?} is not block.index"))
                })?;
                let block: usize = b
                    .parse()
                    .map_err(|e| Error::Parse(format!("bad block in {tok:?}: {e}")))?;
                let idx: usize = i
                    .parse()
                    .map_err(|e| Error::Parse(format!("bad index in {tok:?}: {e}")))?;
                if block == 0 || idx == 0 {
                    return Err(Error::Parse(format!("{tok:?} must be 1-based")));
                }
                if block > num_blocks || idx > block_width {
                    return Err(Error::Parse(format!(
                        "{tok:?} outside {num_blocks} blocks of width {block_width}"
                    )));
                }
                term.push(Literal {
                    var: (block - 1) * block_width + (idx - 1),
                    negated,
                });
            }
            terms.push(term);
        }
        TwoLevelFormula::new(polarity, terms, num_blocks * block_width, block_width)
    }

    pub fn format(&self) -> String {
        let mut out = String::new();
        for term in &self.terms {
            let toks: Vec<String> = term
                .iter()
                .map(|l| {
                    format!(
                        "{}a{}.{}",
                        if l.negated { "-" } else { "" },
                        l.var / self.block_width + 1,
                        l.var % self.block_width + 1
                    )
                })
                .collect();
            out.push_str(&toks.join(" "));
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for TwoLevelFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.format().trim_end())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::ProductDistribution;

    fn lit(var: usize, negated: bool) -> Literal {
        Literal { var, negated }
    }

    #[test]
    fn width_and_dual() {
        let f = TwoLevelFormula::new(
            Polarity::Dnf,
            vec![vec![lit(0, false), lit(3, true)], vec![lit(2, false)]],
            4,
            2,
        )
        .unwrap();
        assert_eq!(f.width(), 2);
        let d = f.dual();
        assert_eq!(d.polarity(), Polarity::Cnf);
        assert_eq!(d.width(), 2);
        assert_eq!(d.dual(), f);
    }

    #[test]
    fn dual_truth_table_is_negated_reflection() {
        let f = TwoLevelFormula::new(
            Polarity::Dnf,
            vec![
                vec![lit(0, false), lit(1, false)],
                vec![lit(1, true), lit(2, false)],
            ],
            3,
            1,
        )
        .unwrap();
        let fc = f.to_circuit();
        let dc = f.dual().to_circuit();
        let t = fc.truth_table().unwrap();
        let td = dc.truth_table().unwrap();
        for x in 0u64..8 {
            assert_eq!(td.get(x), !t.get(!x & 7));
        }
    }

    #[test]
    fn formula_and_circuit_agree() {
        let f = TwoLevelFormula::new(
            Polarity::Cnf,
            vec![
                vec![lit(0, false), lit(2, true)],
                vec![lit(1, false)],
            ],
            4,
            2,
        )
        .unwrap();
        let c = f.to_circuit();
        for x in 0u64..16 {
            assert_eq!(f.evaluate(x), c.evaluate(x));
        }
    }

    #[test]
    fn empty_formulas_are_constants() {
        let zero = TwoLevelFormula::new(Polarity::Dnf, vec![], 2, 1).unwrap();
        assert!(!zero.evaluate(0) && !zero.evaluate(3));
        let one = zero.dual();
        assert!(one.evaluate(0) && one.evaluate(3));
        // dual of constant 1 (DNF with an empty term) is constant 0
        let c1 = TwoLevelFormula::new(Polarity::Dnf, vec![vec![]], 2, 1).unwrap();
        assert!(c1.evaluate(0));
        assert!(!c1.dual().evaluate(0));
        let d = ProductDistribution::uniform(2);
        assert_eq!(
            c1.dual().to_circuit().truth_table().unwrap().prob_one(&d),
            num::BigRational::from(num::BigInt::from(0))
        );
    }

    #[test]
    fn text_format_round_trip() {
        let text = "a1.2 -a3.1\na2.1 a2.2\n";
        let f = TwoLevelFormula::parse(text, Polarity::Dnf, 2, 3).unwrap();
        assert_eq!(f.format(), text);
        assert_eq!(f.terms()[0], vec![lit(1, false), lit(4, true)]);
        assert!(TwoLevelFormula::parse("a4.1", Polarity::Dnf, 2, 3).is_err());
        assert!(TwoLevelFormula::parse("a0.1", Polarity::Dnf, 2, 3).is_err());
    }
}
