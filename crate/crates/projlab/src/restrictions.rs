//! Block-structured restriction strings over {0,1,*} and the structural
//! operators on them: refinement, composition, lift, acceptability windows,
//! and typicality.
//!
//! Symbols are stored as plain {0,1,*}; the bullet/circ reading is a view
//! parameterized by the level parity of the owning [`AddressSpace`], never a
//! second storage format.

use crate::circuits::{AddressSpace, GateKind};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sym {
    Zero,
    One,
    Star,
}

impl Sym {
    pub fn from_bit(b: bool) -> Sym {
        if b {
            Sym::One
        } else {
            Sym::Zero
        }
    }

    pub fn bit(self) -> Option<bool> {
        match self {
            Sym::Zero => Some(false),
            Sym::One => Some(true),
            Sym::Star => None,
        }
    }

    pub fn is_star(self) -> bool {
        self == Sym::Star
    }

    pub fn to_char(self) -> char {
        match self {
            Sym::Zero => '0',
            Sym::One => '1',
            Sym::Star => '*',
        }
    }

    pub fn from_char(c: char) -> Result<Sym> {
        match c {
            '0' => Ok(Sym::Zero),
            '1' => Ok(Sym::One),
            '*' => Ok(Sym::Star),
            other => Err(Error::Parse(format!("bad restriction symbol {other:?}"))),
        }
    }
}

/// A restriction at level `k`: a string over {0,1,*} indexed by `A_k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Restriction {
    level: usize,
    syms: Vec<Sym>,
}

impl Restriction {
    pub fn new(level: usize, syms: Vec<Sym>) -> Self {
        Restriction { level, syms }
    }

    /// All-star restriction sized for level `k` of `space`.
    pub fn all_star(space: &AddressSpace, level: usize) -> Result<Self> {
        space.check_level(level)?;
        Ok(Restriction {
            level,
            syms: vec![Sym::Star; space.level_size(level)],
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.syms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.syms.is_empty()
    }

    pub fn get(&self, i: usize) -> Sym {
        self.syms[i]
    }

    pub fn set(&mut self, i: usize, s: Sym) {
        self.syms[i] = s;
    }

    pub fn syms(&self) -> &[Sym] {
        &self.syms
    }

    pub fn star_count(&self) -> usize {
        self.syms.iter().filter(|s| s.is_star()).count()
    }

    pub fn star_positions(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.syms[i].is_star()).collect()
    }

    /// Coordinates of block `a` when blocks have width `w`.
    pub fn block(&self, w: usize, a: usize) -> &[Sym] {
        &self.syms[a * w..(a + 1) * w]
    }

    pub fn num_blocks(&self, w: usize) -> usize {
        debug_assert_eq!(self.len() % w, 0);
        self.len() / w
    }

    fn check_compatible(&self, other: &Restriction) -> Result<()> {
        if self.level != other.level || self.len() != other.len() {
            return Err(Error::LevelMismatch {
                left: self.level,
                right: other.level,
            });
        }
        Ok(())
    }

    /// True iff `self` fixes everything `rho` fixes, the same way.
    pub fn refines(&self, rho: &Restriction) -> Result<bool> {
        self.check_compatible(rho)?;
        Ok(self
            .syms
            .iter()
            .zip(&rho.syms)
            .all(|(t, r)| r.is_star() || t == r))
    }

    /// Composition: keeps `self`'s fixed symbols, fills its stars from `rho2`.
    pub fn compose(&self, rho2: &Restriction) -> Result<Restriction> {
        self.check_compatible(rho2)?;
        let syms = self
            .syms
            .iter()
            .zip(&rho2.syms)
            .map(|(r, r2)| if r.is_star() { *r2 } else { *r })
            .collect();
        Ok(Restriction {
            level: self.level,
            syms,
        })
    }

    /// The lift: the value each gate one level up takes under `self`.
    /// For AND gates a block lifts to 0 if it contains a 0, to 1 if it is
    /// all-ones, and to * otherwise; dually for OR gates.
    pub fn lift(&self, space: &AddressSpace) -> Result<Restriction> {
        if self.level < 2 || self.level > space.depth() {
            return Err(Error::LevelOutOfRange {
                level: self.level,
                depth: space.depth(),
            });
        }
        let w = space.fan_in(self.level - 1);
        let kind = space.gate_kind(self.level - 1);
        let blocks = self.len() / w;
        let mut out = Vec::with_capacity(blocks);
        for a in 0..blocks {
            out.push(lift_block(self.block(w, a), kind));
        }
        Ok(Restriction {
            level: self.level - 1,
            syms: out,
        })
    }

    /// The restriction (eta -> pi) at level `k`: every coordinate of a block
    /// listed in `pi` receives that block's bit (independent of the
    /// within-block index); all other coordinates stay starred.
    pub fn eta_to_pi(
        level: usize,
        num_blocks: usize,
        width: usize,
        pi: &BTreeMap<usize, bool>,
    ) -> Result<Restriction> {
        let mut syms = vec![Sym::Star; num_blocks * width];
        for (&a, &bit) in pi {
            if a >= num_blocks {
                return Err(Error::DomainMismatch(format!(
                    "block {a} outside 0..{num_blocks}"
                )));
            }
            for i in 0..width {
                syms[a * width + i] = Sym::from_bit(bit);
            }
        }
        Ok(Restriction { level, syms })
    }

    /// Text format: `L<k>: <block>/<block>/...` with symbols in {0,1,*}.
    pub fn format(&self, width: usize) -> String {
        let blocks: Vec<String> = (0..self.num_blocks(width))
            .map(|a| self.block(width, a).iter().map(|s| s.to_char()).collect())
            .collect();
        format!("L{}: {}", self.level, blocks.join("/"))
    }

    /// Parse the text format; returns the restriction and the block width
    /// inferred from the block lengths.
    pub fn parse(text: &str) -> Result<(Restriction, usize)> {
        let text = text.trim();
        let rest = text
            .strip_prefix('L')
            .ok_or_else(|| Error::Parse("restriction must start with 'L<level>:'".into()))?;
        let (level_str, body) = rest
            .split_once(':')
            .ok_or_else(|| Error::Parse("missing ':' after level header".into()))?;
        let level: usize = level_str
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("bad level: {e}")))?;
        let mut width = None;
        let mut syms = Vec::new();
        for block in body.trim().split('/') {
            let block = block.trim();
            match width {
                None => width = Some(block.len()),
                Some(w) if w != block.len() => {
                    return Err(Error::Parse(format!(
                        "ragged blocks: {w} vs {}",
                        block.len()
                    )))
                }
                _ => {}
            }
            for c in block.chars() {
                syms.push(Sym::from_char(c)?);
            }
        }
        let width = width.filter(|&w| w > 0).ok_or_else(|| {
            Error::Parse("restriction must contain at least one nonempty block".into())
        })?;
        Ok((Restriction { level, syms }, width))
    }

    /// Complement every fixed symbol (stars unchanged).
    pub fn complement_fixed(&self) -> Restriction {
        let syms = self
            .syms
            .iter()
            .map(|s| match s {
                Sym::Zero => Sym::One,
                Sym::One => Sym::Zero,
                Sym::Star => Sym::Star,
            })
            .collect();
        Restriction {
            level: self.level,
            syms,
        }
    }
}

impl fmt::Display for Restriction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}: ", self.level)?;
        for s in &self.syms {
            write!(f, "{}", s.to_char())?;
        }
        Ok(())
    }
}

fn lift_block(block: &[Sym], kind: GateKind) -> Sym {
    match kind {
        GateKind::And => {
            if block.contains(&Sym::Zero) {
                Sym::Zero
            } else if block.iter().all(|s| *s == Sym::One) {
                Sym::One
            } else {
                Sym::Star
            }
        }
        GateKind::Or => {
            if block.contains(&Sym::One) {
                Sym::One
            } else if block.iter().all(|s| *s == Sym::Zero) {
                Sym::Zero
            } else {
                Sym::Star
            }
        }
    }
}

/// An integer window for acceptable star-set sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptabilityWindow {
    pub lo: usize,
    pub hi: usize,
}

impl AcceptabilityWindow {
    pub fn toy(lo: usize, hi: usize) -> Self {
        AcceptabilityWindow { lo, hi }
    }

    /// Window accepting every nonempty star set of a width-`w` block.
    pub fn all(w: usize) -> Self {
        AcceptabilityWindow { lo: 1, hi: w }
    }

    pub fn contains(&self, s: usize) -> bool {
        self.lo <= s && s <= self.hi
    }
}

/// Outcome of the typicality check: per-condition failure lists plus the
/// derived consequence that condition 1 forces every lifted block into
/// {*, circ} symbols.
#[derive(Clone, Debug, Serialize)]
pub struct TypicalityReport {
    pub level: usize,
    /// blocks `a` whose star count lies outside the window
    pub cond1_failures: Vec<usize>,
    /// lifted blocks `alpha` with too few stars
    pub cond2_failures: Vec<usize>,
    /// lifted blocks containing a bullet symbol (cannot happen when
    /// condition 1 holds with a window whose lower end is >= 1)
    pub derived_violations: Vec<usize>,
    pub verdict: bool,
}

/// Typicality of a level-`k` restriction, `2 <= k <= d-1`: (1) every block's
/// star count lies in the window; (2) every block of the lift keeps at least
/// `cond2_threshold` stars.
pub fn is_typical(
    space: &AddressSpace,
    tau: &Restriction,
    window: &AcceptabilityWindow,
    cond2_threshold: usize,
) -> Result<TypicalityReport> {
    let k = tau.level();
    if k < 2 || k > space.depth() - 1 {
        return Err(Error::LevelOutOfRange {
            level: k,
            depth: space.depth(),
        });
    }
    let w = space.fan_in(k - 1);
    let mut cond1_failures = Vec::new();
    for a in 0..tau.num_blocks(w) {
        let stars = tau.block(w, a).iter().filter(|s| s.is_star()).count();
        if !window.contains(stars) {
            cond1_failures.push(a);
        }
    }
    let lifted = tau.lift(space)?;
    let w_up = space.fan_in(k - 2);
    let circ_up = Sym::from_bit(space.circ_at(k - 1));
    let mut cond2_failures = Vec::new();
    let mut derived_violations = Vec::new();
    for alpha in 0..lifted.num_blocks(w_up) {
        let block = lifted.block(w_up, alpha);
        let stars = block.iter().filter(|s| s.is_star()).count();
        if stars < cond2_threshold {
            cond2_failures.push(alpha);
        }
        if block.iter().any(|s| !s.is_star() && *s != circ_up) {
            derived_violations.push(alpha);
        }
    }
    let verdict = cond1_failures.is_empty() && cond2_failures.is_empty();
    Ok(TypicalityReport {
        level: k,
        cond1_failures,
        cond2_failures,
        derived_violations,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rstr(text: &str) -> Restriction {
        Restriction::parse(text).unwrap().0
    }

    #[test]
    fn refinement_examples() {
        let rho = rstr("L1: 1**");
        let tau = rstr("L1: 10*");
        assert!(tau.refines(&rho).unwrap());
        assert!(!rho.refines(&tau).unwrap());
        assert!(tau.refines(&tau).unwrap());
    }

    #[test]
    fn composition_fills_stars_and_refines() {
        let rho = rstr("L1: 1**");
        let rho2 = rstr("L1: 000");
        let c = rho.compose(&rho2).unwrap();
        assert_eq!(c, rstr("L1: 100"));
        assert!(c.refines(&rho).unwrap());
        // composing with all-star changes nothing
        let id = rstr("L1: ***");
        assert_eq!(rho.compose(&id).unwrap(), rho);
    }

    #[test]
    fn compose_is_associative_on_samples() {
        let a = rstr("L2: 1**0/*1**");
        let b = rstr("L2: *01*/0***");
        let c = rstr("L2: 0000/1111");
        let left = a.compose(&b).unwrap().compose(&c).unwrap();
        let right = a.compose(&b.compose(&c).unwrap()).unwrap();
        assert_eq!(left, right);
    }

    #[test]
    fn lift_rules_for_and_and_or_rows() {
        // depth 3, level 3: bottom gates AND
        let sp = AddressSpace::new(vec![2, 2, 3]).unwrap();
        let tau = Restriction::new(
            3,
            "01*111000***"
                .chars()
                .map(|c| Sym::from_char(c).unwrap())
                .collect(),
        );
        let lifted = tau.lift(&sp).unwrap();
        assert_eq!(lifted.syms()[0], Sym::Zero); // AND with a 0 input
        assert_eq!(lifted.syms()[1], Sym::One); // AND of all ones
        assert_eq!(lifted.syms()[2], Sym::Zero);
        assert_eq!(lifted.syms()[3], Sym::Star); // undetermined
        assert_eq!(lifted.level(), 2);

        // level 2 of the same space: gates at depth 1 are OR
        let tau2 = Restriction::new(
            2,
            "00*0"
                .chars()
                .map(|c| Sym::from_char(c).unwrap())
                .collect(),
        );
        let lifted2 = tau2.lift(&sp).unwrap();
        assert_eq!(lifted2.syms()[0], Sym::Zero); // OR of all zeros
        assert_eq!(lifted2.syms()[1], Sym::Star);
    }

    #[test]
    fn lift_level_bounds() {
        let sp = AddressSpace::new(vec![2, 2]).unwrap();
        let r1 = Restriction::new(1, vec![Sym::Star, Sym::Star]);
        assert!(matches!(
            r1.lift(&sp),
            Err(Error::LevelOutOfRange { .. })
        ));
    }

    #[test]
    fn eta_to_pi_sets_whole_blocks() {
        let mut pi = BTreeMap::new();
        pi.insert(1usize, true);
        let r = Restriction::eta_to_pi(2, 3, 3, &pi).unwrap();
        assert_eq!(r, rstr("L2: ***/111/***"));
        let empty = Restriction::eta_to_pi(2, 3, 3, &BTreeMap::new()).unwrap();
        assert_eq!(empty.star_count(), 9);
        let mut bad = BTreeMap::new();
        bad.insert(7usize, false);
        assert!(Restriction::eta_to_pi(2, 3, 3, &bad).is_err());
    }

    #[test]
    fn text_format_round_trip() {
        let (r, w) = Restriction::parse("L3: 01*/**1/111").unwrap();
        assert_eq!(w, 3);
        assert_eq!(r.level(), 3);
        assert_eq!(r.format(3), "L3: 01*/**1/111");
    }

    #[test]
    fn typicality_report_flags_fixed_blocks() {
        let sp = AddressSpace::new(vec![2, 2, 2]).unwrap();
        // level 2, blocks of width 2; gates at depth 1 are OR (circ = 0)
        let window = AcceptabilityWindow::toy(1, 2);
        let good = rstr("L2: 0*/*0");
        let rep = is_typical(&sp, &good, &window, 2).unwrap();
        assert!(rep.verdict, "{rep:?}");
        // one block fully fixed to circ symbols: condition-1 failure
        let bad = rstr("L2: 00/*0");
        let rep = is_typical(&sp, &bad, &window, 0).unwrap();
        assert_eq!(rep.cond1_failures, vec![0]);
        assert!(!rep.verdict);
    }

    #[test]
    fn typicality_matches_hand_coded_checker() {
        // independent re-statement of the definition, for cross-checking
        fn oracle(
            sp: &AddressSpace,
            tau: &Restriction,
            win: &AcceptabilityWindow,
            thresh: usize,
        ) -> bool {
            let w = sp.fan_in(tau.level() - 1);
            let c1 = (0..tau.num_blocks(w)).all(|a| {
                let s = tau.block(w, a).iter().filter(|x| x.is_star()).count();
                win.contains(s)
            });
            let lifted = tau.lift(sp).unwrap();
            let wu = sp.fan_in(tau.level() - 2);
            let c2 = (0..lifted.num_blocks(wu)).all(|al| {
                lifted.block(wu, al).iter().filter(|x| x.is_star()).count() >= thresh
            });
            c1 && c2
        }
        let sp = AddressSpace::new(vec![2, 3, 2]).unwrap();
        let window = AcceptabilityWindow::toy(1, 3);
        let cases = [
            "L2: 0**/**0",
            "L2: 000/***",
            "L2: *0*/0*0",
            "L2: ***/***",
            "L2: 1**/**0",
        ];
        for text in cases {
            let tau = rstr(text);
            let rep = is_typical(&sp, &tau, &window, 2).unwrap();
            assert_eq!(rep.verdict, oracle(&sp, &tau, &window, 2), "{text}");
        }
    }
}
