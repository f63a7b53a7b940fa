use super::projdt::{
    eta_blocks, first_nonfalsified, leftmost_deep_path, term_status, TermStatus,
};
use crate::circuits::{Literal, Polarity, TwoLevelFormula};
use crate::error::{Error, Result};
use crate::restrictions::{Restriction, Sym};
use crate::samplers::{Branch, StageDist};
use crate::switching::canonical_tree_depth;
use serde::{Deserialize, Serialize};

/// The witness produced for a bad restriction: the refined restriction
/// rho-sigma, the first s path bits, the eta stream (a ceil(log2 r)-bit
/// term position plus a last-in-group flag per eta variable), and one
/// length-r mask per stage marking the term positions sigma sets to the
/// circ value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodeRecord {
    pub rho_sigma: Restriction,
    pub path_bits: Vec<bool>,
    pub eta_bits: Vec<bool>,
    pub gamma_masks: Vec<Vec<bool>>,
}

pub fn ceil_log2(r: usize) -> usize {
    debug_assert!(r >= 1);
    (usize::BITS - (r - 1).leading_zeros()) as usize
}

fn satisfying_bit(l: &Literal) -> bool {
    !l.negated
}

struct StageRec {
    term_idx: usize,
    /// kept eta blocks, ascending
    eta: Vec<usize>,
    /// sigma assignments (variable, value)
    sigma: Vec<(usize, Sym)>,
    /// per eta variable: position in the term of its first unfixed literal
    positions: Vec<usize>,
    /// term positions sigma sets to circ
    gamma_positions: Vec<usize>,
}

fn check_stage_context(stage: &StageDist, f: &TwoLevelFormula) -> Result<()> {
    if f.polarity() != Polarity::Dnf {
        return Err(Error::StructuralMismatch(
            "the encoder takes a DNF; dualize a CNF together with its stage".into(),
        ));
    }
    if f.block_width() != stage.block_width() || f.num_blocks() != stage.num_blocks() {
        return Err(Error::StructuralMismatch(format!(
            "formula over {} blocks of width {}, stage over {} of width {}",
            f.num_blocks(),
            f.block_width(),
            stage.num_blocks(),
            stage.block_width()
        )));
    }
    Ok(())
}

/// Encode a bad restriction: one whose canonical projection tree for
/// f restricted by rho has a path of length >= s. The record identifies
/// rho uniquely among all bad restrictions (see `decode_record`).
pub fn encode_bad_restriction(
    stage: &StageDist,
    f: &TwoLevelFormula,
    s: usize,
    rho: &Restriction,
) -> Result<EncodeRecord> {
    check_stage_context(stage, f)?;
    if s == 0 {
        return Err(Error::DomainMismatch("s must be at least 1".into()));
    }
    if rho.level() != stage.level() || !rho.refines(stage.tau())? {
        return Err(Error::StructuralMismatch(
            "rho must refine the stage's tau at the stage's level".into(),
        ));
    }
    let r = f.width().max(1);
    let width = f.block_width();
    let path = match leftmost_deep_path(f, Some(rho), s)? {
        Some(p) => p,
        None => {
            return Err(Error::NotBad {
                depth: canonical_tree_depth(f, Some(rho))?,
                s,
            })
        }
    };
    let circ = stage.circ();
    let bullet = stage.bullet();

    let mut cur: Vec<Sym> = rho.syms().to_vec();
    let mut stages: Vec<StageRec> = Vec::new();
    let mut pos = 0usize;
    while pos < s {
        let (term_idx, status) = first_nonfalsified(f, &cur)
            .ok_or_else(|| Error::StructuralMismatch("path outlives the formula".into()))?;
        if status != TermStatus::Live {
            return Err(Error::StructuralMismatch(
                "satisfied term reached before the path was consumed".into(),
            ));
        }
        let term = &f.terms()[term_idx];
        let full_eta = eta_blocks(term, &cur, width);
        let take = full_eta.len().min(s - pos);
        let eta: Vec<usize> = full_eta[..take].to_vec();

        // support claims for every touched block: live branch, and rho's
        // drawn values sit in {*, circ} with at least one star
        for &a in &eta {
            if !matches!(stage.branch(a), Branch::Live { .. }) {
                return Err(Error::StructuralMismatch(format!(
                    "block {a} holds an unfixed literal but is not live in the stage"
                )));
            }
            let mut saw_star = false;
            for i in 0..width {
                let v = a * width + i;
                if stage.tau().get(v).is_star() {
                    match rho.get(v) {
                        Sym::Star => saw_star = true,
                        sym if sym == bullet => {
                            return Err(Error::StructuralMismatch(format!(
                                "block {a} mixes stars and bullets; outside the support"
                            )))
                        }
                        _ => {}
                    }
                }
            }
            if !saw_star {
                return Err(Error::StructuralMismatch(format!(
                    "block {a} was expected to hold a star"
                )));
            }
        }

        // positions of the first unfixed literal per eta variable, from the
        // pre-pi hybrid
        let positions: Vec<usize> = eta
            .iter()
            .map(|&a| {
                term.iter()
                    .position(|l| l.var / width == a && cur[l.var].is_star())
                    .expect("eta blocks hold an unfixed literal")
            })
            .collect();

        // sigma: satisfy the term's unfixed literals, push every other star
        // of a kept block to the bullet value
        let mut sigma: Vec<(usize, Sym)> = Vec::new();
        let mut gamma_positions: Vec<usize> = Vec::new();
        for &a in &eta {
            for i in 0..width {
                let v = a * width + i;
                if cur[v] != Sym::Star {
                    continue;
                }
                let occurring = term.iter().find(|l| l.var == v);
                let value = match occurring {
                    Some(l) => Sym::from_bit(satisfying_bit(l)),
                    None => bullet,
                };
                sigma.push((v, value));
            }
        }
        for (p, l) in term.iter().enumerate() {
            if cur[l.var].is_star()
                && eta.contains(&(l.var / width))
                && Sym::from_bit(satisfying_bit(l)) == circ
            {
                gamma_positions.push(p);
            }
        }

        stages.push(StageRec {
            term_idx,
            eta: eta.clone(),
            sigma,
            positions,
            gamma_positions,
        });

        // advance the hybrid: whole kept blocks take their path bits
        for (j, &a) in eta.iter().enumerate() {
            let bit = path[pos + j];
            for i in 0..width {
                let v = a * width + i;
                if cur[v].is_star() {
                    cur[v] = Sym::from_bit(bit);
                }
            }
        }
        pos += take;
    }

    // assemble rho-sigma
    let mut rho_sigma = rho.clone();
    for st in &stages {
        for &(v, sym) in &st.sigma {
            rho_sigma.set(v, sym);
        }
    }

    // instrumented check: with pi applied before stage l and sigma from
    // stage l on, term l is satisfied for l < j and not falsified for l = j
    for (l, st) in stages.iter().enumerate() {
        let mut hybrid: Vec<Sym> = rho.syms().to_vec();
        let mut consumed = 0usize;
        for earlier in &stages[..l] {
            for (j, &a) in earlier.eta.iter().enumerate() {
                let bit = path[consumed + j];
                for i in 0..width {
                    let v = a * width + i;
                    if hybrid[v].is_star() {
                        hybrid[v] = Sym::from_bit(bit);
                    }
                }
            }
            consumed += earlier.eta.len();
        }
        for later in &stages[l..] {
            for &(v, sym) in &later.sigma {
                hybrid[v] = sym;
            }
        }
        let status = term_status(&f.terms()[st.term_idx], &hybrid);
        let ok = if l + 1 < stages.len() {
            status == TermStatus::Satisfied
        } else {
            status != TermStatus::Falsified
        };
        if !ok {
            return Err(Error::StructuralMismatch(format!(
                "stage {l}: term {} not in the expected state under the hybrid",
                st.term_idx
            )));
        }
    }

    // serialize eta and gamma streams
    let bits_per = ceil_log2(r);
    let mut eta_bits = Vec::with_capacity(s * (bits_per + 1));
    let mut gamma_masks = Vec::with_capacity(stages.len());
    for st in &stages {
        for (j, &p) in st.positions.iter().enumerate() {
            for b in (0..bits_per).rev() {
                eta_bits.push(p >> b & 1 == 1);
            }
            eta_bits.push(j + 1 == st.positions.len());
        }
        let mut mask = vec![false; r];
        for &p in &st.gamma_positions {
            mask[p] = true;
        }
        gamma_masks.push(mask);
    }

    Ok(EncodeRecord {
        rho_sigma,
        path_bits: path[..s].to_vec(),
        eta_bits,
        gamma_masks,
    })
}

/// Recover the bad restriction from its record: identify each stage's term
/// as the first one not falsified by the hybrid, read the eta group and
/// gamma mask, undo sigma (bullets and gamma-marked positions go back to
/// stars), splice the path bits, and finally restore all eta-block stars.
pub fn decode_record(
    stage: &StageDist,
    f: &TwoLevelFormula,
    s: usize,
    record: &EncodeRecord,
) -> Result<Restriction> {
    check_stage_context(stage, f)?;
    let r = f.width().max(1);
    let width = f.block_width();
    let bits_per = ceil_log2(r);
    if record.path_bits.len() != s {
        return Err(Error::MalformedRecord(format!(
            "path carries {} bits, s = {s}",
            record.path_bits.len()
        )));
    }
    if record.rho_sigma.level() != stage.level()
        || record.rho_sigma.len() != stage.tau().len()
    {
        return Err(Error::MalformedRecord("rho-sigma at the wrong level".into()));
    }
    let bullet = stage.bullet();
    let mut cur: Vec<Sym> = record.rho_sigma.syms().to_vec();
    let mut eta_cursor = 0usize;
    let mut consumed = 0usize;
    let mut stage_idx = 0usize;
    let mut undo_sets: Vec<(usize, Vec<usize>)> = Vec::new();

    while consumed < s {
        let (term_idx, _) = first_nonfalsified(f, &cur).ok_or_else(|| {
            Error::MalformedRecord("no live term while stages remain".into())
        })?;
        let term = &f.terms()[term_idx];

        // parse one eta group
        let mut group: Vec<usize> = Vec::new();
        loop {
            if eta_cursor + bits_per + 1 > record.eta_bits.len() {
                return Err(Error::MalformedRecord("eta stream exhausted".into()));
            }
            let mut p = 0usize;
            for _ in 0..bits_per {
                p = p << 1 | record.eta_bits[eta_cursor] as usize;
                eta_cursor += 1;
            }
            let last = record.eta_bits[eta_cursor];
            eta_cursor += 1;
            if p >= term.len() {
                return Err(Error::MalformedRecord(format!(
                    "position {p} outside term {term_idx}"
                )));
            }
            let block = term[p].var / width;
            if group.contains(&block) {
                return Err(Error::MalformedRecord(format!(
                    "block {block} repeated inside one eta group"
                )));
            }
            group.push(block);
            if last {
                break;
            }
        }
        if consumed + group.len() > s {
            return Err(Error::MalformedRecord("eta groups overrun s".into()));
        }
        for (a, _) in &undo_sets {
            if group.contains(a) {
                return Err(Error::MalformedRecord(format!(
                    "block {a} repeated across stages"
                )));
            }
        }

        // gamma mask for this stage
        let mask = record
            .gamma_masks
            .get(stage_idx)
            .ok_or_else(|| Error::MalformedRecord("missing gamma mask".into()))?;
        if mask.len() != r {
            return Err(Error::MalformedRecord(format!(
                "gamma mask of length {}, expected {r}",
                mask.len()
            )));
        }
        let mut gamma_vars: Vec<usize> = Vec::new();
        for (p, &set) in mask.iter().enumerate() {
            if !set {
                continue;
            }
            if p >= term.len() {
                return Err(Error::MalformedRecord(format!(
                    "gamma marks position {p} outside term {term_idx}"
                )));
            }
            let var = term[p].var;
            if !group.contains(&(var / width)) {
                return Err(Error::MalformedRecord(format!(
                    "gamma marks a variable outside the eta group (term position {p})"
                )));
            }
            gamma_vars.push(var);
        }

        // undo sigma, then splice the path bits
        for (j, &a) in group.iter().enumerate() {
            let mut stars = Vec::new();
            for i in 0..width {
                let v = a * width + i;
                if cur[v] == bullet || gamma_vars.contains(&v) {
                    cur[v] = Sym::Star;
                    stars.push(v);
                }
            }
            let bit = record.path_bits[consumed + j];
            for &v in &stars {
                cur[v] = Sym::from_bit(bit);
            }
            undo_sets.push((a, stars));
        }
        consumed += group.len();
        stage_idx += 1;
    }

    if eta_cursor != record.eta_bits.len() {
        return Err(Error::MalformedRecord("trailing eta bits".into()));
    }
    if stage_idx != record.gamma_masks.len() {
        return Err(Error::MalformedRecord("trailing gamma masks".into()));
    }
    // final pass: all eta-block stars back to stars
    for (_, stars) in &undo_sets {
        for &v in stars {
            cur[v] = Sym::Star;
        }
    }
    Ok(Restriction::new(record.rho_sigma.level(), cur))
}

/// JSON form of a record, with bit strings hex-packed (low bit first within
/// each byte).
#[derive(Serialize, Deserialize)]
pub struct EncodeRecordJson {
    pub rho_sigma: String,
    pub block_width: usize,
    pub s: usize,
    pub path: String,
    pub eta_bits: usize,
    pub eta_hex: String,
    pub gamma_len: usize,
    pub gamma_hex: Vec<String>,
}

pub fn bits_to_hex(bits: &[bool]) -> String {
    let mut out = String::new();
    for chunk in bits.chunks(8) {
        let mut byte = 0u8;
        for (i, &b) in chunk.iter().enumerate() {
            if b {
                byte |= 1 << i;
            }
        }
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

pub fn hex_to_bits(hex: &str, len: usize) -> Result<Vec<bool>> {
    if hex.len() != len.div_ceil(8) * 2 {
        return Err(Error::Parse(format!(
            "hex string of {} digits cannot hold {len} bits",
            hex.len()
        )));
    }
    let mut bits = Vec::with_capacity(len);
    for (i, pair) in hex.as_bytes().chunks(2).enumerate() {
        let byte = u8::from_str_radix(std::str::from_utf8(pair).unwrap(), 16)
            .map_err(|e| Error::Parse(format!("bad hex: {e}")))?;
        for j in 0..8 {
            if 8 * i + j < len {
                bits.push(byte >> j & 1 == 1);
            }
        }
    }
    Ok(bits)
}

impl EncodeRecord {
    pub fn to_json(&self, block_width: usize) -> EncodeRecordJson {
        EncodeRecordJson {
            rho_sigma: self.rho_sigma.format(block_width),
            block_width,
            s: self.path_bits.len(),
            path: self
                .path_bits
                .iter()
                .map(|&b| if b { '1' } else { '0' })
                .collect(),
            eta_bits: self.eta_bits.len(),
            eta_hex: bits_to_hex(&self.eta_bits),
            gamma_len: self.gamma_masks.first().map_or(0, Vec::len),
            gamma_hex: self.gamma_masks.iter().map(|m| bits_to_hex(m)).collect(),
        }
    }

    pub fn from_json(doc: &EncodeRecordJson) -> Result<Self> {
        let (rho_sigma, _) = Restriction::parse(&doc.rho_sigma)?;
        let path_bits: Vec<bool> = doc
            .path
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("bad path bit {other:?}"))),
            })
            .collect::<Result<_>>()?;
        Ok(EncodeRecord {
            rho_sigma,
            path_bits,
            eta_bits: hex_to_bits(&doc.eta_hex, doc.eta_bits)?,
            gamma_masks: doc
                .gamma_hex
                .iter()
                .map(|h| hex_to_bits(h, doc.gamma_len))
                .collect::<Result<_>>()?,
        })
    }
}
