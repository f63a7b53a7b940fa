use super::rng::RngStream;
use crate::error::{Error, Result};
use crate::params::{compute_qa, pow_int, ToyParams};
use crate::restrictions::{AcceptabilityWindow, Restriction, Sym};
use num::{BigRational, One, Zero};

/// Joint support cap for exact enumeration.
pub const MAX_JOINT_SUPPORT: u128 = 100_000_000;

/// Default block-width cap for the exposed block-enumeration operation.
pub const DEFAULT_BLOCK_ENUM_CAP: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageKind {
    /// The opening stage at level d: every block is live with q_a = q and
    /// within-block symbol bias 1/2.
    Init,
    /// A subsequent stage at level 2 <= k <= d-1, refining a given tau.
    Subsequent,
}

/// How one block is treated by the stage distribution.
#[derive(Clone, Debug, PartialEq)]
pub enum Branch {
    /// No stars in tau's block: nothing is drawn.
    Untouched,
    /// The block holds a bullet or its star set is unacceptable: the stars
    /// get a plain {bullet_t, circ_{1-t}} product.
    Dead,
    /// The three-way mixture: all-circ with probability lambda, a
    /// conditioned {*, circ} product with probability q_a, a conditioned
    /// {bullet, circ} product otherwise.
    Live { qa: BigRational },
}

/// One projection stage: the distribution over refinements of `tau` at a
/// fixed level, with exact per-block probability mass functions.
#[derive(Clone, Debug)]
pub struct StageDist {
    kind: StageKind,
    level: usize,
    block_width: usize,
    num_blocks: usize,
    circ: Sym,
    bullet: Sym,
    /// within-level symbol bias: t_k (1/2 for the initial stage)
    t_stage: BigRational,
    /// completion bias one level up: stars complete to the level-(k-1)
    /// bullet value with probability t_{k-1}
    t_next: BigRational,
    /// numeric value of the bullet symbol one level up
    completion_bullet: bool,
    lambda: BigRational,
    window: AcceptabilityWindow,
    tau: Restriction,
    branches: Vec<Branch>,
}

impl StageDist {
    pub fn init(params: &ToyParams) -> Result<Self> {
        let space = params.space();
        let d = space.depth();
        let level = d;
        let width = space.fan_in(d - 1);
        let tau = Restriction::all_star(&space, level)?;
        let num_blocks = space.level_size(d - 1);
        let qa = params.q.clone();
        let t_stage = BigRational::new(1.into(), 2.into());
        let stage = StageDist {
            kind: StageKind::Init,
            level,
            block_width: width,
            num_blocks,
            circ: Sym::from_bit(space.circ_at(level)),
            bullet: Sym::from_bit(space.bullet_at(level)),
            t_stage,
            t_next: params.t_k(d - 1).clone(),
            completion_bullet: space.bullet_at(d - 1),
            lambda: params.lambda.clone(),
            window: AcceptabilityWindow::all(width),
            tau,
            branches: vec![Branch::Live { qa }; num_blocks],
        };
        stage.validate_qa()?;
        Ok(stage)
    }

    /// The refinement distribution over `tau` at level k = tau.level(),
    /// 2 <= k <= d-1.
    pub fn subsequent(params: &ToyParams, tau: &Restriction) -> Result<Self> {
        let space = params.space();
        let k = tau.level();
        if k < 2 || k > space.depth() - 1 {
            return Err(Error::LevelOutOfRange {
                level: k,
                depth: space.depth(),
            });
        }
        let width = space.fan_in(k - 1);
        if tau.len() != space.level_size(k) {
            return Err(Error::StructuralMismatch(format!(
                "tau has {} coordinates, level {k} has {}",
                tau.len(),
                space.level_size(k)
            )));
        }
        let num_blocks = space.level_size(k - 1);
        let bullet = Sym::from_bit(space.bullet_at(k));
        let window = params.window(k);
        let t_k = params.t_k(k).clone();
        let t_km1 = params.t_k(k - 1).clone();
        let mut branches = Vec::with_capacity(num_blocks);
        for a in 0..num_blocks {
            let block = tau.block(width, a);
            let stars = block.iter().filter(|s| s.is_star()).count();
            let branch = if stars == 0 {
                Branch::Untouched
            } else if block.contains(&bullet) || !window.contains(stars) {
                Branch::Dead
            } else {
                Branch::Live {
                    qa: compute_qa(&t_k, &t_km1, &params.lambda, stars),
                }
            };
            branches.push(branch);
        }
        let stage = StageDist {
            kind: StageKind::Subsequent,
            level: k,
            block_width: width,
            num_blocks,
            circ: Sym::from_bit(space.circ_at(k)),
            bullet,
            t_stage: t_k,
            t_next: t_km1,
            completion_bullet: space.bullet_at(k - 1),
            lambda: params.lambda.clone(),
            window,
            tau: tau.clone(),
            branches,
        };
        stage.validate_qa()?;
        Ok(stage)
    }

    fn validate_qa(&self) -> Result<()> {
        let limit = BigRational::one() - &self.lambda;
        for (a, b) in self.branches.iter().enumerate() {
            if let Branch::Live { qa } = b {
                if qa < &BigRational::zero() || qa > &limit {
                    return Err(Error::InvalidQa {
                        block: a,
                        value: qa.to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    /// The dual stage: every symbol complemented. Applying this stage to a
    /// formula is equivalent to applying the original to the formula with
    /// all inputs negated.
    pub fn dual(&self) -> Self {
        StageDist {
            kind: self.kind,
            level: self.level,
            block_width: self.block_width,
            num_blocks: self.num_blocks,
            circ: flip(self.circ),
            bullet: flip(self.bullet),
            t_stage: self.t_stage.clone(),
            t_next: self.t_next.clone(),
            completion_bullet: !self.completion_bullet,
            lambda: self.lambda.clone(),
            window: self.window,
            tau: self.tau.complement_fixed(),
            branches: self.branches.clone(),
        }
    }

    pub fn kind(&self) -> StageKind {
        self.kind
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn block_width(&self) -> usize {
        self.block_width
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn circ(&self) -> Sym {
        self.circ
    }

    pub fn bullet(&self) -> Sym {
        self.bullet
    }

    pub fn tau(&self) -> &Restriction {
        &self.tau
    }

    pub fn branch(&self, a: usize) -> &Branch {
        &self.branches[a]
    }

    pub fn t_stage(&self) -> &BigRational {
        &self.t_stage
    }

    pub fn t_next(&self) -> &BigRational {
        &self.t_next
    }

    pub fn lambda(&self) -> &BigRational {
        &self.lambda
    }

    pub fn completion_bullet(&self) -> bool {
        self.completion_bullet
    }

    fn star_positions(&self, a: usize) -> Vec<usize> {
        let base = a * self.block_width;
        self.tau
            .block(self.block_width, a)
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_star())
            .map(|(i, _)| base + i)
            .collect()
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<Restriction> {
        let mut out = self.tau.clone();
        for a in 0..self.num_blocks {
            let stars = self.star_positions(a);
            match &self.branches[a] {
                Branch::Untouched => {}
                Branch::Dead => {
                    for &pos in &stars {
                        let sym = if rng.bernoulli(&self.t_stage) {
                            self.bullet
                        } else {
                            self.circ
                        };
                        out.set(pos, sym);
                    }
                }
                Branch::Live { qa } => {
                    let cum = [self.lambda.clone(), &self.lambda + qa];
                    match rng.pick(&cum) {
                        0 => {
                            for &pos in &stars {
                                out.set(pos, self.circ);
                            }
                        }
                        1 => self.conditioned_product(rng, &mut out, &stars, Sym::Star),
                        _ => self.conditioned_product(rng, &mut out, &stars, self.bullet),
                    }
                }
            }
        }
        Ok(out)
    }

    /// Rejection-sample a {sym_t, circ_{1-t}} product on the star positions,
    /// conditioned on not being all-circ.
    fn conditioned_product(
        &self,
        rng: &mut RngStream,
        out: &mut Restriction,
        stars: &[usize],
        sym: Sym,
    ) {
        loop {
            let mut any = false;
            for &pos in stars {
                if rng.bernoulli(&self.t_stage) {
                    out.set(pos, sym);
                    any = true;
                } else {
                    out.set(pos, self.circ);
                }
            }
            if any {
                return;
            }
        }
    }

    /// Exact probability of drawing `rho` from this stage; 0 for outcomes
    /// outside the support, an error for restrictions that are not
    /// refinements of tau at the right level.
    pub fn pmf(&self, rho: &Restriction) -> Result<BigRational> {
        if rho.level() != self.level || rho.len() != self.tau.len() {
            return Err(Error::StructuralMismatch(format!(
                "rho at level {} with {} coordinates; stage needs level {} with {}",
                rho.level(),
                rho.len(),
                self.level,
                self.tau.len()
            )));
        }
        if !rho.refines(&self.tau)? {
            return Err(Error::StructuralMismatch(
                "rho does not refine the stage's tau".into(),
            ));
        }
        let mut mass = BigRational::one();
        for a in 0..self.num_blocks {
            let stars = self.star_positions(a);
            let values: Vec<Sym> = stars.iter().map(|&p| rho.get(p)).collect();
            mass *= self.block_mass(a, &values);
            if mass.is_zero() {
                return Ok(mass);
            }
        }
        Ok(mass)
    }

    /// Mass of one block's drawn values (over tau's star positions only).
    fn block_mass(&self, a: usize, values: &[Sym]) -> BigRational {
        let s = values.len();
        let n_star = values.iter().filter(|v| **v == Sym::Star).count();
        let n_bullet = values.iter().filter(|v| **v == self.bullet).count();
        let n_circ = s - n_star - n_bullet;
        let t = &self.t_stage;
        let one_minus_t = BigRational::one() - t;
        match &self.branches[a] {
            Branch::Untouched => BigRational::one(),
            Branch::Dead => {
                if n_star > 0 {
                    BigRational::zero()
                } else {
                    pow_int(t, n_bullet) * pow_int(&one_minus_t, n_circ)
                }
            }
            Branch::Live { qa } => {
                let denom = BigRational::one() - pow_int(&one_minus_t, s);
                if n_star == 0 && n_bullet == 0 {
                    self.lambda.clone()
                } else if n_bullet == 0 {
                    qa * pow_int(t, n_star) * pow_int(&one_minus_t, n_circ) / denom
                } else if n_star == 0 {
                    (BigRational::one() - &self.lambda - qa)
                        * pow_int(t, n_bullet)
                        * pow_int(&one_minus_t, n_circ)
                        / denom
                } else {
                    // a block never mixes stars and bullets
                    BigRational::zero()
                }
            }
        }
    }

    /// Full support of one block (as complete width-w blocks, fixed symbols
    /// included) with exact masses.
    pub fn enumerate_block(&self, a: usize, width_cap: usize) -> Result<BlockDistribution> {
        let stars = self.star_positions(a);
        if self.block_width > width_cap {
            return Err(Error::ScaleExceeded {
                what: "block width for enumeration",
                size: self.block_width as u128,
                cap: width_cap as u128,
            });
        }
        let base = a * self.block_width;
        let fixed: Vec<Sym> = self.tau.block(self.block_width, a).to_vec();
        let mut outcomes = Vec::new();
        let s = stars.len();
        let mut push = |values: &[Sym], mass: BigRational| {
            if mass.is_zero() {
                return;
            }
            let mut block = fixed.clone();
            for (j, &pos) in stars.iter().enumerate() {
                block[pos - base] = values[j];
            }
            outcomes.push((block, mass));
        };
        match &self.branches[a] {
            Branch::Untouched => push(&[], BigRational::one()),
            Branch::Dead => {
                for bits in 0u64..1 << s {
                    let values: Vec<Sym> = (0..s)
                        .map(|j| {
                            if bits >> j & 1 == 1 {
                                self.bullet
                            } else {
                                self.circ
                            }
                        })
                        .collect();
                    let mass = self.block_mass(a, &values);
                    push(&values, mass);
                }
            }
            Branch::Live { .. } => {
                // all-circ
                push(&vec![self.circ; s], self.lambda.clone());
                // conditioned {*, circ} and {bullet, circ} products
                for sym in [Sym::Star, self.bullet] {
                    for bits in 1u64..1 << s {
                        let values: Vec<Sym> = (0..s)
                            .map(|j| if bits >> j & 1 == 1 { sym } else { self.circ })
                            .collect();
                        let mass = self.block_mass(a, &values);
                        push(&values, mass);
                    }
                }
            }
        }
        Ok(BlockDistribution {
            block: a,
            width: self.block_width,
            outcomes,
        })
    }

    /// Number of support outcomes per block, for joint-support estimates.
    pub fn block_support_size(&self, a: usize) -> u128 {
        let s = self.star_positions(a).len() as u32;
        match &self.branches[a] {
            Branch::Untouched => 1,
            Branch::Dead => 1u128 << s,
            Branch::Live { .. } => (1u128 << (s + 1)) - 1,
        }
    }

    pub fn support_size(&self) -> u128 {
        (0..self.num_blocks)
            .map(|a| self.block_support_size(a))
            .fold(1u128, |acc, n| acc.saturating_mul(n))
    }

    /// Visit every outcome of the stage with its exact mass.
    pub fn for_each_outcome(
        &self,
        f: &mut dyn FnMut(&Restriction, &BigRational) -> Result<()>,
    ) -> Result<()> {
        let size = self.support_size();
        if size > MAX_JOINT_SUPPORT {
            return Err(Error::ScaleExceeded {
                what: "stage support",
                size,
                cap: MAX_JOINT_SUPPORT,
            });
        }
        let per_block: Vec<BlockDistribution> = (0..self.num_blocks)
            .map(|a| self.enumerate_block(a, 26))
            .collect::<Result<_>>()?;
        let mut current = self.tau.clone();
        fn rec(
            stage: &StageDist,
            per_block: &[BlockDistribution],
            a: usize,
            mass: BigRational,
            current: &mut Restriction,
            f: &mut dyn FnMut(&Restriction, &BigRational) -> Result<()>,
        ) -> Result<()> {
            if a == per_block.len() {
                return f(current, &mass);
            }
            let base = a * stage.block_width;
            for (block, block_mass) in &per_block[a].outcomes {
                for (i, sym) in block.iter().enumerate() {
                    current.set(base + i, *sym);
                }
                rec(stage, per_block, a + 1, &mass * block_mass, current, f)?;
            }
            // restore tau's symbols for this block
            for i in 0..stage.block_width {
                current.set(base + i, stage.tau.get(base + i));
            }
            Ok(())
        }
        rec(self, &per_block, 0, BigRational::one(), &mut current, f)
    }

    /// Exact pushforward of one block under "draw, then complete stars with
    /// a shared biased bit": the distribution over {0,1}^{S_a} indexed by
    /// the block's star positions in order.
    pub fn block_completion_pushforward(&self, a: usize) -> Result<Vec<BigRational>> {
        let stars = self.star_positions(a);
        let s = stars.len();
        let base = a * self.block_width;
        let dist = self.enumerate_block(a, 26)?;
        let mut push = vec![BigRational::zero(); 1 << s];
        let index_of = |block: &[Sym], star_bit: bool| -> usize {
            let mut idx = 0usize;
            for (j, &pos) in stars.iter().enumerate() {
                let bit = match block[pos - base] {
                    Sym::One => true,
                    Sym::Zero => false,
                    Sym::Star => star_bit,
                };
                if bit {
                    idx |= 1 << j;
                }
            }
            idx
        };
        for (block, mass) in &dist.outcomes {
            let has_star = block.iter().any(|s| s.is_star());
            if has_star {
                for bit in [false, true] {
                    let factor = if bit == self.completion_bullet {
                        self.t_next.clone()
                    } else {
                        BigRational::one() - &self.t_next
                    };
                    push[index_of(block, bit)] += mass * factor;
                }
            } else {
                push[index_of(block, false)] += mass;
            }
        }
        Ok(push)
    }

    /// The product distribution each completed block should match: every
    /// coordinate equals the level's bullet value with probability t_stage.
    pub fn completion_target(&self, a: usize) -> Vec<BigRational> {
        let s = self.star_positions(a).len();
        let bullet_bit = self.bullet == Sym::One;
        (0..1u64 << s)
            .map(|bits| {
                let mut mass = BigRational::one();
                for j in 0..s {
                    let bit = bits >> j & 1 == 1;
                    mass *= if bit == bullet_bit {
                        self.t_stage.clone()
                    } else {
                        BigRational::one() - &self.t_stage
                    };
                }
                mass
            })
            .collect()
    }
}

fn flip(s: Sym) -> Sym {
    match s {
        Sym::Zero => Sym::One,
        Sym::One => Sym::Zero,
        Sym::Star => Sym::Star,
    }
}

/// Enumerated support of one block with exact masses.
#[derive(Clone, Debug)]
pub struct BlockDistribution {
    pub block: usize,
    pub width: usize,
    pub outcomes: Vec<(Vec<Sym>, BigRational)>,
}

impl BlockDistribution {
    pub fn total_mass(&self) -> BigRational {
        self.outcomes.iter().map(|(_, m)| m.clone()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{build_toy_params, ToyTSpec};
    use crate::testutil::r;
    use num::ToPrimitive;
    use std::collections::BTreeMap;

    fn toy_m2() -> ToyParams {
        // m=2, lambda=1/8, q=1/2, t_1 = (p - lambda)/q = 1/4 at depth 2
        build_toy_params(
            vec![2, 2],
            r(1, 8),
            r(1, 2),
            ToyTSpec::Explicit(vec![]),
            BTreeMap::new(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn init_block_support_has_seven_outcomes_for_m2() {
        let params = toy_m2();
        let stage = StageDist::init(&params).unwrap();
        let dist = stage.enumerate_block(0, 6).unwrap();
        assert_eq!(dist.outcomes.len(), 7);
        assert_eq!(dist.total_mass(), r(1, 1));
        // Pr[block = "11"] = lambda
        let all_ones = dist
            .outcomes
            .iter()
            .find(|(b, _)| b.iter().all(|s| *s == Sym::One))
            .unwrap();
        assert_eq!(all_ones.1, r(1, 8));
        // Pr[block = "**"] = q * (1/4) / (3/4) = 1/6
        let all_star = dist
            .outcomes
            .iter()
            .find(|(b, _)| b.iter().all(|s| *s == Sym::Star))
            .unwrap();
        assert_eq!(all_star.1, r(1, 6));
    }

    #[test]
    fn enumerated_masses_match_pmf() {
        let params = toy_m2();
        let stage = StageDist::init(&params).unwrap();
        let mut total = r(0, 1);
        stage
            .for_each_outcome(&mut |rho, mass| {
                assert_eq!(&stage.pmf(rho).unwrap(), mass);
                total += mass;
                Ok(())
            })
            .unwrap();
        assert_eq!(total, r(1, 1));
    }

    #[test]
    fn init_completion_is_exactly_uniform() {
        let params = toy_m2();
        let stage = StageDist::init(&params).unwrap();
        let push = stage.block_completion_pushforward(0).unwrap();
        assert_eq!(push, vec![r(1, 4); 4]);
        assert_eq!(push, stage.completion_target(0));
    }

    #[test]
    fn subsequent_stage_branches_and_completion() {
        // depth 3 toy with explicit t_1
        let params = build_toy_params(
            vec![2, 2, 2],
            r(1, 8),
            r(1, 2),
            ToyTSpec::Explicit(vec![r(1, 2)]),
            BTreeMap::new(),
            0,
        )
        .unwrap();
        // tau at level 2 (circ = 0, bullet = 1 there): one live block with
        // two stars, one dead block containing a bullet
        let tau = Restriction::parse("L2: **/1*").unwrap().0;
        let stage = StageDist::subsequent(&params, &tau).unwrap();
        assert!(matches!(stage.branch(0), Branch::Live { .. }));
        assert_eq!(stage.branch(1), &Branch::Dead);
        // per-block completion matches the biased product exactly
        for a in 0..2 {
            let push = stage.block_completion_pushforward(a).unwrap();
            assert_eq!(push, stage.completion_target(a), "block {a}");
        }
        // pmf of an impossible outcome (star and bullet mixed in a block)
        let rho = Restriction::parse("L2: *1/11").unwrap().0;
        assert_eq!(stage.pmf(&rho).unwrap(), r(0, 1));
        // non-refinements are structural errors
        let bad = Restriction::parse("L2: **/0*").unwrap().0;
        assert!(stage.pmf(&bad).is_err());
    }

    #[test]
    fn sampled_frequencies_match_pmf_within_4_sigma() {
        let params = toy_m2();
        let stage = StageDist::init(&params).unwrap();
        let dist = stage.enumerate_block(0, 6).unwrap();
        let trials = 100_000u64;
        let mut rng = RngStream::new(2024);
        let mut counts = vec![0u64; dist.outcomes.len()];
        for _ in 0..trials {
            let rho = stage.sample(&mut rng).unwrap();
            let block: Vec<Sym> = rho.block(2, 0).to_vec();
            let idx = dist
                .outcomes
                .iter()
                .position(|(b, _)| *b == block)
                .expect("sample inside enumerated support");
            counts[idx] += 1;
        }
        for (i, (_, mass)) in dist.outcomes.iter().enumerate() {
            let p = mass.to_f64().unwrap();
            let sigma = (p * (1.0 - p) / trials as f64).sqrt();
            let freq = counts[i] as f64 / trials as f64;
            assert!(
                (freq - p).abs() <= 4.0 * sigma,
                "outcome {i}: freq {freq}, p {p}"
            );
        }
    }

    #[test]
    fn invalid_qa_is_rejected() {
        // t_k = 1/4, t_{k-1} = 1/4, lambda = 1/8, s = 2 gives q_a = 7/4
        let params = build_toy_params(
            vec![2, 2, 2],
            r(1, 8),
            r(1, 2),
            ToyTSpec::Explicit(vec![r(1, 4)]),
            BTreeMap::new(),
            0,
        )
        .unwrap();
        let tau = Restriction::parse("L2: **/**").unwrap().0;
        match StageDist::subsequent(&params, &tau) {
            Err(Error::InvalidQa { value, .. }) => assert_eq!(value, "7/4"),
            other => panic!("expected InvalidQa, got {other:?}"),
        }
    }
}
