use super::rng::RngStream;
use super::stage::{StageDist, MAX_JOINT_SUPPORT};
use crate::circuits::{AddressSpace, LayeredCircuit};
use crate::error::{Error, Result};
use crate::params::ToyParams;
use crate::restrictions::{Restriction, Sym};
use num::{BigRational, One};

/// One draw of the adaptive multi-stage projection: the restrictions
/// rho^{(d)}, ..., rho^{(2)} with their lifts cached. Each rho^{(k)} refines
/// the lift of rho^{(k+1)}.
#[derive(Clone, Debug)]
pub struct PsiOutcome {
    /// rho[0] is at level d, rho[i] at level d - i, down to level 2.
    pub rho: Vec<Restriction>,
    /// lifts[i] = lift of rho[i], one level up.
    pub lifts: Vec<Restriction>,
    /// provenance when sampled: (seed, trial)
    pub provenance: Option<(u64, u64)>,
}

impl PsiOutcome {
    pub fn depth(&self) -> usize {
        self.rho.len() + 1
    }

    /// rho^{(k)} for 2 <= k <= d.
    pub fn rho_level(&self, k: usize) -> &Restriction {
        &self.rho[self.depth() - k]
    }

    /// lift of rho^{(k)}, at level k-1.
    pub fn lift_level(&self, k: usize) -> &Restriction {
        &self.lifts[self.depth() - k]
    }

    /// The lift of rho^{(2)}: the level-1 restriction the completed input
    /// percolates from.
    pub fn final_lift(&self) -> &Restriction {
        self.lifts.last().expect("at least one stage")
    }

    /// Check the refinement chain and per-block star-consistency
    /// (a block has a star iff its lift is a star).
    pub fn validate(&self, space: &AddressSpace) -> Result<()> {
        let d = space.depth();
        if self.rho.len() != d - 1 {
            return Err(Error::StructuralMismatch(format!(
                "expected {} stages, found {}",
                d - 1,
                self.rho.len()
            )));
        }
        for (i, rho) in self.rho.iter().enumerate() {
            let k = d - i;
            if rho.level() != k {
                return Err(Error::StructuralMismatch(format!(
                    "stage {i} is at level {}, expected {k}",
                    rho.level()
                )));
            }
            let lift = rho.lift(space)?;
            if &lift != &self.lifts[i] {
                return Err(Error::StructuralMismatch(format!(
                    "cached lift at stage {i} does not match"
                )));
            }
            if i > 0 && !rho.refines(&self.lifts[i - 1])? {
                return Err(Error::StructuralMismatch(format!(
                    "rho at level {k} does not refine the previous lift"
                )));
            }
            // star-consistency per block
            let w = space.fan_in(k - 1);
            for a in 0..lift.len() {
                let block_has_star = rho.block(w, a).iter().any(|s| s.is_star());
                if block_has_star != lift.get(a).is_star() {
                    return Err(Error::StructuralMismatch(format!(
                        "block {a} at level {k} breaks star-consistency"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Apply the whole projection to a function over the leaf level:
    /// proj_{rho^{(2)}} ... proj_{rho^{(d)}} f, a function over w_0
    /// variables.
    pub fn apply(&self, space: &AddressSpace, f: &LayeredCircuit) -> Result<LayeredCircuit> {
        let d = space.depth();
        if f.num_vars() != space.leaf_count() {
            return Err(Error::ArityMismatch {
                expected: space.leaf_count(),
                got: f.num_vars(),
            });
        }
        let mut current = f.clone();
        for (i, rho) in self.rho.iter().enumerate() {
            let k = d - i;
            current = current.proj_restrict(rho, space.fan_in(k - 1))?;
        }
        Ok(current)
    }
}

/// Draw one outcome of the adaptive chain: rho^{(d)} from the initial
/// stage, then rho^{(k)} refining the lift of rho^{(k+1)} for k = d-1
/// down to 2. For d = 2 the outcome is the single initial draw.
pub fn sample_psi(params: &ToyParams, rng: &mut RngStream) -> Result<PsiOutcome> {
    let space = params.space();
    let d = space.depth();
    let mut rho = Vec::with_capacity(d - 1);
    let mut lifts = Vec::with_capacity(d - 1);
    let first = StageDist::init(params)?.sample(rng)?;
    lifts.push(first.lift(&space)?);
    rho.push(first);
    for k in (2..d).rev() {
        let tau = lifts.last().unwrap().clone();
        debug_assert_eq!(tau.level(), k);
        let stage = StageDist::subsequent(params, &tau)?;
        let next = stage.sample(rng)?;
        lifts.push(next.lift(&space)?);
        rho.push(next);
    }
    Ok(PsiOutcome {
        rho,
        lifts,
        provenance: Some((rng.seed(), rng.trial())),
    })
}

/// Exact enumeration of the joint outcome space of all stages. Calls `f`
/// with each complete outcome and its exact mass; errors when the joint
/// support exceeds the enumeration cap.
pub fn for_each_psi(
    params: &ToyParams,
    f: &mut dyn FnMut(&PsiOutcome, &BigRational) -> Result<()>,
) -> Result<()> {
    let space = params.space();
    let d = space.depth();
    // conservative joint-support estimate: the initial stage size times the
    // worst-case size of each subsequent stage (every block live, all-star)
    let mut estimate = StageDist::init(params)?.support_size();
    for k in 2..d {
        let blocks = space.level_size(k - 1) as u32;
        let width = space.fan_in(k - 1) as u32;
        let per_block = (1u128 << (width + 1)) - 1;
        estimate = estimate.saturating_mul(per_block.saturating_pow(blocks));
    }
    if estimate > MAX_JOINT_SUPPORT {
        return Err(Error::ScaleExceeded {
            what: "joint projection support",
            size: estimate,
            cap: MAX_JOINT_SUPPORT,
        });
    }
    fn rec(
        params: &ToyParams,
        space: &AddressSpace,
        k: usize,
        rho_acc: &mut Vec<Restriction>,
        lift_acc: &mut Vec<Restriction>,
        mass: &BigRational,
        f: &mut dyn FnMut(&PsiOutcome, &BigRational) -> Result<()>,
    ) -> Result<()> {
        if k < 2 {
            let outcome = PsiOutcome {
                rho: rho_acc.clone(),
                lifts: lift_acc.clone(),
                provenance: None,
            };
            return f(&outcome, mass);
        }
        let stage = if k == space.depth() {
            StageDist::init(params)?
        } else {
            StageDist::subsequent(params, lift_acc.last().unwrap())?
        };
        stage.for_each_outcome(&mut |rho, stage_mass| {
            rho_acc.push(rho.clone());
            lift_acc.push(rho.lift(space)?);
            let total = mass * stage_mass;
            let r = rec(params, space, k - 1, rho_acc, lift_acc, &total, f);
            rho_acc.pop();
            lift_acc.pop();
            r
        })
    }
    rec(
        params,
        &space,
        d,
        &mut Vec::new(),
        &mut Vec::new(),
        &BigRational::one(),
        f,
    )
}

/// Deterministically percolate a bit assignment on the stars of the final
/// lift down to a full leaf assignment: each coordinate takes its stage's
/// fixed symbol, or inherits its parent's bit.
pub fn complete_to_assignment(
    space: &AddressSpace,
    psi: &PsiOutcome,
    y: &[bool],
) -> Result<Vec<bool>> {
    let final_lift = psi.final_lift();
    let stars = final_lift.star_positions();
    if y.len() != stars.len() {
        return Err(Error::DomainMismatch(format!(
            "{} bits supplied for {} stars",
            y.len(),
            stars.len()
        )));
    }
    let mut values: Vec<bool> = Vec::with_capacity(final_lift.len());
    let mut next_star = 0usize;
    for i in 0..final_lift.len() {
        match final_lift.get(i) {
            Sym::Star => {
                values.push(y[next_star]);
                next_star += 1;
            }
            s => values.push(s.bit().unwrap()),
        }
    }
    let d = space.depth();
    for k in 2..=d {
        let rho = psi.rho_level(k);
        let w = space.fan_in(k - 1);
        let mut level_values = Vec::with_capacity(space.level_size(k));
        for j in 0..space.level_size(k) {
            match rho.get(j) {
                Sym::Star => level_values.push(values[j / w]),
                s => level_values.push(s.bit().unwrap()),
            }
        }
        values = level_values;
    }
    Ok(values)
}

/// Mass of one star-completion: each star of the final lift takes the
/// level-1 bullet value with probability t_1.
pub fn y_mass(params: &ToyParams, y: &[bool]) -> BigRational {
    let space = params.space();
    let bullet1 = space.bullet_at(1);
    let t1 = params.t_k(1);
    y.iter()
        .map(|&bit| {
            if bit == bullet1 {
                t1.clone()
            } else {
                BigRational::one() - t1
            }
        })
        .product()
}

pub fn bits_to_index(bits: &[bool]) -> u64 {
    bits.iter()
        .enumerate()
        .fold(0u64, |acc, (i, &b)| if b { acc | 1 << i } else { acc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{build_toy_params, ToyTSpec};
    use crate::testutil::r;
    use num::Zero;
    use std::collections::BTreeMap;

    fn toy_d3() -> ToyParams {
        // t_1 = 3/4 keeps q_a within [0, 1 - lambda] for one- and two-star
        // blocks (t_1 = 1/2 would give q_a = 5/4 on single-star blocks)
        build_toy_params(
            vec![2, 2, 2],
            r(1, 8),
            r(1, 2),
            ToyTSpec::Explicit(vec![r(3, 4)]),
            BTreeMap::new(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn d2_outcome_is_a_single_initial_draw() {
        let params = build_toy_params(
            vec![3, 2],
            r(1, 8),
            r(1, 2),
            ToyTSpec::Explicit(vec![]),
            BTreeMap::new(),
            0,
        )
        .unwrap();
        let mut rng = RngStream::new(5);
        let psi = sample_psi(&params, &mut rng).unwrap();
        assert_eq!(psi.rho.len(), 1);
        assert_eq!(psi.rho[0].level(), 2);
        psi.validate(&params.space()).unwrap();
    }

    #[test]
    fn refinement_chain_holds_on_many_draws() {
        let params = toy_d3();
        let space = params.space();
        for trial in 0..500 {
            let mut rng = RngStream::child(11, trial);
            let psi = sample_psi(&params, &mut rng).unwrap();
            psi.validate(&space).unwrap();
            assert!(psi
                .rho_level(2)
                .refines(psi.lift_level(3))
                .unwrap());
        }
    }

    #[test]
    fn identical_seed_and_trial_reproduce_the_outcome() {
        let params = toy_d3();
        let a = sample_psi(&params, &mut RngStream::child(3, 9)).unwrap();
        let b = sample_psi(&params, &mut RngStream::child(3, 9)).unwrap();
        assert_eq!(a.rho, b.rho);
    }

    #[test]
    fn joint_enumeration_total_mass_is_one() {
        let params = toy_d3();
        let mut total = BigRational::zero();
        for_each_psi(&params, &mut |psi, mass| {
            psi.validate(&params.space())?;
            total += mass;
            Ok(())
        })
        .unwrap();
        assert_eq!(total, r(1, 1));
    }

    #[test]
    fn percolation_rules() {
        let params = toy_d3();
        let space = params.space();
        // all-star stages percolate y everywhere
        let all3 = Restriction::all_star(&space, 3).unwrap();
        let all2 = Restriction::all_star(&space, 2).unwrap();
        let psi = PsiOutcome {
            lifts: vec![all3.lift(&space).unwrap(), all2.lift(&space).unwrap()],
            rho: vec![all3, all2],
            provenance: None,
        };
        let x = complete_to_assignment(&space, &psi, &[true, true]).unwrap();
        assert_eq!(x, vec![true; 8]);
        let x0 = complete_to_assignment(&space, &psi, &[true, false]).unwrap();
        assert_eq!(x0, vec![true, true, true, true, false, false, false, false]);
        // wrong star count is a domain error
        assert!(complete_to_assignment(&space, &psi, &[true]).is_err());
    }

    #[test]
    fn d2_block_percolation_example() {
        // block "1*" with the star completed by y = 0 gives bits (1, 0)
        let params = build_toy_params(
            vec![1, 2],
            r(1, 8),
            r(1, 2),
            ToyTSpec::Explicit(vec![]),
            BTreeMap::new(),
            0,
        )
        .unwrap();
        let space = params.space();
        let rho = Restriction::parse("L2: 1*").unwrap().0;
        let psi = PsiOutcome {
            lifts: vec![rho.lift(&space).unwrap()],
            rho: vec![rho],
            provenance: None,
        };
        assert_eq!(psi.final_lift().star_count(), 1);
        let x = complete_to_assignment(&space, &psi, &[false]).unwrap();
        assert_eq!(x, vec![true, false]);
    }
}
