use crate::error::{Error, Result};
use num::{BigInt, BigRational, One, Zero};

/// Variable-count cap for exact truth tables (2^24 entries).
pub const MAX_TT_VARS: usize = 24;

/// A bit-packed truth table over `nvars <= 24` variables. Entry `x` is the
/// function value at the assignment whose variable `i` equals bit `i` of `x`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TruthTable {
    nvars: usize,
    bits: Vec<u64>,
}

impl std::fmt::Debug for TruthTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TruthTable({} vars, {})", self.nvars, self.to_hex())
    }
}

impl TruthTable {
    pub fn from_fn(nvars: usize, mut f: impl FnMut(u64) -> bool) -> Result<Self> {
        Self::check_scale(nvars)?;
        let len = 1u64 << nvars;
        let words = len.div_ceil(64) as usize;
        let mut bits = vec![0u64; words];
        for x in 0..len {
            if f(x) {
                bits[(x / 64) as usize] |= 1 << (x % 64);
            }
        }
        Ok(TruthTable { nvars, bits })
    }

    fn check_scale(nvars: usize) -> Result<()> {
        if nvars > MAX_TT_VARS {
            return Err(Error::ScaleExceeded {
                what: "truth table variables",
                size: nvars as u128,
                cap: MAX_TT_VARS as u128,
            });
        }
        Ok(())
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn len(&self) -> u64 {
        1u64 << self.nvars
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, x: u64) -> bool {
        debug_assert!(x < self.len());
        self.bits[(x / 64) as usize] >> (x % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> u64 {
        let tail = self.len() % 64;
        let mut total: u64 = self.bits.iter().map(|w| w.count_ones() as u64).sum();
        if tail != 0 {
            // mask out bits beyond the table length in the last word
            let last = *self.bits.last().unwrap();
            total -= (last & !((1u64 << tail) - 1)).count_ones() as u64;
        }
        total
    }

    pub fn is_constant(&self) -> Option<bool> {
        let ones = self.count_ones();
        if ones == 0 {
            Some(false)
        } else if ones == self.len() {
            Some(true)
        } else {
            None
        }
    }

    pub fn xor(&self, other: &TruthTable) -> Result<TruthTable> {
        if self.nvars != other.nvars {
            return Err(Error::ArityMismatch {
                expected: self.nvars,
                got: other.nvars,
            });
        }
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| a ^ b)
            .collect();
        Ok(TruthTable {
            nvars: self.nvars,
            bits,
        })
    }

    /// Hex export: bits packed little-endian into bytes (bit `j` of byte `i`
    /// is entry `8i + j`), bytes printed in order as two lowercase hex
    /// digits each. Tables shorter than a byte occupy one byte.
    pub fn to_hex(&self) -> String {
        let nbytes = std::cmp::max(1, (self.len() as usize).div_ceil(8));
        let mut s = String::with_capacity(nbytes * 2);
        for i in 0..nbytes {
            let byte = (self.bits[i / 8] >> (8 * (i % 8))) as u8;
            s.push_str(&format!("{byte:02x}"));
        }
        s
    }

    pub fn from_hex(nvars: usize, hex: &str) -> Result<Self> {
        Self::check_scale(nvars)?;
        let len = 1u64 << nvars;
        let nbytes = std::cmp::max(1, (len as usize).div_ceil(8));
        if hex.len() != nbytes * 2 {
            return Err(Error::Parse(format!(
                "expected {} hex digits for {} variables, got {}",
                nbytes * 2,
                nvars,
                hex.len()
            )));
        }
        let mut bits = vec![0u64; (len.div_ceil(64)) as usize];
        for i in 0..nbytes {
            let byte = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16)
                .map_err(|e| Error::Parse(format!("bad hex byte: {e}")))?;
            if 8 * i < len as usize {
                bits[i / 8] |= (byte as u64) << (8 * (i % 8));
            }
        }
        let table = TruthTable { nvars, bits };
        // reject set bits beyond the declared length
        if table.count_ones() != table.bits.iter().map(|w| w.count_ones() as u64).sum::<u64>()
            && len >= 64
        {
            return Err(Error::Parse("set bits beyond table length".into()));
        }
        Ok(table)
    }

    /// Pr_D[f = 1] as an exact rational.
    pub fn prob_one(&self, dist: &ProductDistribution) -> BigRational {
        assert_eq!(dist.len(), self.nvars, "distribution arity mismatch");
        if dist.is_uniform() {
            return BigRational::new(
                BigInt::from(self.count_ones()),
                BigInt::from(1u64) << self.nvars,
            );
        }
        self.prob_rec(dist, self.nvars, 0)
    }

    fn prob_rec(&self, dist: &ProductDistribution, k: usize, base: u64) -> BigRational {
        if k == 0 {
            return if self.get(base) {
                BigRational::one()
            } else {
                BigRational::zero()
            };
        }
        let half = 1u64 << (k - 1);
        let p = dist.p_one(k - 1);
        let lo = self.prob_rec(dist, k - 1, base);
        let hi = self.prob_rec(dist, k - 1, base + half);
        (BigRational::one() - p) * lo + p.clone() * hi
    }

    pub fn bias(&self, dist: &ProductDistribution) -> BigRational {
        let p1 = self.prob_one(dist);
        let p0 = BigRational::one() - &p1;
        if p0 < p1 {
            p0
        } else {
            p1
        }
    }

    pub fn disagreement(
        &self,
        other: &TruthTable,
        dist: &ProductDistribution,
    ) -> Result<BigRational> {
        Ok(self.xor(other)?.prob_one(dist))
    }

    /// Total influence under the uniform distribution.
    pub fn total_influence(&self) -> BigRational {
        let mut pivotal: u64 = 0;
        for i in 0..self.nvars {
            let bit = 1u64 << i;
            for x in 0..self.len() {
                if self.get(x) != self.get(x ^ bit) {
                    pivotal += 1;
                }
            }
        }
        BigRational::new(BigInt::from(pivotal), BigInt::from(1u64) << self.nvars)
    }
}

/// A product distribution on {0,1}^n given by exact per-coordinate
/// probabilities of drawing 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductDistribution {
    p_one: Vec<BigRational>,
    uniform: bool,
}

impl ProductDistribution {
    pub fn new(p_one: Vec<BigRational>) -> Result<Self> {
        for p in &p_one {
            if p < &BigRational::zero() || p > &BigRational::one() {
                return Err(Error::DomainMismatch(format!(
                    "coordinate probability {p} outside [0,1]"
                )));
            }
        }
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        let uniform = p_one.iter().all(|p| *p == half);
        Ok(ProductDistribution { p_one, uniform })
    }

    pub fn uniform(n: usize) -> Self {
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        ProductDistribution {
            p_one: vec![half; n],
            uniform: true,
        }
    }

    pub fn biased(n: usize, t: BigRational) -> Result<Self> {
        Self::new(vec![t; n])
    }

    pub fn len(&self) -> usize {
        self.p_one.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_one.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn p_one(&self, i: usize) -> &BigRational {
        &self.p_one[i]
    }

    /// Probability of the single point `x`.
    pub fn point_mass(&self, x: u64) -> BigRational {
        let mut m = BigRational::one();
        for (i, p) in self.p_one.iter().enumerate() {
            if x >> i & 1 == 1 {
                m *= p;
            } else {
                m *= BigRational::one() - p;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::r;

    #[test]
    fn count_and_get() {
        let t = TruthTable::from_fn(3, |x| x.count_ones() % 2 == 1).unwrap();
        assert_eq!(t.count_ones(), 4);
        assert!(t.get(0b001));
        assert!(!t.get(0b011));
    }

    #[test]
    fn hex_round_trip() {
        let t = TruthTable::from_fn(5, |x| x % 3 == 0).unwrap();
        let back = TruthTable::from_hex(5, &t.to_hex()).unwrap();
        assert_eq!(t, back);
        let small = TruthTable::from_fn(1, |x| x == 1).unwrap();
        assert_eq!(small.to_hex(), "02");
        assert_eq!(TruthTable::from_hex(1, "02").unwrap(), small);
    }

    #[test]
    fn or2_bias_under_uniform_and_biased() {
        let or2 = TruthTable::from_fn(2, |x| x != 0).unwrap();
        assert_eq!(or2.bias(&ProductDistribution::uniform(2)), r(1, 4));
        // each coordinate 1 with probability 1/4: Pr[OR=0] = 9/16
        let d = ProductDistribution::biased(2, r(1, 4)).unwrap();
        assert_eq!(or2.prob_one(&d), r(7, 16));
        assert_eq!(or2.bias(&d), r(7, 16));
    }

    #[test]
    fn disagreement_with_self_is_zero() {
        let t = TruthTable::from_fn(4, |x| x & 5 == 4).unwrap();
        let d = ProductDistribution::biased(4, r(1, 3)).unwrap();
        assert_eq!(t.disagreement(&t, &d).unwrap(), r(0, 1));
    }

    #[test]
    fn influence_of_parity_and_constant() {
        for n in 1..=6 {
            let parity = TruthTable::from_fn(n, |x| x.count_ones() % 2 == 1).unwrap();
            assert_eq!(parity.total_influence(), r(n as i64, 1));
        }
        let c = TruthTable::from_fn(5, |_| true).unwrap();
        assert_eq!(c.total_influence(), r(0, 1));
    }

    #[test]
    fn point_mass_sums_to_one() {
        let d =
            ProductDistribution::new(vec![r(1, 4), r(2, 3), r(1, 2)]).unwrap();
        let total: BigRational = (0..8).map(|x| d.point_mass(x)).sum();
        assert_eq!(total, r(1, 1));
    }
}
