use crate::error::{Error, Result};
use num::BigRational;
use rug::float::Round;
use rug::ops::{AddAssignRound, DivAssignRound, MulAssignRound, SubAssignRound};
use rug::{Float, Rational as RugRational};
use std::cmp::Ordering;
use std::str::FromStr;

/// An interval [lo, hi] of arbitrary-precision dyadic floats with outward
/// rounding on every operation. Endpoints are exact dyadic rationals, so
/// enclosure-endpoint comparisons are sound.
#[derive(Clone, Debug)]
pub struct IntervalScalar {
    lo: Float,
    hi: Float,
}

pub fn big_to_rug(r: &BigRational) -> RugRational {
    RugRational::from_str(&r.to_string()).expect("rational round-trips through text")
}

pub fn rug_to_big(r: &RugRational) -> BigRational {
    BigRational::from_str(&r.to_string()).expect("rational round-trips through text")
}

/// Exact value of a (finite) MPFR float as a rational.
pub fn float_to_big(f: &Float) -> BigRational {
    rug_to_big(&f.to_rational().expect("finite float"))
}

impl IntervalScalar {
    pub fn point(f: Float) -> Self {
        IntervalScalar {
            lo: f.clone(),
            hi: f,
        }
    }

    pub fn from_endpoints(lo: Float, hi: Float) -> Self {
        debug_assert!(lo <= hi);
        IntervalScalar { lo, hi }
    }

    /// Midpoint rounded to nearest at `prec` bits: the canonical dyadic
    /// stand-in for the enclosed real.
    pub fn round_mid(&self, prec: u32) -> BigRational {
        let mut m = Float::with_val(self.prec().max(prec) + 2, &self.lo);
        m.add_assign_round(&self.hi, Round::Nearest);
        m.div_assign_round(2u32, Round::Nearest);
        float_to_big(&Float::with_val(prec, &m))
    }

    pub fn from_u64(v: u64, prec: u32) -> Self {
        Self::point(Float::with_val(prec, v))
    }

    /// Enclose an exact rational at the working precision.
    pub fn from_rational(r: &BigRational, prec: u32) -> Self {
        let rr = big_to_rug(r);
        let mut lo = Float::with_val(prec, 0);
        let mut hi = Float::with_val(prec, 0);
        lo.add_assign_round(&rr, Round::Down);
        hi.add_assign_round(&rr, Round::Up);
        IntervalScalar { lo, hi }
    }

    pub fn prec(&self) -> u32 {
        self.lo.prec()
    }

    pub fn lo(&self) -> &Float {
        &self.lo
    }

    pub fn hi(&self) -> &Float {
        &self.hi
    }

    pub fn lo_rational(&self) -> BigRational {
        float_to_big(&self.lo)
    }

    pub fn hi_rational(&self) -> BigRational {
        float_to_big(&self.hi)
    }

    /// Midpoint rounded to nearest at the working precision (an exact
    /// dyadic rational).
    pub fn mid_rational(&self) -> BigRational {
        let mut m = self.lo.clone();
        m.add_assign_round(&self.hi, Round::Nearest);
        m.div_assign_round(2u32, Round::Nearest);
        float_to_big(&m)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut lo = self.lo.clone();
        lo.add_assign_round(&other.lo, Round::Down);
        let mut hi = self.hi.clone();
        hi.add_assign_round(&other.hi, Round::Up);
        IntervalScalar { lo, hi }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut lo = self.lo.clone();
        lo.sub_assign_round(&other.hi, Round::Down);
        let mut hi = self.hi.clone();
        hi.sub_assign_round(&other.lo, Round::Up);
        IntervalScalar { lo, hi }
    }

    pub fn neg(&self) -> Self {
        IntervalScalar {
            lo: -self.hi.clone(),
            hi: -self.lo.clone(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let pairs = [
            (&self.lo, &other.lo),
            (&self.lo, &other.hi),
            (&self.hi, &other.lo),
            (&self.hi, &other.hi),
        ];
        let mut lo: Option<Float> = None;
        let mut hi: Option<Float> = None;
        for (a, b) in pairs {
            let mut down = a.clone();
            down.mul_assign_round(b, Round::Down);
            let mut up = a.clone();
            up.mul_assign_round(b, Round::Up);
            lo = Some(match lo {
                Some(l) if l <= down => l,
                _ => down,
            });
            hi = Some(match hi {
                Some(h) if h >= up => h,
                _ => up,
            });
        }
        IntervalScalar {
            lo: lo.unwrap(),
            hi: hi.unwrap(),
        }
    }

    /// Division; the divisor must not contain zero.
    pub fn div(&self, other: &Self) -> Self {
        assert!(
            !other.contains_zero(),
            "interval division by an interval containing zero"
        );
        let pairs = [
            (&self.lo, &other.lo),
            (&self.lo, &other.hi),
            (&self.hi, &other.lo),
            (&self.hi, &other.hi),
        ];
        let mut lo: Option<Float> = None;
        let mut hi: Option<Float> = None;
        for (a, b) in pairs {
            let mut down = a.clone();
            down.div_assign_round(b, Round::Down);
            let mut up = a.clone();
            up.div_assign_round(b, Round::Up);
            lo = Some(match lo {
                Some(l) if l <= down => l,
                _ => down,
            });
            hi = Some(match hi {
                Some(h) if h >= up => h,
                _ => up,
            });
        }
        IntervalScalar {
            lo: lo.unwrap(),
            hi: hi.unwrap(),
        }
    }

    /// Natural logarithm; requires lo > 0.
    pub fn ln(&self) -> Result<Self> {
        if self.lo <= 0 {
            return Err(Error::DomainMismatch(format!(
                "ln of interval with lower endpoint {}",
                self.lo
            )));
        }
        let mut lo = self.lo.clone();
        lo.ln_round(Round::Down);
        let mut hi = self.hi.clone();
        hi.ln_round(Round::Up);
        Ok(IntervalScalar { lo, hi })
    }

    pub fn exp(&self) -> Self {
        let mut lo = self.lo.clone();
        lo.exp_round(Round::Down);
        let mut hi = self.hi.clone();
        hi.exp_round(Round::Up);
        IntervalScalar { lo, hi }
    }

    pub fn sqrt(&self) -> Result<Self> {
        if self.lo < 0 {
            return Err(Error::DomainMismatch("sqrt of negative interval".into()));
        }
        let mut lo = self.lo.clone();
        lo.sqrt_round(Round::Down);
        let mut hi = self.hi.clone();
        hi.sqrt_round(Round::Up);
        Ok(IntervalScalar { lo, hi })
    }

    /// Real-exponent power exp(e * ln(self)); requires a positive base.
    pub fn pow_real(&self, e: &Self) -> Result<Self> {
        Ok(self.ln()?.mul(e).exp())
    }

    pub fn abs(&self) -> Self {
        if self.lo >= 0 {
            self.clone()
        } else if self.hi <= 0 {
            self.neg()
        } else {
            let mag = if self.hi.clone().abs() >= self.lo.clone().abs() {
                self.hi.clone()
            } else {
                -self.lo.clone()
            };
            IntervalScalar {
                lo: Float::with_val(self.prec(), 0),
                hi: mag,
            }
        }
    }

    pub fn contains_zero(&self) -> bool {
        self.lo <= 0 && self.hi >= 0
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.lo > 0
    }

    /// Certainly `self <= other` (holds at the adverse endpoints).
    pub fn certainly_le(&self, other: &Self) -> bool {
        self.hi <= other.lo
    }

    pub fn certainly_lt(&self, other: &Self) -> bool {
        self.hi < other.lo
    }

    pub fn certainly_gt(&self, other: &Self) -> bool {
        self.lo > other.hi
    }

    /// Three-way comparison when the enclosures are disjoint enough to
    /// decide; `None` when they overlap.
    pub fn try_cmp(&self, other: &Self) -> Option<Ordering> {
        if self.hi < other.lo {
            Some(Ordering::Less)
        } else if self.lo > other.hi {
            Some(Ordering::Greater)
        } else if self.lo == self.hi && other.lo == other.hi && self.lo == other.lo {
            Some(Ordering::Equal)
        } else {
            None
        }
    }

    /// The unique integer floor if both endpoints agree on it.
    pub fn floor_unique(&self) -> Option<num::BigInt> {
        let fl = self.lo.clone().floor();
        let fh = self.hi.clone().floor();
        if fl == fh {
            let r = float_to_big(&fl);
            Some(r.to_integer())
        } else {
            None
        }
    }

    pub fn to_f64(&self) -> f64 {
        (self.lo.to_f64() + self.hi.to_f64()) / 2.0
    }
}

impl std::fmt::Display for IntervalScalar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::r;

    fn iv(n: i64, d: i64, prec: u32) -> IntervalScalar {
        IntervalScalar::from_rational(&r(n, d), prec)
    }

    #[test]
    fn rational_round_trip_is_exact_for_dyadics() {
        let x = IntervalScalar::from_rational(&r(3, 8), 64);
        assert_eq!(x.lo_rational(), r(3, 8));
        assert_eq!(x.hi_rational(), r(3, 8));
    }

    #[test]
    fn non_dyadic_rationals_get_widened() {
        let x = IntervalScalar::from_rational(&r(1, 3), 64);
        assert!(x.lo_rational() < r(1, 3));
        assert!(x.hi_rational() > r(1, 3));
        assert!(x.lo < x.hi);
    }

    #[test]
    fn arithmetic_encloses_true_values() {
        let a = iv(1, 3, 64);
        let b = iv(2, 7, 64);
        let sum = a.add(&b);
        assert!(sum.lo_rational() <= r(13, 21) && r(13, 21) <= sum.hi_rational());
        let prod = a.mul(&b);
        assert!(prod.lo_rational() <= r(2, 21) && r(2, 21) <= prod.hi_rational());
        let quot = a.div(&b);
        assert!(quot.lo_rational() <= r(7, 6) && r(7, 6) <= quot.hi_rational());
    }

    #[test]
    fn ln_exp_bracket() {
        let two = iv(2, 1, 96);
        let l = two.ln().unwrap();
        // ln 2 = 0.693147...
        assert!(l.lo.to_f64() < 0.6931472 && l.hi.to_f64() > 0.6931471);
        let back = l.exp();
        assert!(back.lo_rational() <= r(2, 1) && r(2, 1) <= back.hi_rational());
    }

    #[test]
    fn pow_real_matches_integer_powers() {
        let x = iv(3, 2, 96);
        let e = iv(2, 1, 96);
        let p = x.pow_real(&e).unwrap();
        assert!(p.lo_rational() <= r(9, 4) && r(9, 4) <= p.hi_rational());
    }

    #[test]
    fn floor_unique_detects_straddles() {
        assert_eq!(
            iv(7, 2, 64).floor_unique().map(|b| b.to_string()),
            Some("3".into())
        );
        // interval straddling an integer has no unique floor
        let wide = iv(3, 1, 64).sub(&IntervalScalar::from_rational(&r(1, 100), 64));
        let straddle = IntervalScalar {
            lo: wide.lo.clone(),
            hi: iv(3, 1, 64).add(&iv(1, 100, 64)).hi.clone(),
        };
        assert_eq!(straddle.floor_unique(), None);
    }

    #[test]
    fn doubling_precision_tightens_enclosures() {
        let coarse = iv(1, 3, 32).mul(&iv(1, 7, 32));
        let fine = iv(1, 3, 128).mul(&iv(1, 7, 128));
        assert!(fine.lo_rational() >= coarse.lo_rational());
        assert!(fine.hi_rational() <= coarse.hi_rational());
    }
}
