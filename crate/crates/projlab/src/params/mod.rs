//! The parameter system: fan-ins, probabilities, and the downward
//! recurrence that ties them together, in two modes. Paper mode works with
//! arbitrary-precision interval enclosures (the recurrence involves real
//! exponents); toy mode works with exact rationals chosen by the caller so
//! the distributional identities can be verified by enumeration.

mod interval;

pub use interval::IntervalScalar;

use crate::circuits::AddressSpace;
use crate::error::{Error, Result};
use crate::restrictions::AcceptabilityWindow;
use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use rug::float::{Constant, Round};
use rug::Float;
use serde::Serialize;
use serde_json::json;
use std::collections::BTreeMap;

pub fn pow_int(r: &BigRational, e: usize) -> BigRational {
    num::pow::pow(r.clone(), e)
}

pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let parse_int = |t: &str| -> Result<BigInt> {
        t.trim()
            .parse::<BigInt>()
            .map_err(|e| Error::Parse(format!("bad integer {t:?}: {e}")))
    };
    match s.split_once('/') {
        Some((n, d)) => {
            let den = parse_int(d)?;
            if den.is_zero() {
                return Err(Error::Parse("zero denominator".into()));
            }
            Ok(BigRational::new(parse_int(n)?, den))
        }
        None => Ok(BigRational::from(parse_int(s)?)),
    }
}

pub fn rational_to_string(r: &BigRational) -> String {
    r.to_string()
}

/// One derived t_k: an interval enclosure, with the exact rational kept when
/// the defining expression is rational (k = d-1).
#[derive(Clone, Debug)]
pub struct TkValue {
    pub enclosure: IntervalScalar,
    pub exact: Option<BigRational>,
}

/// Paper-mode parameters for a given m, d, derived at `prec` bits.
#[derive(Clone, Debug)]
pub struct PaperParams {
    pub m: u32,
    pub d: usize,
    pub prec: u32,
    pub w: BigInt,
    pub p: BigRational,
    pub q: BigRational,
    pub lambda: BigRational,
    /// t[0] = t_1, ..., t[d-2] = t_{d-1}
    pub t: Vec<TkValue>,
    pub w0: BigInt,
}

/// Toy-mode parameters: exact rationals over explicit fan-ins.
#[derive(Clone, Debug)]
pub struct ToyParams {
    pub fan_ins: Vec<usize>,
    pub m: usize,
    pub p: BigRational,
    pub q: BigRational,
    pub lambda: BigRational,
    /// t[0] = t_1, ..., t[d-2] = t_{d-1}
    pub t: Vec<BigRational>,
    /// acceptability window per level k (2 <= k <= d-1)
    pub windows: BTreeMap<usize, AcceptabilityWindow>,
    pub cond2_threshold: usize,
    /// feasible [lo, 1) lower endpoints recorded for auto-derived t's
    pub t_lower_bounds: Vec<Option<BigRational>>,
}

#[derive(Clone, Debug)]
pub enum ParamSet {
    Paper(PaperParams),
    Toy(ToyParams),
}

impl ToyParams {
    pub fn space(&self) -> AddressSpace {
        AddressSpace::new(self.fan_ins.clone()).expect("validated at construction")
    }

    pub fn depth(&self) -> usize {
        self.fan_ins.len()
    }

    /// t_k for 1 <= k <= d-1.
    pub fn t_k(&self, k: usize) -> &BigRational {
        &self.t[k - 1]
    }

    pub fn window(&self, level: usize) -> AcceptabilityWindow {
        self.windows
            .get(&level)
            .copied()
            .unwrap_or_else(|| AcceptabilityWindow::all(self.fan_ins[level - 1]))
    }

    pub fn summary(&self) -> serde_json::Value {
        json!({
            "mode": "toy",
            "fan_ins": self.fan_ins,
            "m": self.m,
            "p": self.p.to_string(),
            "q": self.q.to_string(),
            "lambda": self.lambda.to_string(),
            "t": self.t.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
            "windows": self.windows.iter()
                .map(|(k, w)| json!({"level": k, "lo": w.lo, "hi": w.hi}))
                .collect::<Vec<_>>(),
            "cond2_threshold": self.cond2_threshold,
        })
    }
}

/// How the t-sequence for levels below d-1 is chosen in toy mode.
pub enum ToyTSpec {
    /// t_1, ..., t_{d-2} explicitly.
    Explicit(Vec<BigRational>),
    /// Derived downward so that q_a stays in [0, 1 - lambda] across each
    /// level's acceptability window.
    Auto,
}

/// q_a = ((1 - t_k)^s - lambda) / t_{k-1}, exactly. The caller decides
/// whether a value outside [0, 1 - lambda] invalidates the block.
pub fn compute_qa(
    t_k: &BigRational,
    t_km1: &BigRational,
    lambda: &BigRational,
    s: usize,
) -> BigRational {
    (pow_int(&(BigRational::one() - t_k), s) - lambda) / t_km1
}

/// Exact toy parameters. `fan_ins` fixes the formula profile; `m` is the
/// bottom fan-in, giving p = 2^-m and t_{d-1} = (p - lambda)/q. Remaining
/// t's come from `t_spec`.
pub fn build_toy_params(
    fan_ins: Vec<usize>,
    lambda: BigRational,
    q: BigRational,
    t_spec: ToyTSpec,
    windows: BTreeMap<usize, AcceptabilityWindow>,
    cond2_threshold: usize,
) -> Result<ToyParams> {
    let space = AddressSpace::new(fan_ins.clone())
        .map_err(|e| Error::InfeasibleToyParams(e.to_string()))?;
    let d = space.depth();
    let m = fan_ins[d - 1];
    if lambda <= BigRational::zero() {
        return Err(Error::InfeasibleToyParams("lambda must be > 0".into()));
    }
    if q <= BigRational::zero() {
        return Err(Error::InfeasibleToyParams("q must be > 0".into()));
    }
    if &lambda + &q > BigRational::one() {
        return Err(Error::InfeasibleToyParams("lambda + q must be <= 1".into()));
    }
    let p = BigRational::new(BigInt::one(), BigInt::one() << m);
    let t_last = (&p - &lambda) / &q;
    if t_last <= BigRational::zero() || t_last >= BigRational::one() {
        return Err(Error::InfeasibleToyParams(format!(
            "t_{} = (p - lambda)/q = {} must lie strictly inside (0,1)",
            d - 1,
            t_last
        )));
    }
    let window_of = |k: usize| -> AcceptabilityWindow {
        windows
            .get(&k)
            .copied()
            .unwrap_or_else(|| AcceptabilityWindow::all(fan_ins[k - 1]))
    };
    let mut t = vec![BigRational::zero(); d - 1];
    let mut t_lower_bounds = vec![None; d - 1];
    t[d - 2] = t_last;
    match t_spec {
        ToyTSpec::Explicit(list) => {
            if list.len() != d - 2 {
                return Err(Error::InfeasibleToyParams(format!(
                    "expected {} explicit t values (t_1..t_{}), got {}",
                    d - 2,
                    d.saturating_sub(2),
                    list.len()
                )));
            }
            for (i, v) in list.into_iter().enumerate() {
                if v <= BigRational::zero() || v >= BigRational::one() {
                    return Err(Error::InfeasibleToyParams(format!(
                        "t_{} = {v} must lie strictly inside (0,1)",
                        i + 1
                    )));
                }
                t[i] = v;
            }
        }
        ToyTSpec::Auto => {
            // Downward: ensure q_a = ((1-t_k)^s - lambda)/t_{k-1} lands in
            // [0, 1 - lambda] for every s in level k's window.
            for k in (2..d).rev() {
                let t_k = t[k - 1].clone();
                let win = window_of(k);
                let w = fan_ins[k - 1];
                let s_lo = win.lo.max(1).min(w);
                let s_hi = win.hi.min(w).max(s_lo);
                let one_minus = BigRational::one() - &t_k;
                if pow_int(&one_minus, s_hi) < lambda {
                    return Err(Error::InfeasibleToyParams(format!(
                        "(1 - t_{k})^{s_hi} < lambda: q_a would be negative \
                         inside level {k}'s window"
                    )));
                }
                let lower =
                    (pow_int(&one_minus, s_lo) - &lambda) / (BigRational::one() - &lambda);
                let lower_pos = if lower > BigRational::zero() {
                    lower.clone()
                } else {
                    BigRational::zero()
                };
                if lower_pos >= BigRational::one() {
                    return Err(Error::InfeasibleToyParams(format!(
                        "no t_{} in (0,1) keeps q_a <= 1 - lambda at level {k}",
                        k - 1
                    )));
                }
                // midpoint of the feasible range [lower, 1)
                t[k - 2] = (&lower_pos + BigRational::one())
                    / BigRational::from(BigInt::from(2));
                t_lower_bounds[k - 2] = Some(lower);
            }
        }
    }
    Ok(ToyParams {
        fan_ins,
        m,
        p,
        q,
        lambda,
        t,
        windows,
        cond2_threshold,
        t_lower_bounds,
    })
}

fn ln2_interval(prec: u32) -> IntervalScalar {
    let (lo, _) = Float::with_val_round(prec, Constant::Log2, Round::Down);
    let (hi, _) = Float::with_val_round(prec, Constant::Log2, Round::Up);
    IntervalScalar::from_endpoints(lo, hi)
}

/// w = floor(m * 2^m * ln 2).
fn derive_w(m: u32, prec: u32) -> Result<BigInt> {
    let m2m = BigRational::from(BigInt::from(m) << m);
    let x = IntervalScalar::from_rational(&m2m, prec).mul(&ln2_interval(prec));
    x.floor_unique().ok_or_else(|| {
        Error::PrecisionInsufficient(format!(
            "floor of m*2^m*ln2 straddles an integer at {prec} bits"
        ))
    })
}

/// lambda = (log2 w)^{3/2} / w^{5/4}, rounded to a dyadic rational at
/// `prec` bits.
fn derive_lambda(w: &BigInt, prec: u32) -> Result<BigRational> {
    let work = prec + 32;
    let wr = IntervalScalar::from_rational(&BigRational::from(w.clone()), work);
    let log2w = wr.ln()?.div(&ln2_interval(work));
    let three_halves = IntervalScalar::from_rational(
        &BigRational::new(BigInt::from(3), BigInt::from(2)),
        work,
    );
    let five_quarters = IntervalScalar::from_rational(
        &BigRational::new(BigInt::from(5), BigInt::from(4)),
        work,
    );
    let num = log2w.pow_real(&three_halves)?;
    let den = wr.pow_real(&five_quarters)?;
    Ok(round_dyadic(&num.div(&den), prec))
}

/// q = 2^{-m/2}, rounded to a dyadic rational at `prec` bits (exact when m
/// is even).
fn derive_q(m: u32, prec: u32) -> Result<BigRational> {
    let p = BigRational::new(BigInt::one(), BigInt::one() << m);
    let iv = IntervalScalar::from_rational(&p, prec + 32).sqrt()?;
    Ok(round_dyadic(&iv, prec))
}

fn round_dyadic(iv: &IntervalScalar, prec: u32) -> BigRational {
    iv.round_mid(prec)
}

/// Derive the full paper-mode parameter set at m, d, and `prec` bits.
///
/// lambda and q are rounded to dyadic rationals first; t_{d-1} is then an
/// exact rational in the rounded values, and each earlier t_k is an interval
/// enclosure of ((1 - t_{k+1})^{qw} - lambda)/q. Fails with `Infeasible`
/// when a derived t_k is not certainly inside (0,1), and with
/// `PrecisionInsufficient` when a floor or threshold comparison straddles.
pub fn derive_paper_params(m: u32, d: usize, prec: u32) -> Result<PaperParams> {
    if m < 1 || d < 2 {
        return Err(Error::InvalidProfile(format!(
            "need m >= 1 and d >= 2, got m = {m}, d = {d}"
        )));
    }
    if prec < 64 {
        return Err(Error::InvalidProfile("precision must be at least 64".into()));
    }
    let work = prec + 32;
    let w = derive_w(m, work)?;
    let p = BigRational::new(BigInt::one(), BigInt::one() << m);
    let q = derive_q(m, prec)?;
    let lambda = derive_lambda(&w, prec)?;

    let t_last = (&p - &lambda) / &q;
    check_unit_interval_exact(&t_last, d - 1)?;
    let mut t: Vec<TkValue> = vec![
        TkValue {
            enclosure: IntervalScalar::from_rational(&t_last, work),
            exact: Some(t_last.clone()),
        };
        1
    ];
    // recurrence downward: t_{k-1} = ((1 - t_k)^{qw} - lambda)/q
    let q_iv = IntervalScalar::from_rational(&q, work);
    let lam_iv = IntervalScalar::from_rational(&lambda, work);
    let w_iv = IntervalScalar::from_rational(&BigRational::from(w.clone()), work);
    let qw = q_iv.mul(&w_iv);
    let one = IntervalScalar::from_u64(1, work);
    for k in (2..d).rev() {
        let t_k = t.last().unwrap().enclosure.clone();
        let base = one.sub(&t_k);
        if !base.is_strictly_positive() {
            return Err(Error::Infeasible {
                k,
                reason: "1 - t_k is not certainly positive".into(),
            });
        }
        let powed = base.pow_real(&qw)?;
        let t_next = powed.sub(&lam_iv).div(&q_iv);
        check_unit_interval_iv(&t_next, k - 1)?;
        t.push(TkValue {
            enclosure: t_next,
            exact: None,
        });
    }
    t.reverse(); // now t[0] = t_1
    let w0 = derive_w0(&t[0].enclosure, &q_iv, work)?;
    Ok(PaperParams {
        m,
        d,
        prec,
        w,
        p,
        q,
        lambda,
        t,
        w0,
    })
}

fn check_unit_interval_exact(t: &BigRational, k: usize) -> Result<()> {
    if t <= &BigRational::zero() || t >= &BigRational::one() {
        return Err(Error::Infeasible {
            k,
            reason: format!("t_{k} = {t} is not strictly inside (0,1)"),
        });
    }
    Ok(())
}

fn check_unit_interval_iv(t: &IntervalScalar, k: usize) -> Result<()> {
    let zero = IntervalScalar::from_u64(0, t.prec());
    let one = IntervalScalar::from_u64(1, t.prec());
    if !(t.certainly_gt(&zero) && t.certainly_lt(&one)) {
        return Err(Error::Infeasible {
            k,
            reason: format!("t_{k} enclosure {t} is not certainly inside (0,1)"),
        });
    }
    Ok(())
}

/// w_0: the smallest integer with (1 - t_1)^{q w_0} <= 1/2, found by
/// doubling then binary search on the interval enclosure; a comparison the
/// enclosure cannot decide raises `PrecisionInsufficient`.
fn derive_w0(t1: &IntervalScalar, q: &IntervalScalar, work: u32) -> Result<BigInt> {
    let one = IntervalScalar::from_u64(1, work);
    let half = IntervalScalar::from_rational(
        &BigRational::new(BigInt::one(), BigInt::from(2)),
        work,
    );
    let base = one.sub(t1);
    if !base.is_strictly_positive() {
        return Err(Error::Infeasible {
            k: 1,
            reason: "1 - t_1 is not certainly positive".into(),
        });
    }
    let value = |x: &BigInt| -> Result<IntervalScalar> {
        let xe = IntervalScalar::from_rational(&BigRational::from(x.clone()), work);
        base.pow_real(&q.mul(&xe))
    };
    let le_half = |x: &BigInt| -> Result<bool> {
        let v = value(x)?;
        if v.certainly_le(&half) {
            Ok(true)
        } else if v.certainly_gt(&half) {
            Ok(false)
        } else {
            Err(Error::PrecisionInsufficient(format!(
                "(1 - t_1)^(q * {x}) straddles 1/2"
            )))
        }
    };
    // bracket by doubling
    let mut hi = BigInt::one();
    while !le_half(&hi)? {
        hi = &hi * 2;
        if hi.bits() > 128 {
            return Err(Error::PrecisionInsufficient(
                "w_0 bracket exceeded 2^128".into(),
            ));
        }
    }
    let mut lo = BigInt::zero(); // value at 0 is 1 > 1/2
    while &lo + 1 < hi {
        let mid: BigInt = (&lo + &hi) / 2;
        if le_half(&mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// One side of a bound check as exact rational endpoints.
#[derive(Clone, Debug, Serialize)]
pub struct BoundCheck {
    /// Some(true): holds at the adverse endpoints; Some(false): certainly
    /// fails; None: the enclosures overlap and the check is undetermined.
    pub holds: Option<bool>,
    pub deviation: String,
    pub bound: String,
    pub deviation_f64: f64,
    pub bound_f64: f64,
}

fn bound_check(
    dev_lo: &BigRational,
    dev_hi: &BigRational,
    bound_lo: &BigRational,
    bound_hi: &BigRational,
) -> BoundCheck {
    let holds = if dev_hi <= bound_lo {
        Some(true)
    } else if dev_lo > bound_hi {
        Some(false)
    } else {
        None
    };
    BoundCheck {
        holds,
        deviation: format!("[{dev_lo}, {dev_hi}]"),
        bound: format!("[{bound_lo}, {bound_hi}]"),
        deviation_f64: dev_hi.to_f64().unwrap_or(f64::NAN),
        bound_f64: bound_lo.to_f64().unwrap_or(f64::NAN),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TkReport {
    pub k: usize,
    pub in_unit_interval: bool,
    /// |t_k - q| <= q^{1.1}
    pub dev_from_q: BoundCheck,
    /// |t_k q - p| <= (2m)^{d-1-k} lambda
    pub recurrence_bound: BoundCheck,
}

#[derive(Clone, Debug, Serialize)]
pub struct FeasibilityReport {
    pub m: u32,
    pub d: usize,
    pub prec: u32,
    pub per_k: Vec<TkReport>,
    pub all_hold: bool,
}

/// Check, on interval endpoints, that every t_k sits within q +- q^{1.1}
/// and that |t_k q - p| <= (2m)^{d-1-k} lambda.
pub fn check_tk_bounds(params: &PaperParams) -> FeasibilityReport {
    let work = params.prec + 32;
    let q_iv = IntervalScalar::from_rational(&params.q, work);
    let q11 = q_iv
        .pow_real(&IntervalScalar::from_rational(
            &BigRational::new(BigInt::from(11), BigInt::from(10)),
            work,
        ))
        .expect("q > 0");
    let q11_range = (q11.lo_rational(), q11.hi_rational());
    let mut per_k = Vec::new();
    for (i, tk) in params.t.iter().enumerate() {
        let k = i + 1;
        let (dev_q, dev_rec, in_unit) = match &tk.exact {
            Some(t) => {
                let dq = (t - &params.q).abs();
                let dr = (t * &params.q - &params.p).abs();
                (
                    (dq.clone(), dq),
                    (dr.clone(), dr),
                    t > &BigRational::zero() && t < &BigRational::one(),
                )
            }
            None => {
                let iv = &tk.enclosure;
                let dq = iv.sub(&q_iv).abs();
                let dr = iv.mul(&q_iv).sub(&IntervalScalar::from_rational(
                    &params.p, work,
                ))
                .abs();
                (
                    (dq.lo_rational(), dq.hi_rational()),
                    (dr.lo_rational(), dr.hi_rational()),
                    iv.lo_rational() > BigRational::zero()
                        && iv.hi_rational() < BigRational::one(),
                )
            }
        };
        let exponent = params.d - 1 - k;
        let rec_bound = pow_int(
            &BigRational::from(BigInt::from(2 * params.m)),
            exponent,
        ) * &params.lambda;
        per_k.push(TkReport {
            k,
            in_unit_interval: in_unit,
            dev_from_q: bound_check(&dev_q.0, &dev_q.1, &q11_range.0, &q11_range.1),
            recurrence_bound: bound_check(&dev_rec.0, &dev_rec.1, &rec_bound, &rec_bound),
        });
    }
    let all_hold = per_k.iter().all(|r| {
        r.in_unit_interval
            && r.dev_from_q.holds == Some(true)
            && r.recurrence_bound.holds == Some(true)
    });
    FeasibilityReport {
        m: params.m,
        d: params.d,
        prec: params.prec,
        per_k,
        all_hold,
    }
}

/// The paper-mode acceptability window for level k: integer star counts
/// certainly inside qw +- w^{beta(k,d)}, beta(k,d) = 1/3 + (d-k-1)/(12d).
pub fn paper_window(params: &PaperParams, k: usize) -> Result<AcceptabilityWindow> {
    if k < 2 || k > params.d - 1 {
        return Err(Error::LevelOutOfRange {
            level: k,
            depth: params.d,
        });
    }
    let work = params.prec + 32;
    let beta = BigRational::new(BigInt::one(), BigInt::from(3))
        + BigRational::new(
            BigInt::from(params.d - k - 1),
            BigInt::from(12 * params.d),
        );
    let w_iv = IntervalScalar::from_rational(&BigRational::from(params.w.clone()), work);
    let radius = w_iv.pow_real(&IntervalScalar::from_rational(&beta, work))?;
    // inner approximation: use the radius lower endpoint on both sides
    let center = &params.q * BigRational::from(params.w.clone());
    let lo = (&center - radius.lo_rational()).ceil().to_integer();
    let hi = (&center + radius.lo_rational()).floor().to_integer();
    let lo = lo.max(BigInt::zero()).to_usize().unwrap_or(usize::MAX);
    let hi = hi.max(BigInt::zero()).to_usize().unwrap_or(usize::MAX);
    Ok(AcceptabilityWindow { lo, hi })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub m: u32,
    pub d: usize,
    pub feasible: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub prec: u32,
    pub rows: Vec<SweepRow>,
    /// minimal m with all t_k inside (0,1), per depth
    pub minimal_feasible_m: BTreeMap<usize, Option<u32>>,
}

pub fn sweep(m_min: u32, m_max: u32, depths: &[usize], prec: u32) -> SweepReport {
    let mut rows = Vec::new();
    let mut minimal: BTreeMap<usize, Option<u32>> = BTreeMap::new();
    for &d in depths {
        let mut first = None;
        for m in m_min..=m_max {
            match derive_paper_params(m, d, prec) {
                Ok(p) => {
                    if first.is_none() {
                        first = Some(m);
                    }
                    rows.push(SweepRow {
                        m,
                        d,
                        feasible: true,
                        detail: format!("w = {}, w0 = {}", p.w, p.w0),
                    });
                }
                Err(e) => rows.push(SweepRow {
                    m,
                    d,
                    feasible: false,
                    detail: e.to_string(),
                }),
            }
        }
        minimal.insert(d, first);
    }
    SweepReport {
        prec,
        rows,
        minimal_feasible_m: minimal,
    }
}

impl PaperParams {
    pub fn summary(&self) -> serde_json::Value {
        json!({
            "mode": "paper",
            "m": self.m,
            "d": self.d,
            "prec": self.prec,
            "w": self.w.to_string(),
            "p": self.p.to_string(),
            "q": self.q.to_string(),
            "lambda": self.lambda.to_string(),
            "t": self.t.iter().enumerate().map(|(i, tk)| json!({
                "k": i + 1,
                "lo": tk.enclosure.lo_rational().to_f64(),
                "hi": tk.enclosure.hi_rational().to_f64(),
                "exact": tk.exact.as_ref().map(|e| e.to_string()),
            })).collect::<Vec<_>>(),
            "w0": self.w0.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::r;

    #[test]
    fn w_for_small_m() {
        // floor(m 2^m ln 2): m=2 -> floor(5.545) = 5
        assert_eq!(derive_w(2, 96).unwrap(), BigInt::from(5));
        assert_eq!(derive_w(1, 96).unwrap(), BigInt::from(1));
        assert_eq!(derive_w(4, 96).unwrap(), BigInt::from(44));
    }

    #[test]
    fn paper_mode_m2_is_infeasible_because_lambda_exceeds_p() {
        // lambda = (log2 5)^{3/2} / 5^{5/4} ~ 0.473 > p = 1/4 forces
        // t_{d-1} < 0
        let err = derive_paper_params(2, 3, 64).unwrap_err();
        match err {
            Error::Infeasible { k, .. } => assert_eq!(k, 2),
            other => panic!("expected Infeasible, got {other}"),
        }
        let lam = derive_lambda(&BigInt::from(5), 64).unwrap();
        assert!(lam > r(1, 4));
        assert!(lam < r(1, 2));
    }

    #[test]
    fn paper_p_and_q_for_even_m_are_exact() {
        assert_eq!(derive_q(2, 64).unwrap(), r(1, 2));
        assert_eq!(derive_q(4, 64).unwrap(), r(1, 4));
        // odd m: enclosed irrational, still a dyadic after rounding
        let q3 = derive_q(3, 64).unwrap();
        assert!(q3 > r(35, 100) && q3 < r(36, 100));
    }

    #[test]
    fn appendix_base_case_holds_with_equality() {
        // first feasible depth-2 instance: |t_{d-1} q - p| = lambda exactly
        let p = derive_paper_params(8, 2, 96).unwrap();
        let rep = check_tk_bounds(&p);
        let base = rep.per_k.last().unwrap();
        assert_eq!(base.recurrence_bound.holds, Some(true));
        let t1 = p.t[0].exact.as_ref().unwrap();
        assert_eq!((t1 * &p.q - &p.p).abs(), p.lambda);
    }

    #[test]
    fn toy_params_examples() {
        // m=2, lambda=1/8, q=1/2 -> t_{d-1} = 1/4
        let tp = build_toy_params(
            vec![2, 2, 2],
            r(1, 8),
            r(1, 2),
            ToyTSpec::Explicit(vec![r(1, 4)]),
            BTreeMap::new(),
            0,
        )
        .unwrap();
        assert_eq!(tp.t_k(2), &r(1, 4));
        assert_eq!(tp.p, r(1, 4));
        // lambda + q > 1 rejected
        assert!(build_toy_params(
            vec![2, 2],
            r(3, 4),
            r(1, 2),
            ToyTSpec::Explicit(vec![]),
            BTreeMap::new(),
            0,
        )
        .is_err());
        // m=1, lambda=1/4, q=1/4 -> t = 1, rejected
        let err = build_toy_params(
            vec![2, 1],
            r(1, 4),
            r(1, 4),
            ToyTSpec::Explicit(vec![]),
            BTreeMap::new(),
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InfeasibleToyParams(_)));
    }

    #[test]
    fn toy_auto_t_keeps_qa_valid_across_window() {
        let tp = build_toy_params(
            vec![2, 3, 2],
            r(1, 16),
            r(1, 2),
            ToyTSpec::Auto,
            BTreeMap::new(),
            0,
        )
        .unwrap();
        let t2 = tp.t_k(2).clone();
        let t1 = tp.t_k(1).clone();
        for s in 1..=3usize {
            let qa = compute_qa(&t2, &t1, &tp.lambda, s);
            assert!(qa >= r(0, 1), "qa = {qa} at s = {s}");
            assert!(qa <= BigRational::one() - &tp.lambda, "qa = {qa} at s = {s}");
        }
    }

    #[test]
    fn qa_identity_and_examples() {
        // t_k = 1/4, t_{k-1} = 1/4, lambda = 1/8, s = 2 -> 7/4 (invalid,
        // caller must reject)
        assert_eq!(compute_qa(&r(1, 4), &r(1, 4), &r(1, 8), 2), r(7, 4));
        // lambda = (1-t_k)^s zeroes the numerator
        assert_eq!(compute_qa(&r(1, 2), &r(1, 3), &r(1, 4), 2), r(0, 1));
        // algebraic identity lambda + q_a t_{k-1} = (1 - t_k)^s
        let (tk, tkm1, lam) = (r(2, 7), r(3, 11), r(1, 9));
        for s in 1..5 {
            let qa = compute_qa(&tk, &tkm1, &lam, s);
            assert_eq!(&lam + qa * &tkm1, pow_int(&(r(1, 1) - &tk), s));
        }
    }

    #[test]
    fn sweep_reports_minimal_feasible_m() {
        let rep = sweep(6, 14, &[2, 3], 128);
        assert_eq!(rep.minimal_feasible_m[&2], Some(8));
        assert_eq!(rep.minimal_feasible_m[&3], Some(13));
    }

    #[test]
    fn doubling_precision_never_breaks_a_held_bound() {
        let p1 = derive_paper_params(48, 3, 128).unwrap();
        let p2 = derive_paper_params(48, 3, 256).unwrap();
        let r1 = check_tk_bounds(&p1);
        let r2 = check_tk_bounds(&p2);
        for (a, b) in r1.per_k.iter().zip(&r2.per_k) {
            if a.dev_from_q.holds == Some(true) {
                assert_eq!(b.dev_from_q.holds, Some(true));
            }
            if a.recurrence_bound.holds == Some(true) {
                assert_eq!(b.recurrence_bound.holds, Some(true));
            }
        }
    }

    #[test]
    fn paper_window_is_inner_approximation() {
        let p = derive_paper_params(13, 3, 128).unwrap();
        let win = paper_window(&p, 2).unwrap();
        // center qw, radius w^{beta(2,3)} with beta = 1/3
        let center = (&p.q * BigRational::from(p.w.clone()))
            .to_f64()
            .unwrap();
        let radius = (p.w.to_f64().unwrap()).powf(1.0 / 3.0);
        assert!((win.lo as f64) >= center - radius - 1.0);
        assert!((win.hi as f64) <= center + radius + 1.0);
        assert!(win.lo <= win.hi);
    }
}
