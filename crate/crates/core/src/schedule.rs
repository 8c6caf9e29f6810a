//! Index bookkeeping for the construction and validity checks for
//! alternative `(n_r, q_r)` schedules.
//!
//! Every floor and ceiling here is decided by an exact big-integer
//! comparison. `n_{r,j} = ⌊n_r log_λ 2⌋` is the largest `m` with
//! `λ^m ≤ 2^{n_r}`, and `⌈|log₂ log₂ λ|⌉` is the least `k` with
//! `λ ≤ 2^{2^k}` (or `λ^{2^k} ≥ 2` when `λ < 2`). Real bases are decided at
//! both ends of their enclosure and fail when the ends disagree.

use std::collections::HashMap;
use std::fmt;
use std::sync::RwLock;

use num_bigint::{BigInt, BigUint};
use num_integer::Roots;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arithmetic::{BaseSpec, Dyadic};
use crate::error::{LevinError, Result};

/// The bases `(λ_j)_{j≥1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BaseSequence {
    /// `λ_j = j + 1`.
    IntegersFromTwo,
    Explicit(Vec<BaseSpec>),
}

impl BaseSequence {
    pub fn lambda(&self, j: u64) -> Result<BaseSpec> {
        if j == 0 {
            return Err(LevinError::Precondition("base index starts at 1".into()));
        }
        match self {
            BaseSequence::IntegersFromTwo => BaseSpec::integer(j + 1),
            BaseSequence::Explicit(list) => list.get(j as usize - 1).cloned().ok_or_else(|| {
                LevinError::InvalidSchedule(format!("no base λ_{j}; only {} listed", list.len()))
            }),
        }
    }

    /// Number of bases, or `None` for an infinite sequence.
    pub fn len(&self) -> Option<u64> {
        match self {
            BaseSequence::IntegersFromTwo => None,
            BaseSequence::Explicit(list) => Some(list.len() as u64),
        }
    }
}

/// The speeds `(t_j)_{j≥1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpeedSequence {
    /// `t_j = 2^j`.
    PowersOfTwo,
    Explicit(Vec<u64>),
}

impl SpeedSequence {
    pub fn t(&self, j: u64) -> Result<u64> {
        match self {
            SpeedSequence::PowersOfTwo => {
                if j >= 63 {
                    Err(LevinError::Precondition(format!("t_{j} = 2^{j} overflows")))
                } else {
                    Ok(1u64 << j)
                }
            }
            SpeedSequence::Explicit(list) => list.get(j as usize - 1).copied().ok_or_else(|| {
                LevinError::InvalidSchedule(format!("no speed t_{j}; only {} listed", list.len()))
            }),
        }
    }

    pub fn len(&self) -> Option<u64> {
        match self {
            SpeedSequence::PowersOfTwo => None,
            SpeedSequence::Explicit(list) => Some(list.len() as u64),
        }
    }
}

/// How `n_r` is chosen.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NRule {
    /// `n_r = 2^r − 2`.
    Original,
    /// `n_r = r²`.
    Quadratic,
    /// `n_r = c_0 + c_1 r + … + c_h r^h`.
    Polynomial(Vec<i64>),
    /// `n_1, n_2, …` listed explicitly.
    Table(Vec<u64>),
}

/// How `q_r` is chosen.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QRule {
    /// `q_r = 2^{2^r + r + 1}`.
    Original,
    /// `q_r = 2^{d + 1 + ⌈log₂(d + 1)⌉}` with `d = n_{r+1} − n_r`; for
    /// `n_r = r²` this is `2^{2r + 2 + ⌈log₂(2r + 2)⌉}`.
    Derived,
    /// The least power of two meeting `2^{d + 1 + ½ log₂(d + 1)} ≤ q_r`.
    LeastSufficient,
    /// `q_r = 2^{d + offset}`.
    Pow2Offset(i64),
    /// The same `q` at every step.
    Constant(BigUint),
    /// `q_1, q_2, …` listed explicitly.
    Table(Vec<BigUint>),
}

/// An exact `q_r`, kept symbolic when it is a power of two so that
/// `2^{2^40}` never has to be materialized.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Denominator {
    Pow2(u64),
    Int(BigUint),
}

impl Denominator {
    fn from_int(q: BigUint) -> Self {
        if q.count_ones() == 1 {
            Denominator::Pow2(q.trailing_zeros().unwrap())
        } else {
            Denominator::Int(q)
        }
    }

    /// `Some(e)` when `q = 2^e`.
    pub fn log2_exact(&self) -> Option<u64> {
        match self {
            Denominator::Pow2(e) => Some(*e),
            Denominator::Int(_) => None,
        }
    }

    pub fn log2(&self) -> f64 {
        match self {
            Denominator::Pow2(e) => *e as f64,
            Denominator::Int(q) => big_log2(q),
        }
    }

    pub fn value(&self) -> BigUint {
        match self {
            Denominator::Pow2(e) => BigUint::one() << *e,
            Denominator::Int(q) => q.clone(),
        }
    }

    /// `q` if it fits in 128 bits.
    pub fn to_u128(&self) -> Option<u128> {
        match self {
            Denominator::Pow2(e) if *e < 128 => Some(1u128 << e),
            Denominator::Pow2(_) => None,
            Denominator::Int(q) => q.to_u128(),
        }
    }

    /// `min(q, cap)`.
    pub fn min_u128(&self, cap: u128) -> u128 {
        self.to_u128().map_or(cap, |q| q.min(cap))
    }

    /// `q > 2^k`.
    fn exceeds_pow2(&self, k: u64) -> bool {
        match self {
            Denominator::Pow2(e) => *e > k,
            Denominator::Int(q) => q.bits() > k + 1 || (q.bits() == k + 1 && q.count_ones() > 1),
        }
    }
}

impl fmt::Display for Denominator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Denominator::Pow2(e) => write!(f, "2^{e}"),
            Denominator::Int(q) => write!(f, "{q}"),
        }
    }
}

fn big_log2(q: &BigUint) -> f64 {
    let bits = q.bits();
    if bits <= 64 {
        q.to_f64().unwrap().log2()
    } else {
        let top = (q >> (bits - 64)).to_f64().unwrap();
        top.log2() + (bits - 64) as f64
    }
}

#[derive(Debug, Default)]
struct CacheTables {
    ell: HashMap<u64, u64>,
    loglog: HashMap<u64, u64>,
    n_rj: HashMap<(u64, u64), u64>,
}

/// Memoized `ℓ_k`, `⌈|log₂log₂λ_v|⌉` and `n_{r,j}`.
#[derive(Debug, Default)]
pub struct IndexCache {
    tables: RwLock<CacheTables>,
}

impl Clone for IndexCache {
    fn clone(&self) -> Self {
        IndexCache::default()
    }
}

/// A complete parameterization of the construction.
#[derive(Clone, Debug)]
pub struct Schedule {
    pub bases: BaseSequence,
    pub speeds: SpeedSequence,
    pub start_value: Dyadic,
    pub n_rule: NRule,
    pub q_rule: QRule,
    cache: IndexCache,
}

impl PartialEq for Schedule {
    fn eq(&self, other: &Self) -> bool {
        self.bases == other.bases
            && self.speeds == other.speeds
            && self.start_value == other.start_value
            && self.n_rule == other.n_rule
            && self.q_rule == other.q_rule
    }
}

impl Eq for Schedule {}

impl Schedule {
    pub fn new(
        bases: BaseSequence,
        speeds: SpeedSequence,
        start_value: Dyadic,
        n_rule: NRule,
        q_rule: QRule,
    ) -> Result<Self> {
        if start_value.is_negative() {
            return Err(LevinError::InvalidSchedule("start value must be nonnegative".into()));
        }
        if let SpeedSequence::Explicit(ts) = &speeds {
            if ts.is_empty() || ts[0] == 0 || ts.windows(2).any(|w| w[1] <= w[0]) {
                return Err(LevinError::InvalidSchedule(
                    "speeds must be strictly increasing positive integers".into(),
                ));
            }
        }
        if let BaseSequence::Explicit(bs) = &bases {
            if bs.is_empty() {
                return Err(LevinError::InvalidSchedule("at least one base is required".into()));
            }
        }
        if let NRule::Polynomial(c) = &n_rule {
            if c.iter().rev().find(|&&x| x != 0).map_or(true, |&lead| lead < 0) {
                return Err(LevinError::InvalidSchedule(
                    "polynomial n_r needs a positive leading coefficient".into(),
                ));
            }
        }
        Ok(Schedule {
            bases,
            speeds,
            start_value,
            n_rule,
            q_rule,
            cache: IndexCache::default(),
        })
    }

    /// `λ_j = j + 1`, `t_j = 2^j`, `a = 0` with the original `n_r`, `q_r`.
    pub fn corollary() -> Self {
        Schedule::new(
            BaseSequence::IntegersFromTwo,
            SpeedSequence::PowersOfTwo,
            Dyadic::zero(),
            NRule::Original,
            QRule::Original,
        )
        .expect("preset is valid")
    }

    /// `λ_j = j + 1`, `t_j = 2^j`, `a = 0` with `n_r = r²` and the derived `q_r`.
    pub fn quadratic() -> Self {
        Schedule::new(
            BaseSequence::IntegersFromTwo,
            SpeedSequence::PowersOfTwo,
            Dyadic::zero(),
            NRule::Quadratic,
            QRule::Derived,
        )
        .expect("preset is valid")
    }

    pub fn with_start_value(mut self, a: Dyadic) -> Result<Self> {
        if a.is_negative() {
            return Err(LevinError::InvalidSchedule("start value must be nonnegative".into()));
        }
        self.start_value = a;
        Ok(self)
    }

    pub fn lambda(&self, j: u64) -> Result<BaseSpec> {
        self.bases.lambda(j)
    }

    /// `n_r` for `r ≥ 0`; signed because `n_0 = −1` in the original rule.
    pub fn n_signed(&self, r: u64) -> Result<i64> {
        let v: i128 = match &self.n_rule {
            NRule::Original => {
                if r >= 62 {
                    return Err(LevinError::Precondition(format!("n_{r} = 2^{r} − 2 overflows")));
                }
                (1i128 << r) - 2
            }
            NRule::Quadratic => (r as i128) * (r as i128),
            NRule::Polynomial(c) => {
                let mut acc: i128 = 0;
                for &coef in c.iter().rev() {
                    acc = acc
                        .checked_mul(r as i128)
                        .and_then(|x| x.checked_add(coef as i128))
                        .ok_or_else(|| LevinError::Precondition(format!("n_{r} overflows")))?;
                }
                acc
            }
            NRule::Table(t) => {
                if r == 0 || r as usize > t.len() {
                    return Err(LevinError::InvalidSchedule(format!(
                        "n_{r} is outside the explicit table (1..={})",
                        t.len()
                    )));
                }
                t[r as usize - 1] as i128
            }
        };
        i64::try_from(v).map_err(|_| LevinError::Precondition(format!("n_{r} overflows")))
    }

    /// `n_r` for `r ≥ 1`.
    pub fn n_of(&self, r: u64) -> Result<u64> {
        if r == 0 {
            return Err(LevinError::Precondition("n_r is defined for r ≥ 1".into()));
        }
        let n = self.n_signed(r)?;
        u64::try_from(n).map_err(|_| LevinError::InvalidSchedule(format!("n_{r} = {n} is negative")))
    }

    /// `n_{r+1} − n_r`.
    pub fn block_growth(&self, r: u64) -> Result<u64> {
        let d = self.n_signed(r + 1)? - self.n_signed(r)?;
        u64::try_from(d).map_err(|_| {
            LevinError::InvalidSchedule(format!("n_r is not increasing at r={r} (n_(r+1) − n_r = {d})"))
        })
    }

    /// `q_r`. Defined for `r = 0` whenever the rule allows it.
    pub fn q_of(&self, r: u64) -> Result<Denominator> {
        let q = match &self.q_rule {
            QRule::Original => {
                if r >= 62 {
                    return Err(LevinError::Precondition(format!("log₂ q_{r} overflows")));
                }
                Denominator::Pow2((1u64 << r) + r + 1)
            }
            QRule::Derived => {
                let d1 = self.block_growth(r)? + 1;
                Denominator::Pow2(d1 + ceil_log2(d1))
            }
            QRule::LeastSufficient => {
                let d1 = self.block_growth(r)? + 1;
                // least k with 4^k ≥ d + 1
                let k = (ceil_log2(d1) + 1) / 2;
                Denominator::Pow2(d1 + k)
            }
            QRule::Pow2Offset(offset) => {
                let e = self.block_growth(r)? as i64 + offset;
                if e < 1 {
                    return Err(LevinError::InvalidSchedule(format!("q_{r} = 2^{e} is below 2")));
                }
                Denominator::Pow2(e as u64)
            }
            QRule::Constant(q) => Denominator::from_int(q.clone()),
            QRule::Table(t) => {
                if r == 0 || r as usize > t.len() {
                    return Err(LevinError::InvalidSchedule(format!(
                        "q_{r} is outside the explicit table (1..={})",
                        t.len()
                    )));
                }
                Denominator::from_int(t[r as usize - 1].clone())
            }
        };
        if let Denominator::Int(v) = &q {
            if *v < BigUint::from(2u32) {
                return Err(LevinError::InvalidSchedule(format!("q_{r} = {v} is below 2")));
            }
        }
        Ok(q)
    }

    fn loglog_term(&self, v: u64) -> Result<u64> {
        if let Some(&x) = self.cache.tables.read().unwrap().loglog.get(&v) {
            return Ok(x);
        }
        let x = 2 * ceil_abs_loglog2(&self.lambda(v)?)? + 5;
        self.cache.tables.write().unwrap().loglog.insert(v, x);
        Ok(x)
    }

    /// `ℓ_k = max(t_k, max_{1≤v≤k} 2⌈|log₂log₂λ_v|⌉ + 5)`.
    pub fn ell(&self, k: u64) -> Result<u64> {
        if k == 0 {
            return Err(LevinError::Precondition("ℓ_k is defined for k ≥ 1".into()));
        }
        if let Some(&x) = self.cache.tables.read().unwrap().ell.get(&k) {
            return Ok(x);
        }
        let inner = if k == 1 {
            self.loglog_term(1)?
        } else {
            // ℓ_{k-1} already folds in max over v < k; recompute the inner max
            // directly to keep the cache independent of t.
            (1..=k).try_fold(0u64, |m, v| Ok::<_, LevinError>(m.max(self.loglog_term(v)?)))?
        };
        let x = self.speeds.t(k)?.max(inner);
        self.cache.tables.write().unwrap().ell.insert(k, x);
        Ok(x)
    }

    /// Largest `k` for which both `λ_k` and `t_k` exist.
    fn max_k(&self) -> Option<u64> {
        match (self.bases.len(), self.speeds.len()) {
            (None, None) => None,
            (Some(a), None) | (None, Some(a)) => Some(a),
            (Some(a), Some(b)) => Some(a.min(b)),
        }
    }

    /// `ω(P)`: 1 on `[1, ℓ₂)`, otherwise the `k` with `P ∈ [ℓ_k, ℓ_{k+1})`.
    pub fn omega(&self, p: u64) -> Result<u64> {
        if p == 0 {
            return Err(LevinError::Precondition("ω(P) is defined for P ≥ 1".into()));
        }
        let mut k = 1;
        loop {
            if self.max_k().is_some_and(|m| k + 1 > m) {
                return Ok(k);
            }
            if self.ell(k + 1)? <= p {
                k += 1;
            } else {
                return Ok(k);
            }
        }
    }

    /// `n_{r,j} = ⌊n_r log_{λ_j} 2⌋`.
    pub fn n_rj(&self, r: u64, j: u64) -> Result<u64> {
        if let Some(&x) = self.cache.tables.read().unwrap().n_rj.get(&(r, j)) {
            return Ok(x);
        }
        let n = self.n_of(r)?;
        let x = floor_n_log_lambda_2(n, &self.lambda(j)?)?;
        self.cache.tables.write().unwrap().n_rj.insert((r, j), x);
        Ok(x)
    }

    /// `τ_{r,j} = n_{r+1,j} − n_{r,j}`.
    pub fn tau(&self, r: u64, j: u64) -> Result<u64> {
        Ok(self.n_rj(r + 1, j)? - self.n_rj(r, j)?)
    }

    /// `A_{r,j} = ⌊√τ_{r,j}⌋`.
    pub fn a_of(&self, r: u64, j: u64) -> Result<u64> {
        Ok(self.tau(r, j)?.sqrt())
    }

    /// `λ_j / (λ_j − 1)` in double precision.
    pub fn lambda_ratio(&self, j: u64) -> Result<f64> {
        let lambda = self.lambda(j)?;
        let (lo, _) = lambda.bounds();
        // the ratio is decreasing in λ, so the lower end gives the larger bound
        let r = &lo / (&lo - BigRational::one());
        Ok(r.to_f64().unwrap_or(f64::INFINITY))
    }

    /// `log_{λ_j} 2` in double precision.
    pub fn log_lambda_2(&self, j: u64) -> Result<f64> {
        Ok(std::f64::consts::LN_2 / self.lambda(j)?.to_f64().ln())
    }
}

fn ceil_log2(x: u64) -> u64 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros() as u64
    }
}

const MAX_LOGLOG_STEPS: u64 = 24;

/// `⌈|log₂ log₂ x|⌉` for a rational `x > 1`.
fn ceil_abs_loglog2_rational(x: &BigRational) -> Result<u64> {
    let two = BigRational::from_integer(BigInt::from(2));
    if *x >= two {
        // least k with x ≤ 2^{2^k}
        for k in 0..64u64 {
            let p = 1u64 << k;
            if x.numer().bits() <= p || *x <= BigRational::from_integer(BigInt::one() << p) {
                return Ok(k);
            }
        }
        unreachable!("rational bases have fewer than 2^64 bits");
    }
    // 1 < x < 2: least k with x^{2^k} ≥ 2
    let mut power = x.clone();
    for k in 1..=MAX_LOGLOG_STEPS {
        power = &power * &power;
        if power >= two {
            return Ok(k);
        }
    }
    Err(LevinError::PrecisionExhausted(format!(
        "base is within 2^-{MAX_LOGLOG_STEPS}-squarings of 1"
    )))
}

/// Certified `⌈|log₂ log₂ λ|⌉`.
pub fn ceil_abs_loglog2(lambda: &BaseSpec) -> Result<u64> {
    let (lo, hi) = lambda.bounds();
    let a = ceil_abs_loglog2_rational(&lo)?;
    if lo == hi {
        return Ok(a);
    }
    let b = ceil_abs_loglog2_rational(&hi)?;
    if a != b {
        return Err(LevinError::PrecisionExhausted(format!(
            "⌈|log₂log₂λ|⌉ of {lambda} is not determined by its enclosure"
        )));
    }
    Ok(a)
}

/// Largest `m` with `x^m ≤ 2^n` for rational `x > 1`.
fn floor_n_log_x_2(n: u64, x: &BigRational) -> u64 {
    let p = x.numer().to_biguint().expect("positive");
    let q = x.denom().to_biguint().expect("positive");
    if q.is_one() && p.count_ones() == 1 {
        return n / p.trailing_zeros().unwrap();
    }
    let fits = |m: u64| -> bool {
        // p^m ≤ 2^n q^m
        let lhs = p.pow(m as u32);
        let rhs = (BigUint::one() << n) * q.pow(m as u32);
        lhs <= rhs
    };
    let est = (n as f64 * std::f64::consts::LN_2 / x.to_f64().unwrap().ln()).floor() as u64;
    let mut m = est.saturating_sub(1);
    while m > 0 && !fits(m) {
        m -= 1;
    }
    while fits(m + 1) {
        m += 1;
    }
    m
}

/// Certified `⌊n log_λ 2⌋`.
pub fn floor_n_log_lambda_2(n: u64, lambda: &BaseSpec) -> Result<u64> {
    let (lo, hi) = lambda.bounds();
    let a = floor_n_log_x_2(n, &hi);
    if lo == hi {
        return Ok(a);
    }
    let b = floor_n_log_x_2(n, &lo);
    if a != b {
        return Err(LevinError::PrecisionExhausted(format!(
            "⌊{n}·log_λ 2⌋ for λ = {lambda} is not determined by its enclosure"
        )));
    }
    Ok(a)
}

/// One verdict of a schedule check at a given `r`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckOutcome {
    pub r: u64,
    pub pass: bool,
    pub detail: String,
}

/// Per-`r` outcomes of a schedule check plus an overall reason when it fails
/// for a structural cause (such as a bounded `q_r`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckReport {
    pub name: &'static str,
    pub outcomes: Vec<CheckOutcome>,
    pub reason: Option<String>,
}

impl CheckReport {
    pub fn pass(&self) -> bool {
        self.reason.is_none() && self.outcomes.iter().all(|o| o.pass)
    }

    pub fn first_failure(&self) -> Option<&CheckOutcome> {
        self.outcomes.iter().find(|o| !o.pass)
    }
}

/// `2^{d + 1 + ½ log₂(d + 1)} ≤ q_r` with `d = n_{r+1} − n_r`, for each `r ≤ r_max`.
///
/// Squared, the condition reads `(d + 1)·4^{d+1} ≤ q_r²`, which is checked
/// exactly.
pub fn check_q_sufficient(schedule: &Schedule, r_max: u64) -> Result<CheckReport> {
    let mut outcomes = Vec::new();
    for r in 1..=r_max {
        let d1 = schedule.block_growth(r)? as u128 + 1;
        let q = schedule.q_of(r)?;
        let pass = match &q {
            Denominator::Pow2(e) => {
                let slack = 2 * (*e as i128) - 2 * d1 as i128;
                slack >= 0 && (slack >= 127 || d1 <= 1u128 << slack)
            }
            Denominator::Int(v) => {
                let lhs = BigUint::from(d1) << (2 * d1 as u64);
                lhs <= v * v
            }
        };
        outcomes.push(CheckOutcome {
            r,
            pass,
            detail: format!("n_(r+1)−n_r = {}, q_r = {q}", d1 - 1),
        });
    }
    Ok(CheckReport {
        name: "sufficient",
        outcomes,
        reason: None,
    })
}

/// `q_r > 2^{n_{r+1} − n_r}` for each `r ≤ r_max`; a constant `q_r` fails
/// outright.
pub fn check_q_necessary(schedule: &Schedule, r_max: u64) -> Result<CheckReport> {
    let reason = matches!(schedule.q_rule, QRule::Constant(_)).then(|| "bounded q_r".to_string());
    let mut outcomes = Vec::new();
    for r in 1..=r_max {
        let d = schedule.block_growth(r)?;
        let q = schedule.q_of(r)?;
        outcomes.push(CheckOutcome {
            r,
            pass: q.exceeds_pow2(d),
            detail: format!("n_(r+1)−n_r = {d}, q_r = {q}"),
        });
    }
    Ok(CheckReport {
        name: "necessary",
        outcomes,
        reason,
    })
}

/// `Σ_{m<r} log₂ q_m ≤ n_r` for each `r ≤ r_max`. The sum starts at `m = 0`
/// when the rule defines `q_0`, otherwise at `m = 1`.
pub fn concatenation_feasible(schedule: &Schedule, r_max: u64) -> Result<CheckReport> {
    let first = if schedule.q_of(0).is_ok() && schedule.n_signed(0).is_ok() { 0 } else { 1 };
    let mut pow2_sum: u128 = 0;
    let mut product = BigUint::one();
    let mut outcomes = Vec::new();
    for r in 1..=r_max {
        let m = r - 1;
        if m >= first {
            match schedule.q_of(m)? {
                Denominator::Pow2(e) => pow2_sum += e as u128,
                Denominator::Int(v) => product *= v,
            }
        }
        let n = schedule.n_signed(r)? as i128;
        let room = n - pow2_sum as i128;
        // product ≤ 2^room
        let pass = room >= 0 && (&product - 1u32).bits() as i128 <= room;
        outcomes.push(CheckOutcome {
            r,
            pass,
            detail: format!("n_r = {n}, Σ log₂ q_m ≈ {:.1}", pow2_sum as f64 + big_log2(&product)),
        });
    }
    Ok(CheckReport {
        name: "concatenation",
        outcomes,
        reason: None,
    })
}

/// Growth class of `n_r` and the matching discrepancy bound template.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Growth {
    /// `n_r` linear in `r`: the bound does not go to zero.
    NonNormalLinear,
    /// `n_r` of degree `h ≥ 2`: `O(log²P·ω(P)/P^{(h−1)/2h})`.
    Polynomial { degree: u32, exponent_num: u32, exponent_den: u32 },
    /// `n_r = 2^r − 2`: `O(log²P·ω(P)/√P)`.
    Exponential { exponent_num: u32, exponent_den: u32 },
}

impl Growth {
    /// Exponent of `P` in the denominator of the bound (0 for linear).
    pub fn exponent(&self) -> f64 {
        match self {
            Growth::NonNormalLinear => 0.0,
            Growth::Polynomial { exponent_num, exponent_den, .. }
            | Growth::Exponential { exponent_num, exponent_den } => {
                *exponent_num as f64 / *exponent_den as f64
            }
        }
    }

    pub fn bound_template(&self) -> String {
        match self {
            Growth::NonNormalLinear => "O(log²P·ω(P)), does not go to 0".to_string(),
            Growth::Polynomial { exponent_num, exponent_den, .. } => {
                format!("O(log²P·ω(P)/P^({exponent_num}/{exponent_den}))")
            }
            Growth::Exponential { .. } => "O(log²P·ω(P)/√P)".to_string(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Growth::NonNormalLinear => "non-normal-linear".into(),
            Growth::Polynomial { degree, .. } => format!("polynomial-degree-{degree}"),
            Growth::Exponential { .. } => "exponential".into(),
        }
    }
}

fn polynomial_growth(h: u32) -> Growth {
    if h <= 1 {
        return Growth::NonNormalLinear;
    }
    let (num, den) = (h - 1, 2 * h);
    let g = num_integer::gcd(num, den);
    Growth::Polynomial {
        degree: h,
        exponent_num: num / g,
        exponent_den: den / g,
    }
}

pub fn classify_growth(schedule: &Schedule) -> Result<Growth> {
    match &schedule.n_rule {
        NRule::Original => Ok(Growth::Exponential {
            exponent_num: 1,
            exponent_den: 2,
        }),
        NRule::Quadratic => Ok(polynomial_growth(2)),
        NRule::Polynomial(c) => {
            let h = c.iter().rposition(|&x| x != 0).unwrap_or(0) as u32;
            Ok(polynomial_growth(h))
        }
        NRule::Table(_) => Err(LevinError::UnrecognizedRule(
            "explicit n_r tables are not classified".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// JSON document

fn parse_big<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| LevinError::InvalidSchedule(format!("{what}: {s:?} is not a decimal integer")))
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum BaseDoc {
    Integer { value: String },
    Rational { numerator: String, denominator: String },
    Real { approx: Dyadic, radius_exp: u32 },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum BasesDoc {
    IntegersFromTwo,
    Explicit { values: Vec<BaseDoc> },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum SpeedsDoc {
    PowersOfTwo,
    Explicit { values: Vec<String> },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum NRuleDoc {
    Original,
    Quadratic,
    Polynomial { coefficients: Vec<String> },
    Table { values: Vec<String> },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum QRuleDoc {
    Original,
    Derived,
    LeastSufficient,
    Pow2Offset { offset: i64 },
    Constant { value: String },
    Table { values: Vec<String> },
}

/// Wire form of a [`Schedule`]; big integers are decimal strings.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleDoc {
    bases: BasesDoc,
    speeds: SpeedsDoc,
    start_value: Dyadic,
    n_rule: NRuleDoc,
    q_rule: QRuleDoc,
}

impl From<&Schedule> for ScheduleDoc {
    fn from(s: &Schedule) -> Self {
        let base_doc = |b: &BaseSpec| match b {
            BaseSpec::Integer(n) => BaseDoc::Integer { value: n.to_string() },
            BaseSpec::Rational(r) => BaseDoc::Rational {
                numerator: r.numer().to_string(),
                denominator: r.denom().to_string(),
            },
            BaseSpec::Real { approx, radius_exp } => BaseDoc::Real {
                approx: approx.clone(),
                radius_exp: *radius_exp,
            },
        };
        ScheduleDoc {
            bases: match &s.bases {
                BaseSequence::IntegersFromTwo => BasesDoc::IntegersFromTwo,
                BaseSequence::Explicit(v) => BasesDoc::Explicit {
                    values: v.iter().map(base_doc).collect(),
                },
            },
            speeds: match &s.speeds {
                SpeedSequence::PowersOfTwo => SpeedsDoc::PowersOfTwo,
                SpeedSequence::Explicit(v) => SpeedsDoc::Explicit {
                    values: v.iter().map(u64::to_string).collect(),
                },
            },
            start_value: s.start_value.clone(),
            n_rule: match &s.n_rule {
                NRule::Original => NRuleDoc::Original,
                NRule::Quadratic => NRuleDoc::Quadratic,
                NRule::Polynomial(c) => NRuleDoc::Polynomial {
                    coefficients: c.iter().map(i64::to_string).collect(),
                },
                NRule::Table(t) => NRuleDoc::Table {
                    values: t.iter().map(u64::to_string).collect(),
                },
            },
            q_rule: match &s.q_rule {
                QRule::Original => QRuleDoc::Original,
                QRule::Derived => QRuleDoc::Derived,
                QRule::LeastSufficient => QRuleDoc::LeastSufficient,
                QRule::Pow2Offset(o) => QRuleDoc::Pow2Offset { offset: *o },
                QRule::Constant(q) => QRuleDoc::Constant { value: q.to_string() },
                QRule::Table(t) => QRuleDoc::Table {
                    values: t.iter().map(BigUint::to_string).collect(),
                },
            },
        }
    }
}

impl TryFrom<ScheduleDoc> for Schedule {
    type Error = LevinError;

    fn try_from(doc: ScheduleDoc) -> Result<Self> {
        let base = |b: BaseDoc| -> Result<BaseSpec> {
            match b {
                BaseDoc::Integer { value } => {
                    let v: BigUint = parse_big(&value, "integer base")?;
                    BaseSpec::Integer(v).validated()
                }
                BaseDoc::Rational { numerator, denominator } => {
                    let n: BigInt = parse_big(&numerator, "base numerator")?;
                    let d: BigInt = parse_big(&denominator, "base denominator")?;
                    if d.is_zero() {
                        return Err(LevinError::InvalidSchedule("zero denominator".into()));
                    }
                    let r = BigRational::new(n, d);
                    if r.is_integer() && r.is_positive() {
                        BaseSpec::Integer(r.to_integer().to_biguint().unwrap()).validated()
                    } else {
                        BaseSpec::Rational(r).validated()
                    }
                }
                BaseDoc::Real { approx, radius_exp } => BaseSpec::real(approx, radius_exp),
            }
        };
        let bases = match doc.bases {
            BasesDoc::IntegersFromTwo => BaseSequence::IntegersFromTwo,
            BasesDoc::Explicit { values } => {
                BaseSequence::Explicit(values.into_iter().map(base).collect::<Result<_>>()?)
            }
        };
        let speeds = match doc.speeds {
            SpeedsDoc::PowersOfTwo => SpeedSequence::PowersOfTwo,
            SpeedsDoc::Explicit { values } => SpeedSequence::Explicit(
                values.iter().map(|v| parse_big(v, "speed")).collect::<Result<_>>()?,
            ),
        };
        let n_rule = match doc.n_rule {
            NRuleDoc::Original => NRule::Original,
            NRuleDoc::Quadratic => NRule::Quadratic,
            NRuleDoc::Polynomial { coefficients } => NRule::Polynomial(
                coefficients.iter().map(|c| parse_big(c, "coefficient")).collect::<Result<_>>()?,
            ),
            NRuleDoc::Table { values } => {
                NRule::Table(values.iter().map(|v| parse_big(v, "n_r")).collect::<Result<_>>()?)
            }
        };
        let q_rule = match doc.q_rule {
            QRuleDoc::Original => QRule::Original,
            QRuleDoc::Derived => QRule::Derived,
            QRuleDoc::LeastSufficient => QRule::LeastSufficient,
            QRuleDoc::Pow2Offset { offset } => QRule::Pow2Offset(offset),
            QRuleDoc::Constant { value } => QRule::Constant(parse_big(&value, "q")?),
            QRuleDoc::Table { values } => {
                QRule::Table(values.iter().map(|v| parse_big(v, "q_r")).collect::<Result<_>>()?)
            }
        };
        Schedule::new(bases, speeds, doc.start_value, n_rule, q_rule)
    }
}

impl Schedule {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ScheduleDoc::from(self)).expect("schedule serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ScheduleDoc = serde_json::from_str(text)?;
        Schedule::try_from(doc)
    }
}

impl Serialize for Schedule {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ScheduleDoc::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Schedule {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = ScheduleDoc::deserialize(deserializer)?;
        Schedule::try_from(doc).map_err(serde::de::Error::custom)
    }
}
