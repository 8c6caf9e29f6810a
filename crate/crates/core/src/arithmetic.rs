//! Exact dyadic arithmetic and error-tracked orbits modulo one.
//!
//! Everything the construction adds together is of the form `k / 2^s`, so
//! [`Dyadic`] never rounds. Orbits `{β λ^x}` are produced as [`UnitFixed`]
//! values: a fixed-point fraction together with a bound on the distance to
//! the true value. For integer bases that bound is always zero.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{LevinError, Result};

/// Exact rational `numerator / 2^scale` in canonical form.
///
/// Canonical means the numerator is odd, or the scale is zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dyadic {
    numerator: BigInt,
    scale: u64,
}

impl Dyadic {
    pub fn new(numerator: impl Into<BigInt>, scale: u64) -> Self {
        let mut numerator = numerator.into();
        let mut scale = scale;
        if numerator.is_zero() {
            scale = 0;
        } else if scale > 0 {
            let tz = numerator.trailing_zeros().unwrap_or(0).min(scale);
            if tz > 0 {
                numerator >>= tz;
                scale -= tz;
            }
        }
        Dyadic { numerator, scale }
    }

    pub fn zero() -> Self {
        Dyadic {
            numerator: BigInt::zero(),
            scale: 0,
        }
    }

    pub fn from_integer(value: impl Into<BigInt>) -> Self {
        Dyadic::new(value, 0)
    }

    /// `2^exp` for any signed exponent.
    pub fn pow2(exp: i64) -> Self {
        if exp >= 0 {
            Dyadic::new(BigInt::one() << exp as u64, 0)
        } else {
            Dyadic::new(BigInt::one(), exp.unsigned_abs())
        }
    }

    pub fn numerator(&self) -> &BigInt {
        &self.numerator
    }

    pub fn scale(&self) -> u64 {
        self.scale
    }

    pub fn is_zero(&self) -> bool {
        self.numerator.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.numerator.is_negative()
    }

    /// Multiply by `2^k`.
    pub fn mul_pow2(&self, k: i64) -> Self {
        if k >= 0 {
            let k = k as u64;
            if k >= self.scale {
                Dyadic::new(&self.numerator << (k - self.scale), 0)
            } else {
                Dyadic::new(self.numerator.clone(), self.scale - k)
            }
        } else {
            Dyadic::new(self.numerator.clone(), self.scale + k.unsigned_abs())
        }
    }

    /// Numerator of `self` written over `2^scale`; requires `scale >= self.scale`.
    pub fn numerator_at(&self, scale: u64) -> BigInt {
        debug_assert!(scale >= self.scale);
        &self.numerator << (scale - self.scale)
    }

    pub fn floor(&self) -> BigInt {
        if self.scale == 0 {
            return self.numerator.clone();
        }
        self.numerator.div_floor(&(BigInt::one() << self.scale))
    }

    /// `x - floor(x)`, exactly, in `[0, 1)`.
    pub fn frac(&self) -> Dyadic {
        if self.scale == 0 {
            return Dyadic::zero();
        }
        let modulus = BigInt::one() << self.scale;
        Dyadic::new(self.numerator.mod_floor(&modulus), self.scale)
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.numerator.clone(), BigInt::one() << self.scale)
    }

    pub fn to_f64(&self) -> f64 {
        // Keep 64 significant bits before converting so huge scales stay finite.
        let bits = self.numerator.bits();
        if bits > 64 {
            let drop = bits - 64;
            let top = (&self.numerator >> drop).to_f64().unwrap_or(f64::NAN);
            top * 2f64.powi(drop as i32 - self.scale as i32)
        } else {
            let n = self.numerator.to_f64().unwrap_or(f64::NAN);
            if self.scale > 1000 {
                n * 2f64.powi(-1000) * 2f64.powi(1000 - self.scale as i32)
            } else {
                n * 2f64.powi(-(self.scale as i32))
            }
        }
    }

    /// Binary digits of the fractional part, most significant first.
    pub fn fraction_bits(&self) -> String {
        let f = self.frac();
        let n = f.numerator.magnitude().clone();
        (0..f.scale)
            .rev()
            .map(|i| if n.bit(i) { '1' } else { '0' })
            .collect()
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let s = self.scale.max(other.scale);
        self.numerator_at(s).cmp(&other.numerator_at(s))
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for &Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &Dyadic) -> Dyadic {
        let s = self.scale.max(rhs.scale);
        Dyadic::new(self.numerator_at(s) + rhs.numerator_at(s), s)
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        &self + &rhs
    }
}

impl Sub for &Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &Dyadic) -> Dyadic {
        let s = self.scale.max(rhs.scale);
        Dyadic::new(self.numerator_at(s) - rhs.numerator_at(s), s)
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: Dyadic) -> Dyadic {
        &self - &rhs
    }
}

impl Mul for &Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: &Dyadic) -> Dyadic {
        Dyadic::new(&self.numerator * &rhs.numerator, self.scale + rhs.scale)
    }
}

impl Mul for Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: Dyadic) -> Dyadic {
        &self * &rhs
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic::new(-self.numerator, self.scale)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.scale == 0 {
            write!(f, "{}", self.numerator)
        } else {
            write!(f, "{}/2^{}", self.numerator, self.scale)
        }
    }
}

/// Parses the [`Display`](fmt::Display) form: `n` or `n/2^s`.
impl std::str::FromStr for Dyadic {
    type Err = LevinError;

    fn from_str(text: &str) -> Result<Self> {
        let bad = || LevinError::Precondition(format!("{text:?} is not of the form n or n/2^s"));
        let text = text.trim();
        let (num, scale) = match text.split_once('/') {
            None => (text, 0),
            Some((num, den)) => {
                let exp = den.trim().strip_prefix("2^").ok_or_else(bad)?;
                (num, exp.parse().map_err(|_| bad())?)
            }
        };
        let numerator: BigInt = num.trim().parse().map_err(|_| bad())?;
        Ok(Dyadic::new(numerator, scale))
    }
}

impl Dyadic {
    /// `⌊√n · 2^bits⌋ / 2^bits`.
    pub fn sqrt_floor(n: u64, bits: u64) -> Dyadic {
        let radicand = BigUint::from(n) << (2 * bits);
        Dyadic::new(BigInt::from(radicand.sqrt()), bits)
    }
}

#[derive(Serialize, Deserialize)]
struct DyadicRepr {
    numerator: String,
    scale: u64,
}

impl Serialize for Dyadic {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        DyadicRepr {
            numerator: self.numerator.to_string(),
            scale: self.scale,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Dyadic {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = DyadicRepr::deserialize(deserializer)?;
        let numerator: BigInt = repr
            .numerator
            .parse()
            .map_err(|_| serde::de::Error::custom("numerator is not a decimal integer"))?;
        Ok(Dyadic::new(numerator, repr.scale))
    }
}

/// A point of `[0, 1)` stored as `numerator / 2^bits`, with a bound on the
/// distance to the value it stands for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnitFixed {
    numerator: BigUint,
    bits: u64,
    error_radius: Dyadic,
}

impl UnitFixed {
    pub fn exact(numerator: BigUint, bits: u64) -> Self {
        debug_assert!(numerator.bits() <= bits);
        UnitFixed {
            numerator,
            bits,
            error_radius: Dyadic::zero(),
        }
    }

    pub fn with_radius(numerator: BigUint, bits: u64, error_radius: Dyadic) -> Self {
        debug_assert!(numerator.bits() <= bits);
        debug_assert!(!error_radius.is_negative());
        UnitFixed {
            numerator,
            bits,
            error_radius,
        }
    }

    /// The fractional part of a dyadic, exactly.
    pub fn from_dyadic(x: &Dyadic) -> Self {
        let f = x.frac();
        UnitFixed::exact(f.numerator.magnitude().clone(), f.scale)
    }

    /// Nearest 64-bit fixed-point value to `x` (which must lie in `[0, 1)`).
    pub fn from_f64(x: f64) -> Self {
        assert!((0.0..1.0).contains(&x), "{x} is outside [0, 1)");
        let scaled = x * 2f64.powi(64);
        let n = scaled.floor();
        let radius = if n == scaled {
            Dyadic::zero()
        } else {
            Dyadic::pow2(-64)
        };
        UnitFixed::with_radius(BigUint::from(n as u64), 64, radius)
    }

    pub fn numerator(&self) -> &BigUint {
        &self.numerator
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn error_radius(&self) -> &Dyadic {
        &self.error_radius
    }

    pub fn is_exact(&self) -> bool {
        self.error_radius.is_zero()
    }

    pub fn to_dyadic(&self) -> Dyadic {
        Dyadic::new(BigInt::from(self.numerator.clone()), self.bits)
    }

    /// The first 128 fractional bits. Exact when `bits <= 128`.
    pub fn top_u128(&self) -> u128 {
        if self.bits <= 128 {
            let v = self.numerator.to_u128().expect("fits in 128 bits");
            if self.bits == 0 {
                0
            } else {
                v << (128 - self.bits)
            }
        } else {
            (&self.numerator >> (self.bits - 128))
                .to_u128()
                .expect("fits in 128 bits")
        }
    }

    pub fn to_f64(&self) -> f64 {
        u128_to_unit_f64(self.top_u128())
    }
}

pub(crate) fn u128_to_unit_f64(x: u128) -> f64 {
    // Only the top 64 bits can influence a double.
    ((x >> 64) as u64) as f64 * 2f64.powi(-64) + ((x as u64) as f64) * 2f64.powi(-128)
}

/// A base `λ > 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BaseSpec {
    Integer(BigUint),
    Rational(BigRational),
    /// A real base known only as `approx ± 2^-radius_exp`.
    Real { approx: Dyadic, radius_exp: u32 },
}

impl BaseSpec {
    pub fn integer(value: u64) -> Result<Self> {
        BaseSpec::Integer(BigUint::from(value)).validated()
    }

    pub fn rational(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(LevinError::Precondition("zero denominator".into()));
        }
        let r = BigRational::new(num.into(), den.into());
        if r.is_integer() && r.is_positive() {
            return BaseSpec::Integer(r.to_integer().to_biguint().unwrap()).validated();
        }
        BaseSpec::Rational(r).validated()
    }

    pub fn real(approx: Dyadic, radius_exp: u32) -> Result<Self> {
        BaseSpec::Real { approx, radius_exp }.validated()
    }

    pub(crate) fn validated(self) -> Result<Self> {
        let (lo, _) = self.bounds();
        if lo <= BigRational::one() {
            return Err(LevinError::Precondition(format!(
                "base {self} is not certified to exceed 1"
            )));
        }
        Ok(self)
    }

    /// Rational enclosure `[lo, hi]` of the base.
    pub fn bounds(&self) -> (BigRational, BigRational) {
        match self {
            BaseSpec::Integer(n) => {
                let r = BigRational::from_integer(BigInt::from(n.clone()));
                (r.clone(), r)
            }
            BaseSpec::Rational(r) => (r.clone(), r.clone()),
            BaseSpec::Real { approx, radius_exp } => {
                let rad = Dyadic::pow2(-(*radius_exp as i64));
                ((approx - &rad).to_rational(), (approx + &rad).to_rational())
            }
        }
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self, BaseSpec::Real { .. })
    }

    pub fn as_integer(&self) -> Option<&BigUint> {
        match self {
            BaseSpec::Integer(n) => Some(n),
            _ => None,
        }
    }

    /// `Some(e)` when the base is exactly `2^e`.
    pub fn power_of_two_exponent(&self) -> Option<u64> {
        let n = self.as_integer()?;
        if n.count_ones() == 1 {
            n.trailing_zeros()
        } else {
            None
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            BaseSpec::Integer(n) => n.to_f64().unwrap_or(f64::INFINITY),
            BaseSpec::Rational(r) => r.to_f64().unwrap_or(f64::NAN),
            BaseSpec::Real { approx, .. } => approx.to_f64(),
        }
    }
}

impl fmt::Display for BaseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseSpec::Integer(n) => write!(f, "{n}"),
            BaseSpec::Rational(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            BaseSpec::Real { approx, radius_exp } => {
                write!(f, "{:.12}±2^-{radius_exp}", approx.to_f64())
            }
        }
    }
}

/// `x - floor(x)`, exactly.
pub fn frac(x: &Dyadic) -> Dyadic {
    x.frac()
}

/// The points `{β λ^(start_exp + x)}` for `x` in `0..count`.
///
/// Integer bases are exact: the fractional part is carried forward by
/// multiplying the residue by `λ` modulo `2^scale(β)`. Rational bases are
/// exact before being rounded down to `precision_bits`. Real bases go through
/// outward-rounded interval arithmetic at `precision_bits` and fail with
/// `PrecisionExhausted` as soon as an interval straddles an integer.
pub fn orbit_mod1(
    beta: &Dyadic,
    base: &BaseSpec,
    start_exp: u64,
    count: usize,
    precision_bits: u64,
) -> Result<Vec<UnitFixed>> {
    match base {
        BaseSpec::Integer(lambda) => Ok(integer_orbit(beta, lambda, start_exp, count)),
        BaseSpec::Rational(lambda) => rational_orbit(beta, lambda, start_exp, count, precision_bits),
        BaseSpec::Real { .. } => real_orbit(beta, base, start_exp, count, precision_bits),
    }
}

fn integer_orbit(beta: &Dyadic, lambda: &BigUint, start_exp: u64, count: usize) -> Vec<UnitFixed> {
    let s = beta.scale();
    if s == 0 {
        return vec![UnitFixed::exact(BigUint::zero(), 0); count];
    }
    let modulus = BigUint::one() << s;
    let residue = beta.frac().numerator_at(s).to_biguint().expect("frac is nonnegative");
    let mut r = residue * lambda.modpow(&BigUint::from(start_exp), &modulus) % &modulus;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(UnitFixed::exact(r.clone(), s));
        r = (r * lambda) % &modulus;
    }
    out
}

fn require_nonnegative(beta: &Dyadic) -> Result<()> {
    if beta.is_negative() {
        return Err(LevinError::Precondition(
            "non-integer bases need a nonnegative multiplier".into(),
        ));
    }
    Ok(())
}

fn rational_orbit(
    beta: &Dyadic,
    lambda: &BigRational,
    start_exp: u64,
    count: usize,
    precision_bits: u64,
) -> Result<Vec<UnitFixed>> {
    require_nonnegative(beta)?;
    let p = lambda.numer().to_biguint().expect("base is positive");
    let q = lambda.denom().to_biguint().expect("base is positive");
    let mut num = beta.numerator().to_biguint().expect("nonnegative") * p.pow(start_exp as u32);
    let mut den = (BigUint::one() << beta.scale()) * q.pow(start_exp as u32);
    let ulp = Dyadic::pow2(-(precision_bits as i64));
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let shifted = (&num % &den) << precision_bits;
        let (fixed, rem) = shifted.div_rem(&den);
        let radius = if rem.is_zero() { Dyadic::zero() } else { ulp.clone() };
        out.push(UnitFixed::with_radius(fixed, precision_bits, radius));
        num *= &p;
        den *= &q;
    }
    Ok(out)
}

fn real_orbit(
    beta: &Dyadic,
    base: &BaseSpec,
    start_exp: u64,
    count: usize,
    precision_bits: u64,
) -> Result<Vec<UnitFixed>> {
    require_nonnegative(beta)?;
    let w = precision_bits;
    let one = BigUint::one() << w;
    let (lam_lo, lam_hi) = base.bounds();
    let to_fixed_floor = |r: &BigRational| -> BigUint {
        ((r.numer() << w) / r.denom()).to_biguint().expect("positive")
    };
    let to_fixed_ceil = |r: &BigRational| -> BigUint {
        let (q, rem) = (r.numer() << w).div_rem(r.denom());
        let q = q.to_biguint().expect("positive");
        if rem.is_zero() { q } else { q + 1u32 }
    };
    let lam_lo = to_fixed_floor(&lam_lo);
    let lam_hi = to_fixed_ceil(&lam_hi);
    let mul_floor = |a: &BigUint, b: &BigUint| -> BigUint { (a * b) >> w };
    let mul_ceil = |a: &BigUint, b: &BigUint| -> BigUint {
        let p = a * b;
        let q = &p >> w;
        if (&q << w) == p { q } else { q + 1u32 }
    };
    let beta_rat = beta.to_rational();
    let mut lo = to_fixed_floor(&beta_rat);
    let mut hi = to_fixed_ceil(&beta_rat);
    for _ in 0..start_exp {
        lo = mul_floor(&lo, &lam_lo);
        hi = mul_ceil(&hi, &lam_hi);
    }
    let mut out = Vec::with_capacity(count);
    let mut running_radius = Dyadic::zero();
    for x in 0..count {
        let (ilo, flo) = lo.div_rem(&one);
        let ihi = &hi >> w;
        if ilo != ihi {
            return Err(LevinError::PrecisionExhausted(format!(
                "orbit point {} straddles an integer at {w} working bits",
                start_exp + x as u64
            )));
        }
        let width = &hi - &lo;
        // Midpoint at w+1 bits; the radius is half the enclosure width.
        let mid = (flo << 1u32) + &width;
        let radius = Dyadic::new(BigInt::from(width), w + 1);
        if radius > running_radius {
            running_radius = radius;
        }
        let mid_numerator = mid;
        let point = if mid_numerator.bits() > w + 1 {
            return Err(LevinError::PrecisionExhausted(format!(
                "orbit point {} is within its error radius of 1",
                start_exp + x as u64
            )));
        } else {
            UnitFixed::with_radius(mid_numerator, w + 1, running_radius.clone())
        };
        if running_radius >= Dyadic::pow2(-2) {
            return Err(LevinError::PrecisionExhausted(format!(
                "error radius reached 1/4 at orbit point {}",
                start_exp + x as u64
            )));
        }
        out.push(point);
        lo = mul_floor(&lo, &lam_lo);
        hi = mul_ceil(&hi, &lam_hi);
    }
    Ok(out)
}

/// Exact `{β λ^(start_exp + x)}` for a rational multiplier and an exact base.
pub fn orbit_mod1_rational(
    beta: &BigRational,
    base: &BaseSpec,
    start_exp: u64,
    count: usize,
) -> Result<Vec<BigRational>> {
    let lambda = match base {
        BaseSpec::Integer(n) => BigRational::from_integer(BigInt::from(n.clone())),
        BaseSpec::Rational(r) => r.clone(),
        BaseSpec::Real { .. } => {
            return Err(LevinError::Precondition(
                "exact rational orbits need an integer or rational base".into(),
            ))
        }
    };
    let mut v = beta * num_traits::pow(lambda.clone(), start_exp as usize);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let f = v.clone() - v.floor();
        out.push(f.clone());
        v = if lambda.is_integer() { f * &lambda } else { v * &lambda };
    }
    Ok(out)
}

/// `(cos 2πθ, sin 2πθ)`.
pub fn unit_exp(theta: &UnitFixed) -> (f64, f64) {
    unit_exp_u128(theta.top_u128())
}

/// `(cos 2πθ, sin 2πθ)` for `θ = x / 2^128`.
///
/// The quadrant comes from the top two bits, so quarter turns are exact.
#[inline]
pub fn unit_exp_u128(x: u128) -> (f64, f64) {
    let quadrant = (x >> 126) as u8;
    let rest = u128_to_unit_f64(x << 2);
    let (s, c) = (rest * std::f64::consts::FRAC_PI_2).sin_cos();
    match quadrant {
        0 => (c, s),
        1 => (-s, c),
        2 => (-c, -s),
        _ => (s, -c),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(n: i64, s: u64) -> Dyadic {
        Dyadic::new(n, s)
    }

    #[test]
    fn canonical_form() {
        let x = d(12, 4);
        assert_eq!(x.numerator(), &BigInt::from(3));
        assert_eq!(x.scale(), 2);
        assert_eq!(d(0, 9).scale(), 0);
        assert_eq!(d(8, 2), Dyadic::from_integer(2));
    }

    #[test]
    fn frac_examples() {
        assert_eq!(frac(&d(5, 2)), d(1, 2));
        assert_eq!(frac(&d(-1, 2)), d(3, 2));
        assert_eq!(frac(&Dyadic::from_integer(3)), Dyadic::zero());
    }

    #[test]
    fn ordering_and_arithmetic() {
        assert!(d(1, 2) < d(3, 2));
        assert!(d(-1, 1) < Dyadic::zero());
        assert_eq!(&d(1, 1) + &d(1, 2), d(3, 2));
        assert_eq!(&d(1, 1) - &d(3, 2), d(-1, 2));
        assert_eq!(&d(3, 2) * &d(5, 3), d(15, 5));
        assert_eq!(d(3, 2).mul_pow2(2), Dyadic::from_integer(3));
        assert_eq!(Dyadic::pow2(-3), d(1, 3));
    }

    #[test]
    fn fraction_bits_listing() {
        assert_eq!(d(13, 4).fraction_bits(), "1101");
        assert_eq!(d(21, 4).fraction_bits(), "0101");
    }

    #[test]
    fn doubling_orbit() {
        let base = BaseSpec::integer(2).unwrap();
        let pts = orbit_mod1(&d(1, 2), &base, 0, 3, 64).unwrap();
        let vals: Vec<Dyadic> = pts.iter().map(|p| p.to_dyadic()).collect();
        assert_eq!(vals, vec![d(1, 2), d(1, 1), Dyadic::zero()]);
        assert!(pts.iter().all(UnitFixed::is_exact));
    }

    #[test]
    fn third_under_doubling_via_rational_path() {
        let base = BaseSpec::integer(2).unwrap();
        let third = BigRational::new(1.into(), 3.into());
        let got = orbit_mod1_rational(&third, &base, 0, 4).unwrap();
        let expect: Vec<BigRational> = [1, 2, 1, 2]
            .iter()
            .map(|&k| BigRational::new(k.into(), 3.into()))
            .collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn base_three_from_exponent_one() {
        let base = BaseSpec::integer(3).unwrap();
        let pts = orbit_mod1(&d(1, 1), &base, 1, 2, 64).unwrap();
        assert_eq!(pts[0].to_dyadic(), d(1, 1));
        assert_eq!(pts[1].to_dyadic(), d(1, 1));
    }

    #[test]
    fn rational_base_matches_direct_evaluation() {
        let base = BaseSpec::rational(3, 2).unwrap();
        let beta = d(5, 3);
        let pts = orbit_mod1(&beta, &base, 2, 5, 80).unwrap();
        for (x, p) in pts.iter().enumerate() {
            let k = 2 + x as i32;
            let exact = (beta.to_rational()
                * BigRational::new(BigInt::from(3).pow(k as u32), BigInt::from(2).pow(k as u32)))
            .fract();
            let diff = (p.to_dyadic().to_rational() - exact).abs();
            assert!(diff <= p.error_radius().to_rational());
        }
    }

    #[test]
    fn real_base_radius_is_monotone_and_honest() {
        // λ ≈ 1.5 known to 2^-100.
        let approx = d(3, 1);
        let base = BaseSpec::real(approx, 100).unwrap();
        let beta = d(7, 5);
        let pts = orbit_mod1(&beta, &base, 0, 40, 160).unwrap();
        for w in pts.windows(2) {
            assert!(w[1].error_radius() >= w[0].error_radius());
        }
        let exact = orbit_mod1(&beta, &BaseSpec::rational(3, 2).unwrap(), 0, 40, 160).unwrap();
        for (a, b) in pts.iter().zip(&exact) {
            let diff = (a.to_dyadic() - b.to_dyadic()).to_rational().abs();
            let slack = a.error_radius().to_rational() + b.error_radius().to_rational();
            assert!(diff <= slack);
        }
    }

    #[test]
    fn real_base_runs_out_of_precision() {
        let base = BaseSpec::real(d(3, 1), 20).unwrap();
        let err = orbit_mod1(&d(7, 5), &base, 0, 200, 64).unwrap_err();
        assert!(matches!(err, LevinError::PrecisionExhausted(_)));
    }

    #[test]
    fn bases_must_exceed_one() {
        assert!(BaseSpec::integer(1).is_err());
        assert!(BaseSpec::rational(1, 2).is_err());
        assert!(BaseSpec::real(Dyadic::from_integer(1), 10).is_err());
        assert_eq!(BaseSpec::rational(6, 3).unwrap(), BaseSpec::integer(2).unwrap());
        assert_eq!(BaseSpec::integer(8).unwrap().power_of_two_exponent(), Some(3));
        assert_eq!(BaseSpec::integer(6).unwrap().power_of_two_exponent(), None);
    }

    #[test]
    fn unit_exp_quarter_turns() {
        assert_eq!(unit_exp(&UnitFixed::from_dyadic(&Dyadic::zero())), (1.0, 0.0));
        let (c, s) = unit_exp(&UnitFixed::from_dyadic(&d(1, 1)));
        assert_eq!((c, s), (-1.0, 0.0));
        let (c, s) = unit_exp(&UnitFixed::from_dyadic(&d(1, 2)));
        assert_eq!((c, s), (0.0, 1.0));
        let (c, s) = unit_exp(&UnitFixed::from_dyadic(&d(3, 2)));
        assert_eq!((c, s), (0.0, -1.0));
    }

    #[test]
    fn unit_exp_matches_std() {
        for k in 0..1000u64 {
            let theta = d(k as i64 * 37 % 1024, 10);
            let (c, s) = unit_exp(&UnitFixed::from_dyadic(&theta));
            let angle = 2.0 * std::f64::consts::PI * theta.to_f64();
            assert!((c - angle.cos()).abs() < 1e-14);
            assert!((s - angle.sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn to_f64_handles_large_scales() {
        let x = Dyadic::new(BigInt::one() << 3000u32, 3001);
        assert_eq!(x.to_f64(), 0.5);
        assert_eq!(d(3, 2).to_f64(), 0.75);
    }

    #[test]
    fn serde_uses_decimal_strings() {
        let x = Dyadic::new(BigInt::from(-123456789012345678901234567890i128), 7);
        let json = serde_json::to_string(&x).unwrap();
        assert!(json.contains("\"numerator\":\"-"));
        let back: Dyadic = serde_json::from_str(&json).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn parse_round_trips_display() {
        for x in [Dyadic::new(-7, 3), Dyadic::from_integer(12), Dyadic::zero(), Dyadic::new(1, 200)] {
            assert_eq!(x.to_string().parse::<Dyadic>().unwrap(), x);
        }
        assert_eq!("6/2^2".parse::<Dyadic>().unwrap(), Dyadic::new(3, 1));
        assert!("1/3".parse::<Dyadic>().is_err());
        assert!("x".parse::<Dyadic>().is_err());
    }

    #[test]
    fn sqrt_floor_of_two() {
        let r = Dyadic::sqrt_floor(2, 60);
        let sq = &r * &r;
        assert!(sq <= Dyadic::from_integer(2));
        let next = &r + &Dyadic::pow2(-60);
        assert!(&next * &next > Dyadic::from_integer(2));
        assert_eq!(Dyadic::sqrt_floor(9, 10), Dyadic::from_integer(3));
    }
}
