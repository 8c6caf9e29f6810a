//! Discrepancy of finite orbits and the bounds it is compared against.
//!
//! One-dimensional star discrepancy is computed exactly over rationals from
//! the sorted points. The two-dimensional version is brute force over the
//! coordinate grid and exists only to check the Koksma-type inequality at
//! small sizes.

use std::fmt::Write as _;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::arithmetic::{orbit_mod1, orbit_mod1_rational, BaseSpec, Dyadic, UnitFixed};
use crate::construction::{tail_bound, ConstructionState};
use crate::error::{LevinError, Result};
use crate::expsums::{disc_sum_d, OrbitFamily};
use crate::schedule::Schedule;

/// Default cap on the number of points accepted by [`discrepancy_2d`].
pub const PAIR_BUDGET: usize = 4096;

/// Bits by which orbit error radii must undercut one for a report row.
pub const REPORT_GUARD_BITS: u64 = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitPoints {
    pub points: Vec<UnitFixed>,
    pub source: String,
    pub max_error_radius: Dyadic,
}

impl OrbitPoints {
    pub fn new(points: Vec<UnitFixed>, source: impl Into<String>) -> Self {
        let max_error_radius = points
            .iter()
            .map(|p| p.error_radius().clone())
            .max()
            .unwrap_or_else(Dyadic::zero);
        OrbitPoints {
            points,
            source: source.into(),
            max_error_radius,
        }
    }

    /// `{ξ λ^{start+x}}` for `x < count`, for every `ξ ∈ [lo, lo + width)`.
    ///
    /// Centers are the orbit of `lo`; radii add `width · λ^{start+x}` to
    /// whatever rounding the orbit itself carries.
    pub fn from_interval(
        lo: &Dyadic,
        width: &Dyadic,
        base: &BaseSpec,
        start: u64,
        count: usize,
        precision_bits: Option<u64>,
    ) -> Result<Self> {
        let prec = precision_bits.unwrap_or(lo.scale() + 64);
        let centers = orbit_mod1(lo, base, start, count, prec)?;
        let points = centers
            .into_iter()
            .enumerate()
            .map(|(x, p)| {
                let spread = spread_upper(width, base, start + x as u64);
                let radius = p.error_radius() + &spread;
                UnitFixed::with_radius(p.numerator().clone(), p.bits(), radius)
            })
            .collect();
        Ok(Self::new(points, format!("orbit of {lo} under {base}")))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn rationals(&self) -> Vec<BigRational> {
        self.points.iter().map(|p| p.to_dyadic().to_rational()).collect()
    }
}

/// A dyadic upper bound on `width · λ^k`.
fn spread_upper(width: &Dyadic, base: &BaseSpec, k: u64) -> Dyadic {
    if let Some(l) = base.as_integer() {
        return width * &Dyadic::from_integer(BigInt::from(l.pow(k as u32)));
    }
    let (_, hi) = base.bounds();
    let log2_hi = hi.to_f64().unwrap_or(f64::INFINITY).log2();
    let e = (k as f64 * log2_hi * (1.0 + 1e-12)).ceil() as i64 + 1;
    width.mul_pow2(e)
}

/// `max_i max((i+1)/P − x_(i), x_(i) − i/P)` over sorted points.
pub fn star_discrepancy_exact(points: &[BigRational]) -> BigRational {
    assert!(!points.is_empty(), "star discrepancy needs at least one point");
    let mut xs = points.to_vec();
    xs.sort();
    let p = BigInt::from(xs.len());
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            let above = BigRational::new(BigInt::from(i + 1), p.clone()) - x;
            let below = x - BigRational::new(BigInt::from(i), p.clone());
            above.max(below)
        })
        .max()
        .expect("nonempty")
}

pub fn star_discrepancy_f64(points: &[f64]) -> f64 {
    assert!(!points.is_empty(), "star discrepancy needs at least one point");
    let mut xs = points.to_vec();
    xs.sort_by(f64::total_cmp);
    let p = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| ((i + 1) as f64 / p - x).max(x - i as f64 / p))
        .fold(0.0, f64::max)
}

/// Star discrepancy of the point centers; the discrepancy of the true
/// points differs by at most `max_error_radius`.
pub fn star_discrepancy(pts: &OrbitPoints) -> f64 {
    star_discrepancy_exact(&pts.rationals()).to_f64().unwrap_or(f64::NAN)
}

/// `#{x : Q ≤ x < Q+P, {ξ λ^x} < γ}`.
pub fn counting_n(xi: &BigRational, base: &BaseSpec, gamma: &BigRational, q: u64, p: usize) -> Result<u64> {
    check_gamma(gamma)?;
    if gamma.is_one() {
        return Ok(p as u64);
    }
    if !matches!(base, BaseSpec::Real { .. }) {
        let orbit = orbit_mod1_rational(xi, base, q, p)?;
        return Ok(orbit.iter().filter(|v| *v < gamma).count() as u64);
    }
    let den = xi.denom();
    let Some(scale) = pow2_exponent(den) else {
        return Err(LevinError::Precondition(
            "real bases need a dyadic starting point".into(),
        ));
    };
    let start = Dyadic::new(xi.numer().clone(), scale);
    let pts = OrbitPoints::from_interval(&start, &Dyadic::zero(), base, q, p, None)?;
    count_certified(&pts, gamma)
}

fn pow2_exponent(n: &BigInt) -> Option<u64> {
    let tz = n.trailing_zeros()?;
    (n >> tz).is_one().then_some(tz)
}

fn check_gamma(gamma: &BigRational) -> Result<()> {
    if !gamma.is_positive() || gamma > &BigRational::one() {
        return Err(LevinError::Precondition(format!("γ = {gamma} is outside (0, 1]")));
    }
    Ok(())
}

/// Count points below `γ`, refusing when any point's enclosure reaches `γ`
/// or could wrap past one.
pub fn count_certified(pts: &OrbitPoints, gamma: &BigRational) -> Result<u64> {
    check_gamma(gamma)?;
    if gamma.is_one() {
        return Ok(pts.len() as u64);
    }
    let one = BigRational::one();
    let mut n = 0;
    for (i, p) in pts.points.iter().enumerate() {
        let x = p.to_dyadic().to_rational();
        let rad = p.error_radius().to_rational();
        let ambiguous = (&x - gamma).abs() <= rad || (!rad.is_zero() && &x + &rad >= one);
        if ambiguous {
            return Err(LevinError::PrecisionExhausted(format!(
                "point {i} lies within its error radius of γ = {gamma}"
            )));
        }
        if &x < gamma {
            n += 1;
        }
    }
    Ok(n)
}

/// Points in the unit square as 128-bit fractions of one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairPoints {
    pub points: Vec<(u128, u128)>,
}

impl PairPoints {
    pub fn new(points: Vec<(u128, u128)>) -> Self {
        PairPoints { points }
    }

    pub fn from_f64(points: &[(f64, f64)]) -> Self {
        let conv = |v: f64| {
            assert!((0.0..1.0).contains(&v), "coordinate {v} outside [0, 1)");
            UnitFixed::from_f64(v).top_u128()
        };
        PairPoints::new(points.iter().map(|&(u, v)| (conv(u), conv(v))).collect())
    }

    /// `({x/τ}, {β λ^{n_{r,j}+x}})` for the block of a step.
    pub fn from_block(orbit: &[u128]) -> Self {
        let tau = orbit.len() as u128;
        let points = orbit
            .iter()
            .enumerate()
            .map(|(x, &v)| (turn(x as u128, tau), v))
            .collect();
        PairPoints { points }
    }
}

fn turn(k: u128, n: u128) -> u128 {
    let hi = (k << 64) / n;
    let lo = (((k << 64) % n) << 64) / n;
    (hi << 64) | lo
}

fn unit(v: u128) -> f64 {
    crate::arithmetic::u128_to_unit_f64(v)
}

/// `sup_{γ₁,γ₂} |#{u < γ₁, v < γ₂}/P − γ₁γ₂|`, brute force on the grid of
/// point coordinates with both one-sided limits at each.
pub fn discrepancy_2d(pts: &PairPoints) -> Result<f64> {
    discrepancy_2d_with_budget(pts, PAIR_BUDGET)
}

pub fn discrepancy_2d_with_budget(pts: &PairPoints, budget: usize) -> Result<f64> {
    let p = pts.points.len();
    if p == 0 {
        return Err(LevinError::Precondition("no points".into()));
    }
    if p > budget {
        return Err(LevinError::BudgetExceeded {
            what: "two-dimensional discrepancy points",
            needed: p as u128,
            budget: budget as u128,
        });
    }
    let mut vs: Vec<u128> = pts.points.iter().map(|&(_, v)| v).collect();
    vs.sort_unstable();
    vs.dedup();
    let rank = |v: u128| vs.binary_search(&v).expect("present");

    let mut by_u = pts.points.clone();
    by_u.sort_unstable();

    // γ₂ candidates: every distinct v, then 1
    let g2: Vec<f64> = vs.iter().map(|&v| unit(v)).chain([1.0]).collect();
    let pf = p as f64;
    let mut freq = vec![0u32; vs.len()];
    let mut best = 0.0f64;

    // Evaluate with `freq` describing the points with u < γ₁.
    let mut sweep = |freq: &[u32], g1: f64, closed_extra: &[usize]| {
        // open counts #{v < γ₂}, closed counts #{v ≤ γ₂} for γ₂ = vs[k]
        let mut extra = vec![0u32; freq.len()];
        for &k in closed_extra {
            extra[k] += 1;
        }
        let mut below = 0u32;
        let mut below_closed = 0u32;
        for (k, &g) in g2.iter().enumerate() {
            if k < freq.len() {
                let open = below;
                below += freq[k];
                below_closed += freq[k] + extra[k];
                best = best.max(g1 * g - open as f64 / pf);
                best = best.max(below_closed as f64 / pf - g1 * g);
            } else {
                best = best.max(g1 - below as f64 / pf);
                best = best.max(below_closed as f64 / pf - g1);
            }
        }
    };

    let mut i = 0;
    while i < p {
        let u = by_u[i].0;
        let mut group = Vec::new();
        while i < p && by_u[i].0 == u {
            group.push(rank(by_u[i].1));
            i += 1;
        }
        // γ₁ = u: the open box excludes this group, the closed limit includes it
        sweep(&freq, unit(u), &group);
        for k in group {
            freq[k] += 1;
        }
    }
    sweep(&freq, 1.0, &[]);
    Ok(best)
}

/// `30² (1/n + (1/P) Σ' |S(m)| / (m̄₁ m̄₂))` over `0 < max|mᵢ| ≤ n`.
pub fn etk_bound(p: u64, n: u64, sums: impl IntoIterator<Item = ((i64, i64), f64)>) -> f64 {
    assert!(n >= 1 && p >= 1);
    let weighted: f64 = sums
        .into_iter()
        .filter(|&((a, b), _)| (a, b) != (0, 0) && a.unsigned_abs() <= n && b.unsigned_abs() <= n)
        .map(|((a, b), s)| s / (a.unsigned_abs().max(1) * b.unsigned_abs().max(1)) as f64)
        .sum();
    etk_bound_from_sum(p, n, weighted)
}

/// As [`etk_bound`] with the weighted sum already formed.
pub fn etk_bound_from_sum(p: u64, n: u64, weighted: f64) -> f64 {
    900.0 * (1.0 / n as f64 + weighted / p as f64)
}

/// `30²·15·(λ/(λ−1))^{3/2} √τ (3 + ln τ)² ω`.
pub fn proof_chain_bound(lambda_ratio: f64, tau: u64, omega: u64) -> f64 {
    let t = tau as f64;
    900.0 * 15.0 * lambda_ratio.powf(1.5) * t.sqrt() * (3.0 + t.ln()).powi(2) * omega as f64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaCheck {
    pub gamma: String,
    pub count: u64,
    pub deviation: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `|N(n_{r,j}, τ) − γτ|` against the proof-chain bound for each `γ`, using
/// the state's `α_r` with its certified tail.
pub fn proof_chain_check(
    state: &ConstructionState,
    r: u64,
    j: u64,
    gammas: &[BigRational],
) -> Result<Vec<GammaCheck>> {
    let sched = &state.schedule;
    if r >= state.r {
        return Err(LevinError::Precondition(format!(
            "step {r} is not completed (state is at r = {})",
            state.r
        )));
    }
    let ell = sched.ell(j)?;
    if r < ell {
        return Err(LevinError::Precondition(format!("r = {r} is below ℓ_{j} = {ell}")));
    }
    let tau = sched.tau(r, j)?;
    let bound = proof_chain_bound(sched.lambda_ratio(j)?, tau, sched.omega(r)?);
    let pts = OrbitPoints::from_interval(
        &state.alpha_r,
        &state.tail_bound()?,
        &sched.lambda(j)?,
        sched.n_rj(r, j)?,
        tau as usize,
        None,
    )?;
    gammas
        .iter()
        .map(|g| {
            let count = count_certified(&pts, g)?;
            let expected = g * BigRational::from_integer(BigInt::from(tau));
            let deviation = (BigRational::from_integer(BigInt::from(count)) - expected)
                .abs()
                .to_f64()
                .unwrap_or(f64::INFINITY);
            Ok(GammaCheck {
                gamma: g.to_string(),
                count,
                deviation,
                bound,
                pass: deviation <= bound,
            })
        })
        .collect()
}

/// Koksma-type check for one block: the measured two-dimensional discrepancy
/// of `({x/τ}, {α_{r+1} λ^{n_{r,j}+x}})` against the bound built from the
/// same block's exponential sums with `n = A_{r,j}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockEtk {
    pub r: u64,
    pub j: u64,
    pub tau: usize,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

pub fn block_etk_check(schedule: &Schedule, r: u64, j: u64, alpha_r: &Dyadic, a_r: &BigUint) -> Result<BlockEtk> {
    let family = OrbitFamily::new(schedule, r, j, alpha_r)?;
    if family.a_bound == 0 {
        return Err(LevinError::Precondition(format!("A_{{{r},{j}}} = 0")));
    }
    let ctx = family.context(a_r)?;
    let measured = discrepancy_2d(&PairPoints::from_block(ctx.orbit()))?;
    let bound = etk_bound_from_sum(family.tau as u64, family.a_bound, disc_sum_d(&ctx));
    Ok(BlockEtk {
        r,
        j,
        tau: family.tau,
        measured,
        bound,
        pass: measured <= bound,
    })
}

/// `2^{2j+1}/P · log_j 2 + 3·10⁶ (5 + ln P)³ / √P`, with `j` the integer base.
pub fn corollary_bound(p: u64, j: u64) -> f64 {
    assert!(j >= 2 && p >= 1);
    let pf = p as f64;
    let first = 2f64.powi(2 * j as i32 + 1) / pf * (2f64.ln() / (j as f64).ln());
    first + 3e6 * (5.0 + pf.ln()).powi(3) / pf.sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub source: String,
    pub base: u32,
    #[serde(rename = "P")]
    pub p: usize,
    pub d_measured: f64,
    /// Exact discrepancy of the point centers, as `num/den`.
    pub d_measured_exact: String,
    /// Largest point error radius: the true value lies within this of
    /// `d_measured`.
    pub error_radius: f64,
    pub d_corollary_bound: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscrepancyReport {
    pub alpha: String,
    pub certified_bits: i64,
    pub rows: Vec<ReportRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl DiscrepancyReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("source,base,P,D_measured,D_corollary_bound,ratio\n");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.12e},{:.6e},{:.6e}",
                row.source, row.base, row.p, row.d_measured, row.d_corollary_bound, row.ratio
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}

/// Smallest `r_max` whose final tail makes `{α b^x}` certified to
/// `REPORT_GUARD_BITS` for every `x < p_max`.
pub fn required_r_max(schedule: &Schedule, base: u32, p_max: usize) -> Result<u64> {
    let need = ((p_max.saturating_sub(1)) as f64 * (base as f64).log2()).ceil() as u64
        + REPORT_GUARD_BITS
        + 1;
    let mut r = schedule.ell(1)?;
    // the tail after finishing step R is 2^{1 − n_{R+1}}
    while schedule.n_of(r + 1)? < need {
        r += 1;
    }
    Ok(r)
}

fn ladder_rows(
    pts: &OrbitPoints,
    source: &str,
    base: u32,
    ladder: &[usize],
) -> Vec<ReportRow> {
    ladder
        .iter()
        .map(|&p| {
            let sub = OrbitPoints::new(pts.points[..p].to_vec(), pts.source.clone());
            let exact = star_discrepancy_exact(&sub.rationals());
            let d = exact.to_f64().unwrap_or(f64::NAN);
            let bound = corollary_bound(p as u64, base as u64);
            ReportRow {
                source: source.to_string(),
                base,
                p,
                d_measured: d,
                d_measured_exact: exact.to_string(),
                error_radius: sub.max_error_radius.to_f64(),
                d_corollary_bound: bound,
                ratio: d / bound,
            }
        })
        .collect()
}

/// Star discrepancy of `{α b^x}_{x<P}` for each base and ladder entry.
pub fn report(
    state: &ConstructionState,
    bases: &[u32],
    ladder: &[usize],
    with_baseline: bool,
) -> Result<DiscrepancyReport> {
    if ladder.is_empty() || ladder.contains(&0) {
        return Err(LevinError::Precondition("ladder entries must be positive".into()));
    }
    let p_max = *ladder.iter().max().expect("nonempty");
    let tail = tail_bound(state.r, &state.schedule)?;
    let limit = Dyadic::pow2(-(REPORT_GUARD_BITS as i64));
    let mut rows = Vec::new();
    for &b in bases {
        if b < 2 {
            return Err(LevinError::Precondition(format!("base {b} is below 2")));
        }
        let base = BaseSpec::integer(b as u64)?;
        let pts = OrbitPoints::from_interval(&state.alpha_r, &tail, &base, 0, p_max, None)?;
        if pts.max_error_radius > limit {
            let need = required_r_max(&state.schedule, b, p_max)?;
            return Err(LevinError::PrecisionExhausted(format!(
                "base {b} with P = {p_max} needs the construction run to r_max = {need} \
                 (currently completed through r = {})",
                state.r.saturating_sub(1)
            )));
        }
        rows.extend(ladder_rows(&pts, "levin", b, ladder));
        if with_baseline {
            let champ = crate::baseline::champernowne_orbit(b, p_max);
            rows.extend(ladder_rows(&champ, "champernowne", b, ladder));
        }
    }
    Ok(DiscrepancyReport {
        alpha: state.alpha_r.to_string(),
        certified_bits: state.schedule.n_of(state.r)? as i64 - 1,
        rows,
        notes: state.notes.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn star_fixed_cases() {
        assert_eq!(star_discrepancy_exact(&[q(1, 2)]), q(1, 2));
        let grid: Vec<_> = (0..8).map(|k| q(k, 8)).collect();
        assert_eq!(star_discrepancy_exact(&grid), q(1, 8));
        assert_eq!(star_discrepancy_exact(&[q(0, 1), q(0, 1)]), q(1, 1));
        assert_eq!(star_discrepancy_f64(&[0.5]), 0.5);
    }

    #[test]
    fn counting_examples() {
        let two = BaseSpec::integer(2).unwrap();
        assert_eq!(counting_n(&q(1, 3), &two, &q(1, 2), 0, 4).unwrap(), 2);
        assert_eq!(counting_n(&q(0, 1), &two, &q(1, 100), 0, 9).unwrap(), 9);
        assert_eq!(counting_n(&q(5, 7), &two, &q(1, 1), 3, 11).unwrap(), 11);
        assert!(counting_n(&q(1, 3), &two, &q(0, 1), 0, 4).is_err());
    }

    #[test]
    fn counting_real_base_ties_are_refused() {
        let base = BaseSpec::real(Dyadic::new(3, 0), 40).unwrap();
        // ξ = 1/2 under (3 ± 2^-40): the first point is exactly 1/2
        assert!(counting_n(&q(1, 2), &base, &q(1, 2), 0, 1).is_err());
        assert_eq!(counting_n(&q(1, 2), &base, &q(3, 4), 0, 1).unwrap(), 1);
    }

    #[test]
    fn pair_examples() {
        let one = PairPoints::from_f64(&[(0.5, 0.5)]);
        assert!((discrepancy_2d(&one).unwrap() - 0.75).abs() < 1e-15);
        let origin = PairPoints::from_f64(&[(0.0, 0.0)]);
        assert_eq!(discrepancy_2d(&origin).unwrap(), 1.0);
    }

    #[test]
    fn pair_budget() {
        let pts = PairPoints::new(vec![(0, 0); 10]);
        assert!(matches!(
            discrepancy_2d_with_budget(&pts, 5),
            Err(LevinError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn etk_trivia() {
        let zero = etk_bound(100, 4, Vec::new());
        assert_eq!(zero, 900.0 / 4.0);
        assert_eq!(etk_bound(100, 8, Vec::new()), zero / 2.0);
        // (0,0) and out-of-range frequencies are ignored
        let v = etk_bound(10, 1, vec![((0, 0), 5.0), ((2, 0), 5.0), ((1, -1), 2.0)]);
        assert!((v - 900.0 * (1.0 + 0.2)).abs() < 1e-9);
    }

    #[test]
    fn corollary_formula() {
        let p = 1024u64;
        let expected = 32.0 / 1024.0 + 3e6 * (5.0 + 1024f64.ln()).powi(3) / 32.0;
        assert!((corollary_bound(p, 2) - expected).abs() < 1e-6 * expected);
        assert!(corollary_bound(p, 2) > 1.0);
        // decreasing once the second term dominates
        let mut prev = corollary_bound(1 << 20, 3);
        for k in 21..40 {
            let cur = corollary_bound(1 << k, 3);
            assert!(cur < prev);
            prev = cur;
        }
    }

    #[test]
    fn proof_chain_bound_scales_with_omega() {
        let a = proof_chain_bound(2.0, 64, 1);
        let b = proof_chain_bound(2.0, 64, 2);
        assert!((b - 2.0 * a).abs() < 1e-6 * a);
    }

    #[test]
    fn interval_radius_grows_with_base() {
        let pts = OrbitPoints::from_interval(
            &Dyadic::new(1, 3),
            &Dyadic::pow2(-40),
            &BaseSpec::integer(2).unwrap(),
            0,
            10,
            None,
        )
        .unwrap();
        assert_eq!(pts.max_error_radius, Dyadic::pow2(-31));
        assert_eq!(pts.points[0].error_radius(), &Dyadic::pow2(-40));
    }

    #[test]
    fn required_r_for_quadratic() {
        let s = Schedule::quadratic();
        // need n_{R+1} ≥ 1023 + 33 = 1056 → R + 1 = 33
        assert_eq!(required_r_max(&s, 2, 1024).unwrap(), 32);
    }
}
