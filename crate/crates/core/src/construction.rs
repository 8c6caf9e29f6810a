//! The step loop: pick the least qualifying candidate `a_r`, advance
//! `α_{r+1} = α_r + a_r / (2^{n_r} q_r)` exactly, repeat.
//!
//! Candidates are judged by [`disc_sum_d_with`] against the threshold of the
//! chosen [`BoundMode`], with `j` ascending and rejection on the first
//! failing `j`. The search is deterministic: parallel evaluation only changes
//! who computes a candidate, never which candidates are counted.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use num_bigint::{BigInt, BigUint};
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arithmetic::Dyadic;
use crate::error::{LevinError, Result};
use crate::expsums::{bounds_for, disc_sum_d_with, BoundMode, OrbitFamily};
use crate::schedule::{Denominator, Schedule};

pub const DEFAULT_CANDIDATE_CAP: u128 = 1 << 20;
pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Relative margin kept below the threshold when accepting a candidate, so
/// floating-point roundoff in `D` cannot flip a recorded verdict.
pub const ACCEPT_MARGIN: f64 = 1e-6;

/// Candidates per parallel chunk. Fixed, so chunking never depends on the
/// thread count.
const CHUNK: u128 = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct SearchPolicy {
    /// 1 means sequential; more means chunked evaluation on that many threads.
    pub threads: usize,
    pub candidate_cap: u128,
    pub bound_mode: BoundMode,
    /// Stop summing `D` once it reaches the threshold.
    pub early_abort: bool,
    /// Fill `wall_ms` in step records.
    pub timing: bool,
    /// Working precision for non-integer bases; `None` picks a default.
    pub precision_bits: Option<u64>,
}

impl Default for SearchPolicy {
    fn default() -> Self {
        SearchPolicy {
            threads: 1,
            candidate_cap: DEFAULT_CANDIDATE_CAP,
            bound_mode: BoundMode::Lemma2,
            early_abort: true,
            timing: false,
            precision_bits: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounters {
    /// `S(m₁, m₂)` values entering some `D` (conjugates included).
    pub s_evals: u64,
    /// Exponential terms behind those values: `s_evals · τ`.
    pub s_terms: u64,
    pub d_evals: u64,
    pub candidates: u64,
}

impl OpCounters {
    fn absorb(&mut self, other: &OpCounters) {
        self.s_evals += other.s_evals;
        self.s_terms += other.s_terms;
        self.d_evals += other.d_evals;
        self.candidates += other.candidates;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub r: u64,
    #[serde(with = "decimal")]
    pub a_r: BigUint,
    pub n_r: u64,
    pub log2_q_r: u64,
    /// `D_{r,j}(a_r)` for `j = 1..=ω(r)`.
    pub d_values: Vec<f64>,
    /// Thresholds the values were accepted against.
    pub bounds: Vec<f64>,
    pub candidates_tried: u64,
    pub s_eval_count: u64,
    pub s_term_count: u64,
    /// Number of `D` evaluations at each `j` during the search.
    pub d_eval_counts: Vec<u64>,
    /// `ω(r)`, the largest `j` examined.
    pub max_j: u64,
    #[serde(skip)]
    pub wall_ms: Option<u64>,
}

mod decimal {
    use num_bigint::BigUint;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let text = String::deserialize(d)?;
        BigUint::parse_bytes(text.as_bytes(), 10)
            .ok_or_else(|| D::Error::custom(format!("not a decimal integer: {text:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstructionState {
    pub schedule: Schedule,
    /// The next step to perform.
    pub r: u64,
    pub alpha_r: Dyadic,
    pub history: Vec<StepRecord>,
    pub op_counters: OpCounters,
    pub bound_mode: BoundMode,
    /// Free-form annotations carried into checkpoints and reports.
    pub notes: Vec<String>,
}

/// Verdict on a single candidate.
#[derive(Clone, Debug)]
struct Trial {
    pass: bool,
    d_values: Vec<f64>,
    per_j: Vec<u64>,
    counters: OpCounters,
}

/// The per-`j` data a search needs, built once per step.
struct StepContext {
    families: Vec<OrbitFamily>,
    thresholds: Vec<f64>,
    raw_bounds: Vec<f64>,
}

impl StepContext {
    fn new(state: &ConstructionState, policy: &SearchPolicy) -> Result<Self> {
        let r = state.r;
        let omega = state.schedule.omega(r)?;
        let mut families = Vec::with_capacity(omega as usize);
        let mut thresholds = Vec::with_capacity(omega as usize);
        let mut raw_bounds = Vec::with_capacity(omega as usize);
        for j in 1..=omega {
            families.push(OrbitFamily::with_precision(
                &state.schedule,
                r,
                j,
                &state.alpha_r,
                policy.precision_bits,
            )?);
            let bound = bounds_for(r, j, &state.schedule)?.threshold(policy.bound_mode);
            raw_bounds.push(bound);
            thresholds.push(bound * (1.0 - ACCEPT_MARGIN));
        }
        Ok(StepContext {
            families,
            thresholds,
            raw_bounds,
        })
    }

    fn trial(&self, c: u128, early_abort: bool) -> Result<Trial> {
        let c = BigUint::from(c);
        let mut out = Trial {
            pass: true,
            d_values: Vec::with_capacity(self.families.len()),
            per_j: vec![0; self.families.len()],
            counters: OpCounters {
                candidates: 1,
                ..OpCounters::default()
            },
        };
        for (idx, (family, &limit)) in self.families.iter().zip(&self.thresholds).enumerate() {
            let ctx = family.context(&c)?;
            let d = disc_sum_d_with(&ctx, early_abort.then_some(limit));
            out.per_j[idx] += 1;
            out.counters.d_evals += 1;
            out.counters.s_evals += d.s_evals;
            out.counters.s_terms += d.s_terms;
            out.d_values.push(d.value);
            if d.value >= limit {
                out.pass = false;
                break;
            }
        }
        Ok(out)
    }
}

impl ConstructionState {
    /// A fresh state at `r = ℓ₁` with `α = a`.
    pub fn new(schedule: Schedule) -> Result<Self> {
        let r = schedule.ell(1)?;
        let alpha = schedule.start_value.clone();
        if alpha.is_negative() {
            return Err(LevinError::Precondition("start value must be nonnegative".into()));
        }
        Ok(ConstructionState {
            schedule,
            r,
            alpha_r: alpha,
            history: Vec::new(),
            op_counters: OpCounters::default(),
            bound_mode: BoundMode::Lemma2,
            notes: Vec::new(),
        })
    }

    /// `α_r` recomputed from the start value and the recorded `a_m`.
    pub fn reconstruct_alpha(&self) -> Result<Dyadic> {
        let mut alpha = self.schedule.start_value.clone();
        for rec in &self.history {
            alpha = &alpha + &step_term(&self.schedule, rec.r, &rec.a_r)?;
        }
        Ok(alpha)
    }

    pub fn tail_bound(&self) -> Result<Dyadic> {
        tail_bound(self.r, &self.schedule)
    }

    pub fn certified_digits(&self, out_base: u32) -> Result<CertifiedDigits> {
        certified_digits(&self.alpha_r, &self.tail_bound()?, out_base)
    }
}

/// `a_r / (2^{n_r} q_r)`, which must be dyadic.
fn step_term(schedule: &Schedule, r: u64, a_r: &BigUint) -> Result<Dyadic> {
    let n_r = schedule.n_of(r)?;
    let q = schedule.q_of(r)?;
    let Denominator::Pow2(e) = q else {
        return Err(LevinError::InvalidSchedule(format!("q_{r} = {q} is not a power of two")));
    };
    if a_r >= &q.value() {
        return Err(LevinError::Precondition(format!("a_{r} = {a_r} is not below q_{r}")));
    }
    Ok(Dyadic::new(BigInt::from(a_r.clone()), n_r + e))
}

/// Least qualifying candidate at the state's current step.
pub fn search_a_r(state: &ConstructionState, policy: &SearchPolicy) -> Result<StepRecord> {
    let r = state.r;
    let ell1 = state.schedule.ell(1)?;
    if r < ell1 {
        return Err(LevinError::Precondition(format!("r = {r} is below ℓ₁ = {ell1}")));
    }
    let started = Instant::now();
    let n_r = state.schedule.n_of(r)?;
    let q = state.schedule.q_of(r)?;
    let log2_q_r = q.log2_exact().ok_or_else(|| {
        LevinError::InvalidSchedule(format!("q_{r} = {q} is not a power of two"))
    })?;
    let limit = q.min_u128(policy.candidate_cap);
    let ctx = StepContext::new(state, policy)?;

    let mut counters = OpCounters::default();
    let mut per_j = vec![0u64; ctx.families.len()];
    let mut accept = |c: u128, trial: &Trial| {
        counters.absorb(&trial.counters);
        for (a, b) in per_j.iter_mut().zip(&trial.per_j) {
            *a += b;
        }
        trial.pass.then(|| (c, trial.d_values.clone()))
    };

    let mut found = None;
    if policy.threads <= 1 {
        for c in 0..limit {
            let trial = ctx.trial(c, policy.early_abort)?;
            if let Some(hit) = accept(c, &trial) {
                found = Some(hit);
                break;
            }
        }
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(policy.threads)
            .build()
            .map_err(|e| LevinError::Precondition(format!("thread pool: {e}")))?;
        let mut start = 0u128;
        'chunks: while start < limit {
            let end = (start + CHUNK).min(limit);
            let trials: Vec<Result<Trial>> = pool.install(|| {
                (start..end)
                    .into_par_iter()
                    .map(|c| ctx.trial(c, policy.early_abort))
                    .collect()
            });
            for (c, trial) in (start..end).zip(trials) {
                if let Some(hit) = accept(c, &trial?) {
                    found = Some(hit);
                    break 'chunks;
                }
            }
            start = end;
        }
    }

    let Some((a_r, d_values)) = found else {
        return Err(LevinError::CapExhausted { r, cap: limit });
    };
    Ok(StepRecord {
        r,
        a_r: BigUint::from(a_r),
        n_r,
        log2_q_r,
        d_values,
        bounds: ctx.raw_bounds,
        candidates_tried: counters.candidates,
        s_eval_count: counters.s_evals,
        s_term_count: counters.s_terms,
        d_eval_counts: per_j,
        max_j: ctx.families.len() as u64,
        wall_ms: policy.timing.then(|| started.elapsed().as_millis() as u64),
    })
}

/// One search plus the exact update of `α`.
pub fn step(state: &mut ConstructionState, policy: &SearchPolicy) -> Result<()> {
    let record = search_a_r(state, policy)?;
    let term = step_term(&state.schedule, state.r, &record.a_r)?;
    state.alpha_r = &state.alpha_r + &term;
    state.op_counters.absorb(&OpCounters {
        s_evals: record.s_eval_count,
        s_terms: record.s_term_count,
        d_evals: record.d_eval_counts.iter().sum(),
        candidates: record.candidates_tried,
    });
    state.bound_mode = policy.bound_mode;
    state.history.push(record);
    state.r += 1;
    Ok(())
}

/// Steps `ℓ₁ ..= r_max` from the schedule's start value.
pub fn run(schedule: &Schedule, policy: &SearchPolicy, r_max: u64) -> Result<ConstructionState> {
    let mut state = ConstructionState::new(schedule.clone())?;
    if r_max < state.r {
        return Err(LevinError::Precondition(format!(
            "r_max = {r_max} is below ℓ₁ = {}",
            state.r
        )));
    }
    state.bound_mode = policy.bound_mode;
    resume(&mut state, policy, r_max)?;
    Ok(state)
}

/// Continue an existing state through step `r_max`.
pub fn resume(state: &mut ConstructionState, policy: &SearchPolicy, r_max: u64) -> Result<()> {
    if !state.history.is_empty() && state.bound_mode != policy.bound_mode {
        return Err(LevinError::Precondition(format!(
            "state was built with bound mode {:?}, policy asks for {:?}",
            state.bound_mode, policy.bound_mode
        )));
    }
    while state.r <= r_max {
        step(state, policy)?;
    }
    Ok(())
}

/// `2 · 2^{−n_r}`: the certified distance from `α_r` to the limit.
pub fn tail_bound(r: u64, schedule: &Schedule) -> Result<Dyadic> {
    let n_r = schedule.n_of(r)?;
    Ok(Dyadic::pow2(1 - n_r as i64))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CertifiedDigits {
    pub base: u32,
    /// Integer part shared by the whole interval (meaningful only when
    /// `integer_certified`).
    pub integer_part: BigInt,
    pub integer_certified: bool,
    /// Fractional digits, one character per digit (`0-9a-z`).
    pub digits: String,
}

impl CertifiedDigits {
    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }
}

/// The longest fractional digit prefix shared by every real in
/// `[lo, lo + width)`.
pub fn certified_digits(lo: &Dyadic, width: &Dyadic, base: u32) -> Result<CertifiedDigits> {
    if !(2..=36).contains(&base) {
        return Err(LevinError::Precondition(format!("digit base must be in 2..=36, got {base}")));
    }
    if width.is_negative() || width.is_zero() {
        return Err(LevinError::Precondition("interval width must be positive".into()));
    }
    let hi = lo + width;
    let s = lo.scale().max(hi.scale());
    let one = BigInt::from(1u8) << s;
    let int_part = lo.floor();
    let mut rem = lo.numerator_at(s) - (&int_part << s);
    // gap = (hi − current cell start) · base^k · 2^s; the prefix of length k
    // is certified while gap ≤ 2^s.
    let mut gap = hi.numerator_at(s) - (&int_part << s);
    let mut out = CertifiedDigits {
        base,
        integer_part: int_part,
        integer_certified: gap <= one,
        digits: String::new(),
    };
    if !out.integer_certified {
        return Ok(out);
    }
    let b = BigInt::from(base);
    loop {
        rem *= &b;
        gap *= &b;
        let d = &rem >> s;
        let shift = &d << s;
        rem -= &shift;
        gap -= &shift;
        if gap > one {
            return Ok(out);
        }
        let d = d.to_u32().expect("digit below base");
        out.digits.push(char::from_digit(d, base).expect("digit below base"));
    }
}

// ---------------------------------------------------------------------------
// checkpoints

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointDoc {
    format_version: u32,
    schedule: Schedule,
    r: u64,
    bound_mode: BoundMode,
    alpha_r: Dyadic,
    history: Vec<StepRecord>,
    op_counters: OpCounters,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    notes: Vec<String>,
}

impl ConstructionState {
    pub fn to_checkpoint_json(&self) -> String {
        let doc = CheckpointDoc {
            format_version: CHECKPOINT_FORMAT_VERSION,
            schedule: self.schedule.clone(),
            r: self.r,
            bound_mode: self.bound_mode,
            alpha_r: self.alpha_r.clone(),
            history: self.history.clone(),
            op_counters: self.op_counters,
            notes: self.notes.clone(),
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("checkpoint serializes");
        text.push('\n');
        text
    }

    /// Parse only: version and field syntax, no consistency checks.
    pub fn from_checkpoint_json_raw(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| LevinError::MalformedCheckpoint(e.to_string()))?;
        let version = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| LevinError::MalformedCheckpoint("missing format_version".into()))?;
        if version != CHECKPOINT_FORMAT_VERSION as u64 {
            return Err(LevinError::VersionMismatch {
                found: version as u32,
                expected: CHECKPOINT_FORMAT_VERSION,
            });
        }
        let doc: CheckpointDoc = serde_json::from_value(value)
            .map_err(|e| LevinError::MalformedCheckpoint(e.to_string()))?;
        Ok(ConstructionState {
            schedule: doc.schedule,
            r: doc.r,
            alpha_r: doc.alpha_r,
            history: doc.history,
            op_counters: doc.op_counters,
            bound_mode: doc.bound_mode,
            notes: doc.notes,
        })
    }

    /// Parse and check internal consistency, without recomputing any `D`.
    pub fn from_checkpoint_json_unaudited(text: &str) -> Result<Self> {
        let state = Self::from_checkpoint_json_raw(text)?;
        state.check_structure()?;
        Ok(state)
    }

    /// Parse, check consistency, and re-evaluate every recorded `D`.
    pub fn from_checkpoint_json(text: &str) -> Result<Self> {
        let state = Self::from_checkpoint_json_unaudited(text)?;
        let audit = audit_history(&state, None)?;
        if let Some(bad) = audit.iter().find(|a| !a.pass) {
            return Err(LevinError::MalformedCheckpoint(format!(
                "recorded step r = {} fails re-evaluation: {}",
                bad.r, bad.detail
            )));
        }
        Ok(state)
    }

    /// Bookkeeping consistency: step indices, schedule-derived fields,
    /// counter totals, `0 ≤ a_r < q_r`, and `α_r` against the history.
    pub fn check_structure(&self) -> Result<()> {
        let bad = |m: String| Err(LevinError::MalformedCheckpoint(m));
        let ell1 = self.schedule.ell(1)?;
        if self.r != ell1 + self.history.len() as u64 {
            return bad(format!(
                "r = {} does not follow ℓ₁ = {ell1} and {} recorded steps",
                self.r,
                self.history.len()
            ));
        }
        let mut totals = OpCounters::default();
        for (i, rec) in self.history.iter().enumerate() {
            let r = ell1 + i as u64;
            if rec.r != r {
                return bad(format!("history entry {i} has r = {}, expected {r}", rec.r));
            }
            if rec.n_r != self.schedule.n_of(r)? {
                return bad(format!("n_{r} disagrees with the schedule"));
            }
            if self.schedule.q_of(r)?.log2_exact() != Some(rec.log2_q_r) {
                return bad(format!("log₂ q_{r} disagrees with the schedule"));
            }
            let omega = self.schedule.omega(r)?;
            if rec.max_j != omega
                || rec.d_values.len() as u64 != omega
                || rec.bounds.len() as u64 != omega
                || rec.d_eval_counts.len() as u64 != omega
            {
                return bad(format!("step {r} does not record ω(r) = {omega} values"));
            }
            totals.absorb(&OpCounters {
                s_evals: rec.s_eval_count,
                s_terms: rec.s_term_count,
                d_evals: rec.d_eval_counts.iter().sum(),
                candidates: rec.candidates_tried,
            });
        }
        if totals != self.op_counters {
            return bad("op_counters disagree with the step records".into());
        }
        if self.reconstruct_alpha()? != self.alpha_r {
            return bad("α_r does not match the recorded a_r history".into());
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_checkpoint_json()).map_err(|e| LevinError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint_json(&read(path.as_ref())?)
    }

    pub fn load_unaudited(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint_json_unaudited(&read(path.as_ref())?)
    }

    /// Per-step CSV: `r,a_r,n_r,log2_q_r,candidates_tried,s_eval_count,max_j,wall_ms`.
    pub fn steps_csv(&self) -> String {
        let mut out =
            String::from("r,a_r,n_r,log2_q_r,candidates_tried,s_eval_count,max_j,wall_ms\n");
        for rec in &self.history {
            let wall = rec.wall_ms.map(|w| w.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                rec.r,
                rec.a_r,
                rec.n_r,
                rec.log2_q_r,
                rec.candidates_tried,
                rec.s_eval_count,
                rec.max_j,
                wall
            );
        }
        out
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| LevinError::io(path, e))
}

/// Outcome of re-checking one recorded step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepAudit {
    pub r: u64,
    pub pass: bool,
    pub detail: String,
}

/// Re-evaluate `D_{r,j}(a_r)` for every recorded step and compare against the
/// `ω`-weighted threshold. With `minimality_budget = Some(k)`, also confirm
/// that every `c < a_r` fails (skipped for steps with `a_r > k`).
pub fn audit_history(
    state: &ConstructionState,
    minimality_budget: Option<u128>,
) -> Result<Vec<StepAudit>> {
    let mut alpha = state.schedule.start_value.clone();
    let mut out = Vec::with_capacity(state.history.len());
    let policy = SearchPolicy {
        bound_mode: state.bound_mode,
        early_abort: true,
        ..SearchPolicy::default()
    };
    for rec in &state.history {
        let probe = ConstructionState {
            schedule: state.schedule.clone(),
            r: rec.r,
            alpha_r: alpha.clone(),
            history: Vec::new(),
            op_counters: OpCounters::default(),
            bound_mode: state.bound_mode,
            notes: Vec::new(),
        };
        let ctx = StepContext::new(&probe, &policy)?;
        let a = rec.a_r.to_u128().unwrap_or(u128::MAX);
        let mut detail = String::new();
        let mut pass = true;
        for (idx, family) in ctx.families.iter().enumerate() {
            let j = idx + 1;
            let d = disc_sum_d_with(&family.context(&rec.a_r)?, None).value;
            let lemma2 = bounds_for(rec.r, j as u64, &state.schedule)?.lemma2_bound;
            let ok = d < lemma2 * (1.0 - ACCEPT_MARGIN);
            if !ok {
                pass = false;
            }
            if (d - rec.d_values[idx]).abs() > 1e-9 * d.max(1.0) {
                pass = false;
                let _ = write!(detail, "j={j}: recorded D {} but re-evaluated {d}; ", rec.d_values[idx]);
            }
            let _ = write!(detail, "j={j}: D={d:.6} < {lemma2:.6} {}; ", if ok { "ok" } else { "FAIL" });
        }
        match minimality_budget {
            Some(budget) if a <= budget => {
                let smaller = (0..a).find(|&c| ctx.trial(c, true).map(|t| t.pass).unwrap_or(false));
                if let Some(c) = smaller {
                    pass = false;
                    let _ = write!(detail, "candidate {c} < a_r also qualifies");
                } else {
                    let _ = write!(detail, "all {a} smaller candidates fail");
                }
            }
            Some(_) => {
                let _ = write!(detail, "minimality skipped (a_r over budget)");
            }
            None => {}
        }
        out.push(StepAudit {
            r: rec.r,
            pass,
            detail: detail.trim_end_matches([' ', ';']).to_string(),
        });
        alpha = &alpha + &step_term(&state.schedule, rec.r, &rec.a_r)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;
    use crate::schedule::{BaseSequence, NRule, QRule, SpeedSequence};

    fn d(n: i64, s: u64) -> Dyadic {
        Dyadic::new(n, s)
    }

    #[test]
    fn tail_bound_values() {
        let original = Schedule::corollary();
        assert_eq!(tail_bound(5, &original).unwrap(), Dyadic::pow2(-29));
        let quad = Schedule::quadratic();
        assert_eq!(tail_bound(10, &quad).unwrap(), Dyadic::pow2(-99));
    }

    #[test]
    fn certified_digits_inside_one_cell() {
        // 0.1101₂ with width 2^-7
        let cd = certified_digits(&d(13, 4), &Dyadic::pow2(-7), 2).unwrap();
        assert!(cd.digits.starts_with("1101"));
        // the half-open interval is exactly the cell 0.1101000₂
        assert_eq!(cd.digits, "1101000");
        assert!(cd.integer_certified);
    }

    #[test]
    fn certified_digits_carry_risk() {
        // 0.1111₂ with width just over 2^-4: the interval crosses 1
        let wide = &Dyadic::pow2(-4) + &Dyadic::pow2(-10);
        let cd = certified_digits(&d(15, 4), &wide, 2).unwrap();
        assert!(cd.len() < 4);
        assert!(!cd.integer_certified);
        // width exactly 2^-4: [0.1111, 1) stays below the carry
        let cd = certified_digits(&d(15, 4), &Dyadic::pow2(-4), 2).unwrap();
        assert_eq!(cd.digits, "1111");
    }

    #[test]
    fn certified_digits_decimal() {
        // [0.25, 0.25 + 2^-20): decimal 0.25000…
        let cd = certified_digits(&d(1, 2), &Dyadic::pow2(-20), 10).unwrap();
        assert!(cd.digits.starts_with("25000"));
        assert!(cd.len() >= 5);
    }

    #[test]
    fn zero_step_keeps_alpha() {
        let s = Schedule::corollary();
        let st = run(&s, &SearchPolicy::default(), 5).unwrap();
        assert_eq!(st.history.len(), 1);
        if st.history[0].a_r.is_zero() {
            assert_eq!(st.alpha_r, s.start_value);
            assert_eq!(st.history[0].candidates_tried, 1);
        }
    }

    #[test]
    fn run_rejects_short_range() {
        let s = Schedule::corollary();
        assert!(matches!(
            run(&s, &SearchPolicy::default(), 4),
            Err(LevinError::Precondition(_))
        ));
    }

    fn seeded_quadratic() -> Schedule {
        Schedule::quadratic()
            .with_start_value(d(0x6a09e667f3bcc908u64 as i64 & i64::MAX, 63))
            .unwrap()
    }

    #[test]
    fn counters_match_pair_count_without_abort() {
        let s = seeded_quadratic();
        let policy = SearchPolicy {
            early_abort: false,
            bound_mode: BoundMode::Strict,
            ..SearchPolicy::default()
        };
        let st = run(&s, &policy, 9).unwrap();
        for rec in &st.history {
            let expected: u64 = (1..=rec.max_j)
                .map(|j| {
                    let a = s.a_of(rec.r, j).unwrap();
                    ((2 * a + 1) * (2 * a + 1) - 1) * rec.d_eval_counts[j as usize - 1]
                })
                .sum();
            assert_eq!(rec.s_eval_count, expected, "step {}", rec.r);
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let s = seeded_quadratic();
        let seq = SearchPolicy {
            bound_mode: BoundMode::Strict,
            ..SearchPolicy::default()
        };
        let par = SearchPolicy { threads: 4, ..seq.clone() };
        let a = run(&s, &seq, 10).unwrap();
        let b = run(&s, &par, 10).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_checkpoint_json(), b.to_checkpoint_json());
    }

    #[test]
    fn alpha_reconstructs_and_cascades() {
        let s = seeded_quadratic();
        let policy = SearchPolicy {
            bound_mode: BoundMode::Strict,
            ..SearchPolicy::default()
        };
        let mut st = ConstructionState::new(s.clone()).unwrap();
        st.bound_mode = BoundMode::Strict;
        let mut alphas = vec![(st.r, st.alpha_r.clone())];
        for _ in 0..5 {
            step(&mut st, &policy).unwrap();
            alphas.push((st.r, st.alpha_r.clone()));
        }
        assert_eq!(st.reconstruct_alpha().unwrap(), st.alpha_r);
        for (i, (r, a)) in alphas.iter().enumerate() {
            for (_, b) in &alphas[i + 1..] {
                let gap = b - a;
                assert!(!gap.is_negative());
                assert!(gap < tail_bound(*r, &s).unwrap());
            }
        }
    }

    #[test]
    fn checkpoint_round_trip_and_resume() {
        let s = seeded_quadratic();
        let policy = SearchPolicy {
            bound_mode: BoundMode::Strict,
            ..SearchPolicy::default()
        };
        let full = run(&s, &policy, 9).unwrap();
        let mut partial = run(&s, &policy, 6).unwrap();
        let text = partial.to_checkpoint_json();
        let loaded = ConstructionState::from_checkpoint_json(&text).unwrap();
        assert_eq!(loaded, partial);
        assert_eq!(loaded.to_checkpoint_json(), text);
        partial = loaded;
        resume(&mut partial, &policy, 9).unwrap();
        assert_eq!(partial.to_checkpoint_json(), full.to_checkpoint_json());
    }

    #[test]
    fn checkpoint_rejects_damage() {
        let s = Schedule::corollary();
        let st = run(&s, &SearchPolicy::default(), 5).unwrap();
        let text = st.to_checkpoint_json();
        assert!(matches!(
            ConstructionState::from_checkpoint_json(&text[..text.len() / 2]),
            Err(LevinError::MalformedCheckpoint(_))
        ));
        let bumped = text.replace("\"format_version\": 1", "\"format_version\": 99");
        assert!(matches!(
            ConstructionState::from_checkpoint_json(&bumped),
            Err(LevinError::VersionMismatch { found: 99, .. })
        ));
    }

    #[test]
    fn scaled_threshold_forces_real_search() {
        let s = Schedule::corollary()
            .with_start_value(Dyadic::sqrt_floor(2, 256).frac())
            .unwrap();
        // the first few candidates at r = 5 sit just above 0.098 of the bound
        let tight = SearchPolicy {
            bound_mode: BoundMode::Scaled { numerator: 98, denominator: 1000 },
            ..SearchPolicy::default()
        };
        let st = run(&s, &tight, 5).unwrap();
        assert!(st.history[0].candidates_tried > 1);
        for h in &st.history {
            assert_eq!(h.candidates_tried, h.a_r.to_u64().unwrap() + 1);
        }
        let text = st.to_checkpoint_json();
        assert_eq!(ConstructionState::from_checkpoint_json(&text).unwrap(), st);
        let audit = audit_history(&st, Some(1 << 20)).unwrap();
        assert!(audit.iter().all(|a| a.pass), "{audit:?}");

        let hopeless = SearchPolicy {
            bound_mode: BoundMode::Scaled { numerator: 1, denominator: 20 },
            candidate_cap: 64,
            ..SearchPolicy::default()
        };
        assert!(matches!(
            run(&s, &hopeless, 5),
            Err(LevinError::CapExhausted { r: 5, cap: 64 })
        ));
    }

    #[test]
    fn empty_candidate_range_exhausts() {
        let policy = SearchPolicy {
            candidate_cap: 0,
            ..SearchPolicy::default()
        };
        assert!(matches!(
            run(&Schedule::corollary(), &policy, 5),
            Err(LevinError::CapExhausted { r: 5, cap: 0 })
        ));
    }

    #[test]
    fn strict_threshold_never_looser() {
        let s = seeded_quadratic();
        for r in 5..=12 {
            for j in 1..=s.omega(r).unwrap() {
                let b = bounds_for(r, j, &s).unwrap();
                assert!(b.strict_bound <= b.lemma2_bound);
            }
        }
        let strict = SearchPolicy {
            bound_mode: BoundMode::Strict,
            ..SearchPolicy::default()
        };
        // from the same state, anything strict accepts lemma2 accepts too
        let a = run(&s, &strict, 5).unwrap();
        let b = run(&s, &SearchPolicy::default(), 5).unwrap();
        assert!(b.history[0].a_r <= a.history[0].a_r);
    }

    #[test]
    fn explicit_non_power_q_rejected_by_search() {
        let s = Schedule::new(
            BaseSequence::IntegersFromTwo,
            SpeedSequence::PowersOfTwo,
            Dyadic::zero(),
            NRule::Quadratic,
            QRule::Constant(BigUint::from(6u32)),
        )
        .unwrap();
        assert!(run(&s, &SearchPolicy::default(), 5).is_err());
    }

    #[test]
    fn steps_csv_shape() {
        let st = run(&Schedule::corollary(), &SearchPolicy::default(), 6).unwrap();
        let csv = st.steps_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("5,"));
        assert!(lines[1].ends_with(','));
    }
}
