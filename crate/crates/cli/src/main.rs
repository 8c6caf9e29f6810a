//! `levin`: batch front end for the construction, digit extraction,
//! discrepancy reports, schedule validation and checkpoint audits.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use num_rational::BigRational;

use levin_core::construction::{self, ConstructionState, SearchPolicy, DEFAULT_CANDIDATE_CAP};
use levin_core::discrepancy::{self, block_etk_check, proof_chain_check};
use levin_core::expsums::{lemma1_bound, mean_square_table, BoundMode};
use levin_core::schedule::{
    check_q_necessary, check_q_sufficient, classify_growth, concatenation_feasible, BaseSequence,
    Growth, NRule, QRule, Schedule, SpeedSequence,
};
use levin_core::{Dyadic, LevinError};

const FORCED_NOTE: &str = "construction valid but normality not guaranteed by Levin's proof";

#[derive(Parser)]
#[command(name = "levin", version, about = "Levin's absolutely normal numbers, computed exactly")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the construction and write a checkpoint plus a per-step CSV.
    Construct(ConstructArgs),
    /// Write the certified digits of a checkpoint.
    Digits(DigitsArgs),
    /// Measure star discrepancy of {α b^x} over a ladder of P.
    Analyze(AnalyzeArgs),
    /// Check a schedule against the validity conditions.
    Validate(ValidateArgs),
    /// Re-audit every recorded step of a checkpoint.
    Verify(VerifyArgs),
    /// Print a preset schedule document.
    Schedule(ScheduleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// n_r = 2^r − 2, q_r = 2^(2^r+r+1)
    Original,
    /// n_r = r², q_r derived from the block growth
    Quadratic,
    /// n_r = r (does not yield normality)
    Linear,
    /// n_r = r², q_r = 1024 (does not yield normality)
    BoundedQ,
}

#[derive(Args)]
#[group(multiple = false)]
struct ScheduleSource {
    /// Schedule document (JSON).
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Built-in schedule instead of a document.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
}

#[derive(Args)]
struct ConstructArgs {
    #[command(flatten)]
    source: ScheduleSource,
    /// Continue from this checkpoint instead of starting fresh.
    #[arg(long, conflicts_with_all = ["schedule", "preset", "start"])]
    resume: Option<PathBuf>,
    /// Start value `n/2^s`, an integer, or `sqrtN@bits` for frac(√N) truncated.
    #[arg(long)]
    start: Option<String>,
    /// Last step to perform.
    #[arg(long)]
    rmax: u64,
    /// Candidates tried per step before giving up.
    #[arg(long, default_value_t = DEFAULT_CANDIDATE_CAP)]
    cap: u128,
    /// `lemma2`, `strict`, or `scaled:n/d` for the lemma2 threshold times n/d.
    #[arg(long, default_value = "lemma2", value_parser = |s: &str| s.parse::<BoundMode>().map_err(|e| e.to_string()))]
    bound_mode: BoundMode,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Always sum D completely instead of stopping at the threshold.
    #[arg(long)]
    no_early_abort: bool,
    /// Record wall-clock milliseconds in the CSV (breaks byte-for-byte reruns).
    #[arg(long)]
    timing: bool,
    /// Construct even if the schedule fails validation.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DigitsArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 2)]
    base: u32,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    bases: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "64,256,1024")]
    ladder: Vec<usize>,
    /// Add Champernowne rows for each base.
    #[arg(long)]
    baseline: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    source: ScheduleSource,
    /// Check conditions for r = 1..=rmax.
    #[arg(long, default_value_t = 40)]
    rmax: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Largest q_r for which the mean-square statistic is enumerated.
    #[arg(long, default_value_t = 1 << 16)]
    t_budget: u128,
    /// Largest a_r for which every smaller candidate is re-tested.
    #[arg(long, default_value_t = DEFAULT_CANDIDATE_CAP)]
    minimality_budget: u128,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long, value_enum)]
    preset: Preset,
    #[arg(long)]
    start: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Construct(a) => cmd_construct(a),
        Command::Digits(a) => cmd_digits(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Schedule(a) => cmd_schedule(a),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// 0 ok, 1 runtime failure, 2 usage, 3 cap exhausted, 4 precision exhausted.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match err.downcast_ref::<LevinError>() {
        Some(LevinError::CapExhausted { .. }) => 3,
        Some(LevinError::PrecisionExhausted(_)) => 4,
        Some(LevinError::Precondition(_))
        | Some(LevinError::InvalidSchedule(_))
        | Some(LevinError::UnrecognizedRule(_)) => 2,
        _ => 1,
    }
}

/// A request the command line should not have made.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

fn preset_schedule(p: Preset) -> Schedule {
    let custom = |n, q| {
        Schedule::new(
            BaseSequence::IntegersFromTwo,
            SpeedSequence::PowersOfTwo,
            Dyadic::zero(),
            n,
            q,
        )
        .expect("preset is well formed")
    };
    match p {
        Preset::Original => Schedule::corollary(),
        Preset::Quadratic => Schedule::quadratic(),
        Preset::Linear => custom(NRule::Polynomial(vec![0, 1]), QRule::Derived),
        Preset::BoundedQ => custom(NRule::Quadratic, QRule::Constant(BigUint::from(1024u32))),
    }
}

fn parse_start(text: &str) -> anyhow::Result<Dyadic> {
    if let Some(rest) = text.strip_prefix("sqrt") {
        let (n, bits) = rest
            .split_once('@')
            .ok_or_else(|| usage(format!("start {text:?}: expected sqrtN@bits")))?;
        let n: u64 = n.parse().map_err(|_| usage(format!("start {text:?}: bad radicand")))?;
        let bits: u64 = bits.parse().map_err(|_| usage(format!("start {text:?}: bad bit count")))?;
        return Ok(Dyadic::sqrt_floor(n, bits).frac());
    }
    text.parse::<Dyadic>().map_err(|e| usage(e.to_string()))
}

fn load_schedule(src: &ScheduleSource, start: Option<&str>) -> anyhow::Result<Schedule> {
    let schedule = match (&src.schedule, src.preset) {
        (Some(path), _) => {
            let text = read(path)?;
            Schedule::from_json(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        (None, Some(p)) => preset_schedule(p),
        (None, None) => return Err(usage("one of --schedule or --preset is required")),
    };
    match start {
        Some(s) => Ok(schedule.with_start_value(parse_start(s)?)?),
        None => Ok(schedule),
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn precision_override() -> anyhow::Result<Option<u64>> {
    match std::env::var("LEVIN_PRECISION_BITS") {
        Ok(v) => Ok(Some(
            v.trim()
                .parse()
                .map_err(|_| usage(format!("LEVIN_PRECISION_BITS={v:?} is not an integer")))?,
        )),
        Err(_) => Ok(None),
    }
}

struct Validity {
    lines: Vec<String>,
    reasons: Vec<String>,
}

fn assess(schedule: &Schedule, r_max: u64) -> anyhow::Result<Validity> {
    let mut lines = Vec::new();
    let mut reasons = Vec::new();

    let suff = check_q_sufficient(schedule, r_max)?;
    match suff.first_failure() {
        None => lines.push(format!(
            "sufficient: pass (sufficient-condition lemma on q_r, r = 1..{r_max})"
        )),
        Some(f) => {
            lines.push(format!("sufficient: fail at r = {} ({}) (sufficient-condition lemma)", f.r, f.detail));
            reasons.push(format!("q_r too small for the averaging argument at r = {}", f.r));
        }
    }

    let nec = check_q_necessary(schedule, r_max)?;
    match (&nec.reason, nec.first_failure()) {
        (None, None) => lines.push(format!(
            "necessary: pass (necessary-condition lemma, q_r > 2^(n_(r+1) − n_r), r = 1..{r_max})"
        )),
        (reason, first) => {
            let why = reason
                .clone()
                .or_else(|| first.map(|f| format!("fails at r = {} ({})", f.r, f.detail)))
                .unwrap_or_default();
            lines.push(format!("necessary: fail: {why} (necessary-condition lemma)"));
            reasons.push(format!("necessary condition: {why}"));
        }
    }

    match classify_growth(schedule) {
        Ok(g) => {
            lines.push(format!(
                "growth: {} (growth table, discrepancy {})",
                g.label(),
                g.bound_template()
            ));
            if g == Growth::NonNormalLinear {
                reasons.push("linear n_r: the discrepancy bound does not go to 0".into());
            }
        }
        Err(e) => {
            lines.push(format!("growth: unclassified ({e})"));
            reasons.push("n_r growth cannot be classified".into());
        }
    }

    let concat = concatenation_feasible(schedule, r_max)?;
    let feasible = concat.outcomes.iter().filter(|o| o.pass).count();
    lines.push(if feasible == 0 {
        format!("concatenation: infeasible for every r = 1..{r_max} (concatenation proposition)")
    } else {
        format!(
            "concatenation: feasible at {feasible} of {r_max} steps (concatenation proposition)"
        )
    });

    Ok(Validity { lines, reasons })
}

fn cmd_schedule(a: ScheduleArgs) -> anyhow::Result<ExitCode> {
    let mut s = preset_schedule(a.preset);
    if let Some(start) = &a.start {
        s = s.with_start_value(parse_start(start)?)?;
    }
    let text = s.to_json() + "\n";
    match &a.out {
        Some(p) => write(p, &text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(a: ValidateArgs) -> anyhow::Result<ExitCode> {
    let schedule = load_schedule(&a.source, None)?;
    let v = assess(&schedule, a.rmax)?;
    let mut text = v.lines.join("\n") + "\n";
    if v.reasons.is_empty() {
        text.push_str("verdict: valid\n");
    } else {
        text.push_str(&format!("verdict: invalid ({})\n", v.reasons.join("; ")));
    }
    print!("{text}");
    if let Some(p) = &a.out {
        write(p, &text)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_construct(a: ConstructArgs) -> anyhow::Result<ExitCode> {
    let policy = SearchPolicy {
        threads: a.threads.max(1),
        candidate_cap: a.cap,
        bound_mode: a.bound_mode,
        early_abort: !a.no_early_abort,
        timing: a.timing,
        precision_bits: precision_override()?,
    };
    let mut state = match &a.resume {
        Some(path) => ConstructionState::load(path)
            .with_context(|| format!("loading {}", path.display()))?,
        None => {
            let schedule = load_schedule(&a.source, a.start.as_deref())?;
            let ell1 = schedule.ell(1)?;
            if a.rmax < ell1 {
                return Err(usage(format!("--rmax {} is below ℓ₁ = {ell1}", a.rmax)));
            }
            let validity = assess(&schedule, a.rmax)?;
            let mut state = ConstructionState::new(schedule)?;
            state.bound_mode = policy.bound_mode;
            if !validity.reasons.is_empty() {
                if !a.force {
                    return Err(usage(format!(
                        "schedule refused: {} (use --force to construct anyway)",
                        validity.reasons.join("; ")
                    )));
                }
                eprintln!("warning: {FORCED_NOTE}");
                state.notes.push(FORCED_NOTE.to_string());
            }
            state
        }
    };
    if a.rmax < state.r.saturating_sub(1) {
        return Err(usage(format!(
            "checkpoint already runs through r = {}",
            state.r - 1
        )));
    }

    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let outcome = construction::resume(&mut state, &policy, a.rmax);
    // keep whatever was completed, even when a later step failed
    state.save(a.out.join("checkpoint.json"))?;
    write(&a.out.join("steps.csv"), &state.steps_csv())?;
    outcome?;

    let digits = state.certified_digits(2)?;
    println!(
        "completed steps {}..={}; α_r = {} ({} certified binary digits)",
        state.schedule.ell(1)?,
        state.r - 1,
        abbreviate(&state.alpha_r.to_string(), 60),
        digits.len()
    );
    for note in &state.notes {
        println!("note: {note}");
    }
    Ok(ExitCode::SUCCESS)
}

fn abbreviate(s: &str, n: usize) -> String {
    if s.chars().count() <= n {
        s.to_string()
    } else {
        let head: String = s.chars().take(n).collect();
        format!("{head}…")
    }
}

fn cmd_digits(a: DigitsArgs) -> anyhow::Result<ExitCode> {
    if !(2..=36).contains(&a.base) {
        return Err(usage(format!("--base {} is outside 2..=36", a.base)));
    }
    let state = ConstructionState::load(&a.checkpoint)
        .with_context(|| format!("loading {}", a.checkpoint.display()))?;
    let n_r = state.schedule.n_of(state.r)?;
    let cd = state.certified_digits(a.base)?;
    let mut text = format!(
        "# base: {}\n# certified_length: {}\n# tail_bound: 2^-{}\n# steps_through_r: {}\n",
        a.base,
        cd.len(),
        n_r - 1,
        state.r - 1
    );
    for note in &state.notes {
        text.push_str(&format!("# note: {note}\n"));
    }
    if cd.integer_certified {
        text.push_str(&format!("{}.{}\n", cd.integer_part, cd.digits));
    } else {
        text.push_str("?\n");
    }
    match &a.out {
        Some(p) => write(p, &text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_analyze(a: AnalyzeArgs) -> anyhow::Result<ExitCode> {
    if a.bases.iter().any(|&b| b < 2) || a.ladder.iter().any(|&p| p == 0) {
        return Err(usage("bases must be ≥ 2 and ladder entries positive"));
    }
    let state = ConstructionState::load(&a.checkpoint)
        .with_context(|| format!("loading {}", a.checkpoint.display()))?;
    let report = discrepancy::report(&state, &a.bases, &a.ladder, a.baseline)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let csv = report.to_csv();
    write(&a.out.join("report.csv"), &csv)?;
    write(&a.out.join("report.json"), &report.to_json())?;
    print!("{csv}");
    Ok(ExitCode::SUCCESS)
}

struct Audit {
    lines: Vec<String>,
    failed: usize,
}

impl Audit {
    fn item(&mut self, verdict: &str, name: &str, detail: impl AsRef<str>) {
        if verdict == "FAIL" {
            self.failed += 1;
        }
        self.lines.push(format!("{verdict} {name}: {}", detail.as_ref()));
    }
}

fn cmd_verify(a: VerifyArgs) -> anyhow::Result<ExitCode> {
    let text = read(&a.checkpoint)?;
    let state = ConstructionState::from_checkpoint_json_raw(&text)?;
    let mut audit = Audit {
        lines: Vec::new(),
        failed: 0,
    };
    let sched = &state.schedule;

    match state.check_structure() {
        Ok(()) => audit.item("PASS", "structure", format!("{} recorded steps", state.history.len())),
        Err(e) => audit.item("FAIL", "structure", e.to_string()),
    }

    match construction::audit_history(&state, Some(a.minimality_budget)) {
        Ok(steps) => {
            for s in steps {
                let v = if s.pass { "PASS" } else { "FAIL" };
                audit.item(v, &format!("lemma2 r={}", s.r), s.detail);
            }
        }
        Err(e) => audit.item("FAIL", "lemma2", e.to_string()),
    }

    // α at the start of each recorded step, rebuilt from the history
    let mut alphas = vec![sched.start_value.clone()];
    for rec in &state.history {
        let n_r = sched.n_of(rec.r)?;
        let term = Dyadic::new(rec.a_r.clone(), n_r + rec.log2_q_r);
        let next = alphas.last().expect("nonempty") + &term;
        alphas.push(next);
    }

    for (rec, alpha) in state.history.iter().zip(&alphas) {
        let r = rec.r;
        for j in 1..=rec.max_j {
            let name = format!("lemma1 r={r} j={j}");
            let q = sched.q_of(r)?;
            if q.to_u128().is_none_or(|v| v > a.t_budget) {
                audit.item("SKIP", &name, format!("q_r = {q} exceeds the enumeration budget"));
                continue;
            }
            let bound = lemma1_bound(sched.lambda_ratio(j)?, sched.tau(r, j)?);
            match mean_square_table(sched, r, j, alpha, a.t_budget) {
                Ok(table) => {
                    let (worst, t) = table
                        .iter()
                        .cloned()
                        .fold(((0, 0), 0.0f64), |acc, x| if x.1 > acc.1 { x } else { acc });
                    let v = if t < bound { "PASS" } else { "FAIL" };
                    audit.item(
                        v,
                        &name,
                        format!("max T = {t:.6} at {worst:?} < {bound:.6} over {} pairs", table.len()),
                    );
                }
                Err(e) => audit.item("FAIL", &name, e.to_string()),
            }
        }
    }

    let gammas: Vec<BigRational> = (1..=9)
        .map(|k| BigRational::new(k.into(), 10.into()))
        .collect();
    for rec in &state.history {
        for j in 1..=rec.max_j {
            if rec.r < sched.ell(j)? {
                continue;
            }
            let name = format!("proof-chain r={} j={j}", rec.r);
            match proof_chain_check(&state, rec.r, j, &gammas) {
                Ok(checks) => {
                    let worst = checks.iter().map(|c| c.deviation).fold(0.0, f64::max);
                    let bound = checks.first().map(|c| c.bound).unwrap_or(0.0);
                    let v = if checks.iter().all(|c| c.pass) { "PASS" } else { "FAIL" };
                    audit.item(v, &name, format!("max |N − γτ| = {worst} ≤ {bound:.3e}"));
                }
                Err(LevinError::PrecisionExhausted(m)) => audit.item("SKIP", &name, m),
                Err(e) => audit.item("FAIL", &name, e.to_string()),
            }
        }
    }

    for (rec, alpha) in state.history.iter().zip(&alphas) {
        let name = format!("koksma r={} j=1", rec.r);
        match block_etk_check(sched, rec.r, 1, alpha, &rec.a_r) {
            Ok(c) => {
                let v = if c.pass { "PASS" } else { "FAIL" };
                audit.item(v, &name, format!("D₂ = {:.6} ≤ {:.3}", c.measured, c.bound));
            }
            Err(LevinError::BudgetExceeded { .. }) => {
                audit.item("SKIP", &name, "block exceeds the brute-force budget")
            }
            Err(e) => audit.item("FAIL", &name, e.to_string()),
        }
    }

    let mut cascade_ok = true;
    for (i, a_lo) in alphas.iter().enumerate() {
        let r = sched.ell(1)? + i as u64;
        let tail = construction::tail_bound(r, sched)?;
        for a_hi in &alphas[i + 1..] {
            let gap = a_hi - a_lo;
            if gap.is_negative() || gap >= tail {
                cascade_ok = false;
            }
        }
    }
    audit.item(
        if cascade_ok { "PASS" } else { "FAIL" },
        "cascade",
        format!("0 ≤ α_R − α_r < 2·2^(−n_r) over {} prefixes", alphas.len()),
    );

    let summary = format!(
        "{} items, {} failed\n",
        audit.lines.len(),
        audit.failed
    );
    let text = audit.lines.join("\n") + "\n" + &summary;
    print!("{text}");
    if let Some(p) = &a.out {
        write(p, &text)?;
    }
    if audit.failed > 0 {
        bail!("{} audit item(s) failed", audit.failed);
    }
    Ok(ExitCode::SUCCESS)
}
