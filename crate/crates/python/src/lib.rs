use num_bigint::BigUint;
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use levin_core::baseline;
use levin_core::construction::{self, ConstructionState, SearchPolicy};
use levin_core::discrepancy;
use levin_core::expsums::{self, BoundMode, BoundSet, OrbitFamily};
use levin_core::schedule::{self as sched};
use levin_core::Dyadic;

create_exception!(levin, LevinError, PyException);
create_exception!(levin, CapExhaustedError, LevinError);
create_exception!(levin, PrecisionExhaustedError, LevinError);

fn to_py(err: levin_core::LevinError) -> PyErr {
    use levin_core::LevinError as E;
    match err {
        E::CapExhausted { .. } => CapExhaustedError::new_err(err.to_string()),
        E::PrecisionExhausted(_) => PrecisionExhaustedError::new_err(err.to_string()),
        other => LevinError::new_err(other.to_string()),
    }
}

fn parse_dyadic(text: &str) -> PyResult<Dyadic> {
    text.parse().map_err(to_py)
}

fn parse_mode(mode: &str) -> PyResult<BoundMode> {
    mode.parse().map_err(to_py)
}

/// Index rules of a construction.
#[pyclass(name = "Schedule", module = "levin", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySchedule {
    inner: sched::Schedule,
}

#[pymethods]
impl PySchedule {
    /// n_r = 2^r − 2 with bases j + 1 and speeds 2^j.
    #[staticmethod]
    fn original() -> Self {
        PySchedule { inner: sched::Schedule::corollary() }
    }

    /// n_r = r² with q_r derived from the block growth.
    #[staticmethod]
    fn quadratic() -> Self {
        PySchedule { inner: sched::Schedule::quadratic() }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PySchedule { inner: sched::Schedule::from_json(text).map_err(to_py)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// A copy with start value `n/2^s`.
    fn with_start(&self, start: &str) -> PyResult<Self> {
        let inner = self.inner.clone().with_start_value(parse_dyadic(start)?).map_err(to_py)?;
        Ok(PySchedule { inner })
    }

    /// A copy whose start value is frac(√n) truncated to `bits` bits.
    fn with_sqrt_start(&self, n: u64, bits: u64) -> PyResult<Self> {
        let start = Dyadic::sqrt_floor(n, bits).frac();
        let inner = self.inner.clone().with_start_value(start).map_err(to_py)?;
        Ok(PySchedule { inner })
    }

    fn n(&self, r: u64) -> PyResult<u64> {
        self.inner.n_of(r).map_err(to_py)
    }

    fn q(&self, r: u64) -> PyResult<String> {
        Ok(self.inner.q_of(r).map_err(to_py)?.to_string())
    }

    fn ell(&self, k: u64) -> PyResult<u64> {
        self.inner.ell(k).map_err(to_py)
    }

    fn omega(&self, p: u64) -> PyResult<u64> {
        self.inner.omega(p).map_err(to_py)
    }

    fn tau(&self, r: u64, j: u64) -> PyResult<u64> {
        self.inner.tau(r, j).map_err(to_py)
    }

    fn a(&self, r: u64, j: u64) -> PyResult<u64> {
        self.inner.a_of(r, j).map_err(to_py)
    }

    /// `[(check, passed, detail)]` for r = 1..=r_max.
    fn validate(&self, r_max: u64) -> PyResult<Vec<(String, bool, String)>> {
        let s = &self.inner;
        let mut out = Vec::new();
        for rep in [
            sched::check_q_sufficient(s, r_max),
            sched::check_q_necessary(s, r_max),
            sched::concatenation_feasible(s, r_max),
        ] {
            let rep = rep.map_err(to_py)?;
            let detail = rep
                .reason
                .clone()
                .or_else(|| rep.first_failure().map(|f| format!("r = {}: {}", f.r, f.detail)))
                .unwrap_or_default();
            out.push((rep.name.to_string(), rep.pass(), detail));
        }
        match sched::classify_growth(s) {
            Ok(g) => out.push((
                "growth".into(),
                g != sched::Growth::NonNormalLinear,
                g.label(),
            )),
            Err(e) => out.push(("growth".into(), false, e.to_string())),
        }
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!("Schedule({})", self.inner.to_json().replace('\n', ""))
    }
}

/// A construction state: α_r, the step history and operation counters.
#[pyclass(name = "Construction", module = "levin")]
struct PyConstruction {
    inner: ConstructionState,
}

#[pymethods]
impl PyConstruction {
    #[new]
    fn new(schedule: &PySchedule) -> PyResult<Self> {
        Ok(PyConstruction { inner: ConstructionState::new(schedule.inner.clone()).map_err(to_py)? })
    }

    /// Advance through step `r_max`.
    #[pyo3(signature = (r_max, threads = 1, cap = 1 << 20, bound_mode = "lemma2", early_abort = true))]
    fn run(
        &mut self,
        py: Python<'_>,
        r_max: u64,
        threads: usize,
        cap: u128,
        bound_mode: &str,
        early_abort: bool,
    ) -> PyResult<()> {
        let policy = SearchPolicy {
            threads,
            candidate_cap: cap,
            bound_mode: parse_mode(bound_mode)?,
            early_abort,
            ..SearchPolicy::default()
        };
        if self.inner.history.is_empty() {
            self.inner.bound_mode = policy.bound_mode;
        }
        let state = &mut self.inner;
        py.detach(|| construction::resume(state, &policy, r_max)).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyConstruction { inner: ConstructionState::load(path).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_checkpoint(text: &str) -> PyResult<Self> {
        Ok(PyConstruction {
            inner: ConstructionState::from_checkpoint_json(text).map_err(to_py)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(to_py)
    }

    fn checkpoint(&self) -> String {
        self.inner.to_checkpoint_json()
    }

    fn steps_csv(&self) -> String {
        self.inner.steps_csv()
    }

    /// The next step to perform.
    #[getter]
    fn r(&self) -> u64 {
        self.inner.r
    }

    /// α_r as `n/2^s`.
    #[getter]
    fn alpha(&self) -> String {
        self.inner.alpha_r.to_string()
    }

    #[getter]
    fn alpha_float(&self) -> f64 {
        self.inner.alpha_r.to_f64()
    }

    #[getter]
    fn history<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .history
            .iter()
            .map(|rec| {
                let d = PyDict::new(py);
                d.set_item("r", rec.r)?;
                d.set_item("a_r", rec.a_r.to_string())?;
                d.set_item("n_r", rec.n_r)?;
                d.set_item("log2_q_r", rec.log2_q_r)?;
                d.set_item("d_values", rec.d_values.clone())?;
                d.set_item("bounds", rec.bounds.clone())?;
                d.set_item("candidates_tried", rec.candidates_tried)?;
                d.set_item("s_eval_count", rec.s_eval_count)?;
                d.set_item("max_j", rec.max_j)?;
                Ok(d)
            })
            .collect()
    }

    /// `(integer_part, digits)` certified for every real within the tail bound.
    #[pyo3(signature = (base = 2))]
    fn certified_digits(&self, base: u32) -> PyResult<(String, String)> {
        let cd = self.inner.certified_digits(base).map_err(to_py)?;
        Ok((cd.integer_part.to_string(), cd.digits))
    }

    /// Discrepancy report as JSON text.
    #[pyo3(signature = (bases, ladder, baseline = false))]
    fn report(&self, py: Python<'_>, bases: Vec<u32>, ladder: Vec<usize>, baseline: bool) -> PyResult<String> {
        let state = &self.inner;
        let rep = py
            .detach(|| discrepancy::report(state, &bases, &ladder, baseline))
            .map_err(to_py)?;
        Ok(rep.to_json())
    }
}

#[pyfunction]
fn champernowne_digits(base: u32, count: usize) -> String {
    baseline::champernowne_digits(base, count)
}

#[pyfunction]
fn champernowne_digit_at(base: u32, position: u64) -> char {
    baseline::champernowne_digit_at(base, position)
}

/// Star discrepancy of points in [0, 1).
#[pyfunction]
fn star_discrepancy(points: Vec<f64>) -> PyResult<f64> {
    if points.is_empty() || points.iter().any(|p| !(0.0..1.0).contains(p)) {
        return Err(LevinError::new_err("points must be nonempty and lie in [0, 1)"));
    }
    Ok(discrepancy::star_discrepancy_f64(&points))
}

#[pyfunction]
fn discrepancy_2d(points: Vec<(f64, f64)>) -> PyResult<f64> {
    let ok = |v: f64| (0.0..1.0).contains(&v);
    if points.iter().any(|&(u, v)| !ok(u) || !ok(v)) {
        return Err(LevinError::new_err("coordinates must lie in [0, 1)"));
    }
    discrepancy::discrepancy_2d(&discrepancy::PairPoints::from_f64(&points)).map_err(to_py)
}

#[pyfunction]
fn corollary_bound(p: u64, j: u64) -> PyResult<f64> {
    if j < 2 || p < 1 {
        return Err(LevinError::new_err("need j ≥ 2 and P ≥ 1"));
    }
    Ok(discrepancy::corollary_bound(p, j))
}

/// `(lemma1, lemma2, strict)` thresholds for the given λ/(λ−1), τ and ω.
#[pyfunction]
fn bounds(lambda_ratio: f64, tau: u64, omega: u64) -> (f64, f64, f64) {
    let b = BoundSet::new(lambda_ratio, tau, omega);
    (b.lemma1_bound, b.lemma2_bound, b.strict_bound)
}

/// `S_{r,j}(m₁, m₂)` at candidate `c` over α_r = `alpha`.
#[pyfunction]
fn exp_sum(schedule: &PySchedule, r: u64, j: u64, alpha: &str, c: u64, m1: i64, m2: i64) -> PyResult<Complex64> {
    let fam = OrbitFamily::new(&schedule.inner, r, j, &parse_dyadic(alpha)?).map_err(to_py)?;
    let ctx = fam.context(&BigUint::from(c)).map_err(to_py)?;
    Ok(expsums::exp_sum_s(&ctx, m1, m2))
}

/// `D_{r,j}` at candidate `c` over α_r = `alpha`.
#[pyfunction]
fn disc_sum(schedule: &PySchedule, r: u64, j: u64, alpha: &str, c: u64) -> PyResult<f64> {
    let fam = OrbitFamily::new(&schedule.inner, r, j, &parse_dyadic(alpha)?).map_err(to_py)?;
    let ctx = fam.context(&BigUint::from(c)).map_err(to_py)?;
    Ok(expsums::disc_sum_d(&ctx))
}

#[pymodule]
fn levin(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LevinError", m.py().get_type::<LevinError>())?;
    m.add("CapExhaustedError", m.py().get_type::<CapExhaustedError>())?;
    m.add("PrecisionExhaustedError", m.py().get_type::<PrecisionExhaustedError>())?;
    m.add_class::<PySchedule>()?;
    m.add_class::<PyConstruction>()?;
    m.add_function(wrap_pyfunction!(champernowne_digits, m)?)?;
    m.add_function(wrap_pyfunction!(champernowne_digit_at, m)?)?;
    m.add_function(wrap_pyfunction!(star_discrepancy, m)?)?;
    m.add_function(wrap_pyfunction!(discrepancy_2d, m)?)?;
    m.add_function(wrap_pyfunction!(corollary_bound, m)?)?;
    m.add_function(wrap_pyfunction!(bounds, m)?)?;
    m.add_function(wrap_pyfunction!(exp_sum, m)?)?;
    m.add_function(wrap_pyfunction!(disc_sum, m)?)?;
    Ok(())
}
