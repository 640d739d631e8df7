//! Python bindings for the distributed zeroth-order optimization testbed.
//!
//! The module mirrors the library's main types and operations: communication
//! graphs with their spectral gain advisors, benchmark problems with exact
//! noise models, gain schedules with the feasibility validator, the two-point
//! gradient estimator, the run loop, and the decay-rate fitters. Results
//! cross the boundary as plain Python structures (floats, lists, dicts), so
//! downstream analysis needs nothing beyond the standard library.
//!
//! Determinism carries over unchanged: a run is a pure function of
//! `(problem, graph, schedule, seed, x0)`, and worker count never changes
//! the numbers.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dzo_core::{
    build_topology, fit_loglog as core_fit_loglog, fit_semilog as core_fit_semilog, stream_rng,
    two_point_sampled, Engine, Error as CoreError, FitMode, Graph as CoreGraph,
    Problem as CoreProblem, RateFit, Regime, RunState, Schedule as CoreSchedule, StepParams,
    Topology, TraceRow,
};
use ndarray::Array1;

/// Map library errors onto Python exceptions: runtime blowups (divergence,
/// non-finite values) become `RuntimeError`, everything else is bad input
/// and becomes `ValueError`. The split matches the CLI's exit codes 2 and 1.
fn to_py_err(e: CoreError) -> PyErr {
    match e {
        CoreError::Diverged { .. } | CoreError::NonFinite { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_regime(name: &str) -> PyResult<Regime> {
    Ok(match name {
        "pd_diminishing" => Regime::PdDiminishing,
        "pd_speedup" => Regime::PdSpeedup,
        "pd_pl" => Regime::PdPl,
        "pd_constant" => Regime::PdConstant,
        "primal_diminishing" => Regime::PrimalDiminishing,
        "primal_speedup" => Regime::PrimalSpeedup,
        "primal_pl" => Regime::PrimalPl,
        "primal_constant" => Regime::PrimalConstant,
        other => {
            return Err(PyValueError::new_err(format!(
                "regime {other:?} is not one of pd_diminishing, pd_speedup, pd_pl, pd_constant, \
                 primal_diminishing, primal_speedup, primal_pl, primal_constant"
            )))
        }
    })
}

fn regime_name(regime: Regime) -> &'static str {
    match regime {
        Regime::PdDiminishing => "pd_diminishing",
        Regime::PdSpeedup => "pd_speedup",
        Regime::PdPl => "pd_pl",
        Regime::PdConstant => "pd_constant",
        Regime::PrimalDiminishing => "primal_diminishing",
        Regime::PrimalSpeedup => "primal_speedup",
        Regime::PrimalPl => "primal_pl",
        Regime::PrimalConstant => "primal_constant",
    }
}

fn check_dim(name: &str, got: usize, want: usize) -> PyResult<()> {
    if got != want {
        return Err(PyValueError::new_err(format!(
            "{name} has length {got}, problem dimension is {want}"
        )));
    }
    Ok(())
}

fn params_dict(py: Python<'_>, params: &StepParams) -> PyResult<Py<PyDict>> {
    let d = PyDict::new(py);
    d.set_item("eta", params.eta)?;
    d.set_item("alpha", params.alpha)?;
    d.set_item("beta", params.beta)?;
    d.set_item("gamma", params.gamma)?;
    d.set_item("delta_cap", params.delta_cap)?;
    Ok(d.into())
}

fn row_dict(py: Python<'_>, row: &TraceRow) -> PyResult<Py<PyDict>> {
    let d = PyDict::new(py);
    d.set_item("k", row.k)?;
    d.set_item("f_gap", row.f_gap)?;
    d.set_item("grad_norm_sq", row.grad_norm_sq)?;
    d.set_item("consensus_err", row.consensus_err)?;
    d.set_item("eta", row.eta)?;
    d.set_item("beta", row.beta)?;
    d.set_item("delta", row.delta)?;
    d.set_item("oracle_calls", row.oracle_calls)?;
    Ok(d.into())
}

fn fit_dict(py: Python<'_>, fit: &RateFit) -> PyResult<Py<PyDict>> {
    let d = PyDict::new(py);
    d.set_item("slope", fit.slope)?;
    d.set_item("intercept", fit.intercept)?;
    d.set_item("r2", fit.r2)?;
    d.set_item("window", fit.window)?;
    d.set_item("points", fit.points)?;
    Ok(d.into())
}

fn parse_fit_mode(mode: &str) -> PyResult<FitMode> {
    Ok(match mode {
        "per_k" => FitMode::PerK,
        "running_average" => FitMode::RunningAverage,
        other => {
            return Err(PyValueError::new_err(format!(
                "fit mode {other:?} must be \"per_k\" or \"running_average\""
            )))
        }
    })
}

/// An undirected weighted communication graph with its Laplacian spectrum
/// precomputed at construction. Exposes the spectral quantities and the four
/// gain advisors used to pick feasible schedule gains.
#[pyclass(module = "dzo")]
struct Graph {
    inner: CoreGraph,
}

#[pymethods]
impl Graph {
    /// Build a named topology over `n` vertices with uniform edge `weight`.
    /// `topology` is one of `ring`, `complete`, `star`, `path` or
    /// `erdos_renyi`; the latter requires `er_prob` and resamples from
    /// `er_seed` until connected.
    #[new]
    #[pyo3(signature = (topology, n, weight=1.0, er_prob=None, er_seed=0))]
    fn new(
        topology: &str,
        n: usize,
        weight: f64,
        er_prob: Option<f64>,
        er_seed: u64,
    ) -> PyResult<Graph> {
        let kind = match topology {
            "ring" => Topology::Ring,
            "complete" => Topology::Complete,
            "star" => Topology::Star,
            "path" => Topology::Path,
            "erdos_renyi" => {
                let prob = er_prob.ok_or_else(|| {
                    PyValueError::new_err("er_prob is required for topology \"erdos_renyi\"")
                })?;
                Topology::ErdosRenyi {
                    prob,
                    seed: er_seed,
                }
            }
            other => {
                return Err(PyValueError::new_err(format!(
                    "topology {other:?} is not one of ring, complete, star, path, erdos_renyi"
                )))
            }
        };
        let inner = build_topology(kind, n, weight).map_err(to_py_err)?;
        Ok(Graph { inner })
    }

    /// Number of vertices.
    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    /// Largest Laplacian eigenvalue.
    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho()
    }

    /// Smallest positive Laplacian eigenvalue (algebraic connectivity),
    /// 0.0 when the graph is disconnected.
    #[getter]
    fn rho2(&self) -> f64 {
        self.inner.rho2()
    }

    /// True when the graph is connected at working precision.
    #[getter]
    fn connected(&self) -> bool {
        self.inner.is_connected()
    }

    /// Laplacian eigenvalues in ascending order.
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues().to_vec()
    }

    /// Dense Laplacian matrix as a list of rows.
    fn laplacian(&self) -> Vec<Vec<f64>> {
        let lap = self.inner.laplacian();
        lap.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    /// Lower bound for the dual gain ratio `kappa1`.
    fn c1(&self) -> PyResult<f64> {
        self.inner.advisor_c1().map_err(to_py_err)
    }

    /// Upper bound for the dual product gain `kappa2` given `kappa1`.
    /// Requires `kappa1 > c1()`.
    fn c2(&self, kappa1: f64) -> PyResult<f64> {
        self.inner.advisor_c2(kappa1).map_err(to_py_err)
    }

    /// Upper bound for the primal mixing gain `gamma`.
    fn d1(&self) -> PyResult<f64> {
        self.inner.advisor_d1().map_err(to_py_err)
    }

    /// Upper bound for the primal step gain given the mixing gain, the
    /// smoothness constant, the dimension and the heterogeneity constants.
    /// Requires `0 < gamma < d1()`.
    #[pyo3(signature = (gamma, lf, p, sigma0=0.0, sigma0_tilde=0.0))]
    fn d2(&self, gamma: f64, lf: f64, p: usize, sigma0: f64, sigma0_tilde: f64) -> PyResult<f64> {
        self.inner
            .advisor_d2(gamma, lf, p, sigma0, sigma0_tilde)
            .map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(n={}, rho={:.6}, rho2={:.6}, connected={})",
            self.inner.n(),
            self.inner.rho(),
            self.inner.rho2(),
            self.inner.is_connected()
        )
    }
}

/// A benchmark objective `f(x) = (1/n) sum_i f_i(x)` together with its noisy
/// value oracle. Constructed noiseless via the static methods, then wrapped
/// with `with_noise(sigma0, sigma1)` to add multiplicative and additive
/// observation noise.
#[pyclass(module = "dzo")]
struct Problem {
    inner: CoreProblem,
}

#[pymethods]
impl Problem {
    /// Identical-agent quadratic with eigenvalues spread evenly over
    /// `[1, condition]`; gradient dominated with `nu = 1`, minimum 0.
    #[staticmethod]
    fn quadratic_pl(n: usize, p: usize, condition: f64) -> PyResult<Problem> {
        CoreProblem::quadratic_pl(n, p, condition)
            .map(|inner| Problem { inner })
            .map_err(to_py_err)
    }

    /// Identical-agent nonconvex objective `sum_j (x_j^2 + 3 sin^2 x_j)`,
    /// gradient dominated but not convex.
    #[staticmethod]
    fn sin_pl(n: usize, p: usize) -> PyResult<Problem> {
        CoreProblem::sin_pl(n, p)
            .map(|inner| Problem { inner })
            .map_err(to_py_err)
    }

    /// Quadratic with per-agent heterogeneity. Exactly one of `sigma2`
    /// (additive gradient spread) and `sigma0_tilde` (multiplicative
    /// curvature spread) may be nonzero.
    #[staticmethod]
    fn heterogeneous_quadratic(
        n: usize,
        p: usize,
        condition: f64,
        sigma2: f64,
        sigma0_tilde: f64,
    ) -> PyResult<Problem> {
        CoreProblem::heterogeneous_quadratic(n, p, condition, sigma2, sigma0_tilde)
            .map(|inner| Problem { inner })
            .map_err(to_py_err)
    }

    /// Linear objective `slope * sum_j x_j`, used to isolate estimator and
    /// consensus behavior; slope 0 makes every estimate exactly zero.
    #[staticmethod]
    fn linear_probe(n: usize, p: usize, slope: f64) -> PyResult<Problem> {
        CoreProblem::linear_probe(n, p, slope)
            .map(|inner| Problem { inner })
            .map_err(to_py_err)
    }

    /// Ridge-regularized logistic regression on synthetic per-agent data
    /// drawn deterministically from `seed`.
    #[staticmethod]
    fn logistic_synth(
        n: usize,
        p: usize,
        samples_per_agent: usize,
        ridge: f64,
        seed: u64,
    ) -> PyResult<Problem> {
        CoreProblem::logistic_synth(n, p, samples_per_agent, ridge, seed)
            .map(|inner| Problem { inner })
            .map_err(to_py_err)
    }

    /// Return a copy whose oracle adds multiplicative noise of standard
    /// deviation `sigma0` and additive-slope noise of standard deviation
    /// `sigma1` per coordinate.
    fn with_noise(&self, sigma0: f64, sigma1: f64) -> PyResult<Problem> {
        self.inner
            .clone()
            .with_noise(sigma0, sigma1)
            .map(|inner| Problem { inner })
            .map_err(to_py_err)
    }

    /// Number of agents.
    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    /// Decision dimension.
    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    /// Smoothness constant of the average objective.
    #[getter]
    fn lf(&self) -> f64 {
        self.inner.lf()
    }

    /// Gradient-dominance constant, `None` when the objective has none.
    #[getter]
    fn pl_nu(&self) -> Option<f64> {
        self.inner.pl_nu()
    }

    /// Exact minimum value, `None` when it is not known in closed form.
    #[getter]
    fn f_star(&self) -> Option<f64> {
        self.inner.f_star()
    }

    /// Multiplicative oracle noise standard deviation.
    #[getter]
    fn sigma0(&self) -> f64 {
        self.inner.sigma0()
    }

    /// Additive-slope oracle noise standard deviation.
    #[getter]
    fn sigma1(&self) -> f64 {
        self.inner.sigma1()
    }

    /// Exact average objective value at `x`.
    fn value(&self, x: Vec<f64>) -> PyResult<f64> {
        check_dim("x", x.len(), self.inner.p())?;
        Ok(self.inner.value(Array1::from(x).view()))
    }

    /// Exact average gradient at `x`.
    fn grad(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        check_dim("x", x.len(), self.inner.p())?;
        Ok(self.inner.grad(Array1::from(x).view()).to_vec())
    }

    /// Exact local objective value `f_i(x)` for one agent.
    fn local_value(&self, agent: usize, x: Vec<f64>) -> PyResult<f64> {
        if agent >= self.inner.n() {
            return Err(PyValueError::new_err(format!(
                "agent {agent} out of range for n = {}",
                self.inner.n()
            )));
        }
        check_dim("x", x.len(), self.inner.p())?;
        Ok(self.inner.local_value(agent, Array1::from(x).view()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem(n={}, p={}, lf={:.6}, sigma0={}, sigma1={})",
            self.inner.n(),
            self.inner.p(),
            self.inner.lf(),
            self.inner.sigma0(),
            self.inner.sigma1()
        )
    }
}

/// A gain schedule: one of the eight regimes with its gains. Keyword
/// arguments left as `None` keep the regime defaults, matching the behavior
/// of unset keys in a config file.
#[pyclass(module = "dzo")]
struct Schedule {
    inner: CoreSchedule,
}

#[pymethods]
impl Schedule {
    #[new]
    #[pyo3(signature = (regime, *, kappa0=None, kappa1=None, kappa2=None, kappa_eta=None,
                        kappa_delta=None, theta=None, t1=None, gamma=None, horizon=None,
                        epsilon_tilde=None, delta_multiplier=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        regime: &str,
        kappa0: Option<f64>,
        kappa1: Option<f64>,
        kappa2: Option<f64>,
        kappa_eta: Option<f64>,
        kappa_delta: Option<f64>,
        theta: Option<f64>,
        t1: Option<f64>,
        gamma: Option<f64>,
        horizon: Option<u64>,
        epsilon_tilde: Option<f64>,
        delta_multiplier: Option<f64>,
    ) -> PyResult<Schedule> {
        let mut inner = CoreSchedule::defaults(parse_regime(regime)?);
        if let Some(v) = kappa0 {
            inner.kappa0 = v;
        }
        if let Some(v) = kappa1 {
            inner.kappa1 = v;
        }
        if let Some(v) = kappa2 {
            inner.kappa2 = v;
        }
        if let Some(v) = kappa_eta {
            inner.kappa_eta = v;
        }
        if let Some(v) = kappa_delta {
            inner.kappa_delta = v;
        }
        if let Some(v) = theta {
            inner.theta = v;
        }
        if let Some(v) = t1 {
            inner.t1 = v;
        }
        if let Some(v) = gamma {
            inner.gamma = v;
        }
        if horizon.is_some() {
            inner.horizon = horizon;
        }
        if let Some(v) = epsilon_tilde {
            inner.epsilon_tilde = v;
        }
        if let Some(v) = delta_multiplier {
            inner.delta_multiplier = v;
        }
        Ok(Schedule { inner })
    }

    /// Regime name, e.g. `"pd_pl"`.
    #[getter]
    fn regime(&self) -> &'static str {
        regime_name(self.inner.regime)
    }

    #[getter]
    fn kappa0(&self) -> f64 {
        self.inner.kappa0
    }

    #[getter]
    fn kappa1(&self) -> f64 {
        self.inner.kappa1
    }

    #[getter]
    fn kappa2(&self) -> f64 {
        self.inner.kappa2
    }

    #[getter]
    fn kappa_eta(&self) -> f64 {
        self.inner.kappa_eta
    }

    #[getter]
    fn kappa_delta(&self) -> f64 {
        self.inner.kappa_delta
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.inner.theta
    }

    #[getter]
    fn t1(&self) -> f64 {
        self.inner.t1
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    #[getter]
    fn horizon(&self) -> Option<u64> {
        self.inner.horizon
    }

    #[getter]
    fn epsilon_tilde(&self) -> f64 {
        self.inner.epsilon_tilde
    }

    #[getter]
    fn delta_multiplier(&self) -> f64 {
        self.inner.delta_multiplier
    }

    /// Gains at iteration `k` for `n` agents in dimension `p`, as a dict
    /// with keys `eta`, `alpha`, `beta`, `gamma`, `delta_cap`. Slots the
    /// regime does not define are NaN.
    fn params_at(&self, py: Python<'_>, k: u64, n: usize, p: usize) -> PyResult<Py<PyDict>> {
        let params = self.inner.params_at(k, n, p).map_err(to_py_err)?;
        params_dict(py, &params)
    }

    fn __repr__(&self) -> String {
        format!(
            "Schedule(regime={:?}, kappa0={}, kappa1={}, kappa2={}, kappa_eta={}, gamma={})",
            regime_name(self.inner.regime),
            self.inner.kappa0,
            self.inner.kappa1,
            self.inner.kappa2,
            self.inner.kappa_eta,
            self.inner.gamma
        )
    }
}

/// Check a schedule against a graph and a problem. Returns a dict with the
/// verdict (`ok`), the violated hard conditions (`hard_failures`), advisory
/// `warnings`, and the advisor values `c1`, `c2`, `d1`, `d2` (None where
/// undefined).
#[pyfunction]
fn validate(
    py: Python<'_>,
    schedule: &Schedule,
    graph: &Graph,
    problem: &Problem,
) -> PyResult<Py<PyDict>> {
    let report = dzo_core::validate(&schedule.inner, &graph.inner, &problem.inner);
    let d = PyDict::new(py);
    d.set_item("regime", &report.regime)?;
    d.set_item("ok", report.is_ok())?;
    d.set_item("hard_failures", &report.hard_failures)?;
    d.set_item("warnings", &report.warnings)?;
    d.set_item("c1", report.c1)?;
    d.set_item("c2", report.c2)?;
    d.set_item("d1", report.d1)?;
    d.set_item("d2", report.d2)?;
    Ok(d.into())
}

/// Run one seed of the distributed optimization and return the recorded
/// trace as a list of dicts with keys `k`, `f_gap`, `grad_norm_sq`,
/// `consensus_err`, `eta`, `beta`, `delta`, `oracle_calls`.
///
/// `x0` is `"zeros"` or `"gaussian"` (entrywise `N(0, x0_scale^2)` drawn
/// from `seed`). `workers` bounds the agent-update thread count; the trace
/// does not depend on it. The schedule is not validated here; feasibility
/// checking is `validate`'s job. Raises `RuntimeError` when the iterates
/// diverge or a non-finite value appears, `ValueError` for bad input.
#[pyfunction]
#[pyo3(signature = (problem, graph, schedule, iterations, *, seed=0, record_every=1,
                    x0="gaussian", x0_scale=1.0, workers=None))]
#[allow(clippy::too_many_arguments)]
fn run(
    py: Python<'_>,
    problem: &Problem,
    graph: &Graph,
    schedule: &Schedule,
    iterations: u64,
    seed: u64,
    record_every: u64,
    x0: &str,
    x0_scale: f64,
    workers: Option<usize>,
) -> PyResult<Vec<Py<PyDict>>> {
    let mut engine = Engine::new(
        problem.inner.clone(),
        &graph.inner,
        schedule.inner.clone(),
        seed,
    )
    .map_err(to_py_err)?;
    if let Some(w) = workers {
        engine = engine.with_workers(w).map_err(to_py_err)?;
    }
    let (n, p) = (problem.inner.n(), problem.inner.p());
    let mut state = match x0 {
        "zeros" => RunState::zeros(n, p),
        "gaussian" => RunState::gaussian(n, p, x0_scale, seed),
        other => {
            return Err(PyValueError::new_err(format!(
                "x0 {other:?} must be \"zeros\" or \"gaussian\""
            )))
        }
    };
    let trace = py
        .detach(|| engine.run(&mut state, iterations, record_every))
        .map_err(to_py_err)?;
    trace.rows.iter().map(|row| row_dict(py, row)).collect()
}

/// One two-point gradient estimate for `problem`'s agent `agent` at `x`
/// with exploration radius `delta`. The direction and the oracle noise are
/// drawn from the same counter-based stream the run loop uses, keyed by
/// `(seed, agent, step)`, so estimates are reproducible coordinates of a
/// run rather than a separate random process.
#[pyfunction]
#[pyo3(signature = (problem, agent, x, delta, *, seed=0, step=0))]
fn estimate_gradient(
    problem: &Problem,
    agent: usize,
    x: Vec<f64>,
    delta: f64,
    seed: u64,
    step: u64,
) -> PyResult<Vec<f64>> {
    if agent >= problem.inner.n() {
        return Err(PyValueError::new_err(format!(
            "agent {agent} out of range for n = {}",
            problem.inner.n()
        )));
    }
    check_dim("x", x.len(), problem.inner.p())?;
    let x = Array1::from(x);
    let mut rng = stream_rng(seed, agent as u64, step);
    let estimate =
        two_point_sampled(&problem.inner, agent, x.view(), delta, &mut rng).map_err(to_py_err)?;
    Ok(estimate.grad.to_vec())
}

/// Ordinary least squares fit of `log y` against `log k` over iterations in
/// `window = (lo, hi)`, both ends inclusive. `mode` is `"per_k"` or
/// `"running_average"`. Returns a dict with `slope`, `intercept`, `r2`,
/// `window`, `points`.
#[pyfunction]
#[pyo3(signature = (ks, values, window, mode="per_k"))]
fn fit_loglog(
    py: Python<'_>,
    ks: Vec<u64>,
    values: Vec<f64>,
    window: (u64, u64),
    mode: &str,
) -> PyResult<Py<PyDict>> {
    let fit = core_fit_loglog(&ks, &values, window, parse_fit_mode(mode)?).map_err(to_py_err)?;
    fit_dict(py, &fit)
}

/// Ordinary least squares fit of `ln y` against `k` over iterations in
/// `window = (lo, hi)`, both ends inclusive. The slope is the per-iteration
/// log decrement. Same result keys as `fit_loglog`.
#[pyfunction]
#[pyo3(signature = (ks, values, window, mode="per_k"))]
fn fit_semilog(
    py: Python<'_>,
    ks: Vec<u64>,
    values: Vec<f64>,
    window: (u64, u64),
    mode: &str,
) -> PyResult<Py<PyDict>> {
    let fit = core_fit_semilog(&ks, &values, window, parse_fit_mode(mode)?).map_err(to_py_err)?;
    fit_dict(py, &fit)
}

#[pymodule]
fn dzo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Graph>()?;
    m.add_class::<Problem>()?;
    m.add_class::<Schedule>()?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(fit_loglog, m)?)?;
    m.add_function(wrap_pyfunction!(fit_semilog, m)?)?;
    Ok(())
}
