//! The two distributed update rules and the run loop that drives them.
//!
//! Both rules follow a gather-then-apply contract: every agent forms its
//! gradient estimate at the current iterate, then all agents move at once.
//! The dual-family update couples agents through the graph Laplacian and a
//! running disagreement integrator `v`; the primal-family update replaces the
//! integrator with a fixed Laplacian penalty step. Per-agent randomness is
//! keyed by `(seed, agent, iteration)`, so a run is reproducible regardless
//! of how the gather work is scheduled across worker threads.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{delta_floor, two_point_sampled};
use crate::graph::Graph;
use crate::metrics;
use crate::oracle::Problem;
use crate::rng::{stream_rng, MASTER_STREAM};
use crate::schedule::{Schedule, StepParams};

/// Any coordinate beyond this magnitude ends the run as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Mutable state of one run: the iteration counter, the `n x p` stack of
/// agent iterates, the dual stack (all zeros in the primal family), and the
/// number of oracle calls spent so far.
#[derive(Debug, Clone)]
pub struct RunState {
    pub k: u64,
    pub x: Array2<f64>,
    pub v: Array2<f64>,
    pub oracle_calls: u64,
}

impl RunState {
    /// All agents start at the origin.
    pub fn zeros(n: usize, p: usize) -> RunState {
        RunState::from_x(Array2::zeros((n, p)))
    }

    /// Every coordinate of every agent drawn independently from a centered
    /// Gaussian with the given standard deviation, off the run's master
    /// stream so agent streams stay untouched.
    pub fn gaussian(n: usize, p: usize, scale: f64, seed: u64) -> RunState {
        let mut rng = stream_rng(seed, MASTER_STREAM, 0);
        let x = Array2::from_shape_fn((n, p), |_| scale * rng.sample::<f64, _>(StandardNormal));
        RunState::from_x(x)
    }

    /// Start from an explicit iterate stack (one agent per row). The dual
    /// stack starts at zero, which keeps its across-agent sum at zero for
    /// the whole run.
    pub fn from_x(x: Array2<f64>) -> RunState {
        let v = Array2::zeros(x.raw_dim());
        RunState {
            k: 0,
            x,
            v,
            oracle_calls: 0,
        }
    }

    /// Number of agents.
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Decision dimension.
    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

/// Everything one iteration produced, kept for invariant probes: the gains
/// applied, the per-agent gradient estimates (one per row), and the
/// per-agent smoothing radii actually used after the numerical floor.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub params: StepParams,
    pub estimates: Array2<f64>,
    pub deltas: Array1<f64>,
}

/// One recorded point of a run, in output-schema order. Metrics that are
/// undefined for the configuration (`f_gap` without a certified optimum,
/// `beta` in the primal family) are `NaN`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub k: u64,
    pub f_gap: f64,
    pub grad_norm_sq: f64,
    pub consensus_err: f64,
    pub eta: f64,
    pub beta: f64,
    pub delta: f64,
    pub oracle_calls: u64,
}

/// The recorded rows of one run.
#[derive(Debug, Clone)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

/// A problem, a graph, and a schedule bound together with a seed, ready to
/// advance run states.
#[derive(Debug)]
pub struct Engine {
    problem: Problem,
    laplacian: Array2<f64>,
    schedule: Schedule,
    seed: u64,
    pool: Option<rayon::ThreadPool>,
}

impl Engine {
    /// Bind a problem to a graph and a schedule. The graph must have exactly
    /// one node per agent.
    pub fn new(problem: Problem, graph: &Graph, schedule: Schedule, seed: u64) -> Result<Engine> {
        if problem.n() != graph.n() {
            return Err(Error::Config(format!(
                "problem has {} agents but the graph has {} nodes",
                problem.n(),
                graph.n()
            )));
        }
        Ok(Engine {
            problem,
            laplacian: graph.laplacian(),
            schedule,
            seed,
            pool: None,
        })
    }

    /// Gather per-agent estimates on a dedicated pool of exactly `workers`
    /// threads. One worker means fully sequential gathering. The schedule of
    /// work never affects the result; this knob only trades wall time.
    pub fn with_workers(mut self, workers: usize) -> Result<Engine> {
        if workers == 0 {
            return Err(Error::Config("workers must be at least 1".to_string()));
        }
        self.pool = if workers == 1 {
            None
        } else {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| Error::Config(format!("failed to build worker pool: {e}")))?,
            )
        };
        Ok(self)
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Advance `state` by one iteration and report what the step did.
    pub fn step(&self, state: &mut RunState) -> Result<StepRecord> {
        let n = self.problem.n();
        let p = self.problem.p();
        let params = self.schedule.params_at(state.k, n, p)?;
        let delta_scheduled = params.delta_cap * self.schedule.delta_multiplier;
        let (estimates, deltas) = self.gather(state, delta_scheduled)?;

        // Both families read the Laplacian image of the pre-update iterates.
        let lx = self.laplacian.dot(&state.x);
        if self.schedule.regime.is_primal_dual() {
            let mut drive = &lx * params.alpha;
            drive += &(&state.v * params.beta);
            drive += &estimates;
            state.x.scaled_add(-params.eta, &drive);
            state.v.scaled_add(params.eta * params.beta, &lx);
        } else {
            state.x.scaled_add(-params.gamma, &lx);
            state.x.scaled_add(-params.eta, &estimates);
        }

        let mut max_abs = 0.0f64;
        for value in state.x.iter() {
            if !value.is_finite() {
                return Err(Error::NonFinite { context: "iterate" });
            }
            max_abs = max_abs.max(value.abs());
        }
        if max_abs > DIVERGENCE_LIMIT {
            return Err(Error::Diverged {
                k: state.k,
                magnitude: max_abs,
            });
        }

        state.k += 1;
        state.oracle_calls += 2 * n as u64;
        Ok(StepRecord {
            params,
            estimates,
            deltas,
        })
    }

    /// Run `iterations` steps, recording a row every `record_every`
    /// iterations (on the global grid `k % record_every == 0`) plus the
    /// final iterate.
    pub fn run(&self, state: &mut RunState, iterations: u64, record_every: u64) -> Result<Trace> {
        let record_every = record_every.max(1);
        let target = state.k + iterations;
        let mut rows = Vec::new();
        loop {
            if state.k.is_multiple_of(record_every) || state.k == target {
                rows.push(self.trace_row(state)?);
            }
            if state.k == target {
                break;
            }
            self.step(state)?;
        }
        Ok(Trace { rows })
    }

    fn trace_row(&self, state: &RunState) -> Result<TraceRow> {
        let params = self
            .schedule
            .params_at(state.k, self.problem.n(), self.problem.p())?;
        let point = metrics::evaluate(&self.problem, state.k, state.x.view());
        Ok(TraceRow {
            k: state.k,
            f_gap: point.f_gap.unwrap_or(f64::NAN),
            grad_norm_sq: point.grad_norm_sq,
            consensus_err: point.consensus_err,
            eta: params.eta,
            beta: params.beta,
            delta: params.delta_cap * self.schedule.delta_multiplier,
            oracle_calls: state.oracle_calls,
        })
    }

    fn gather(
        &self,
        state: &RunState,
        delta_scheduled: f64,
    ) -> Result<(Array2<f64>, Array1<f64>)> {
        let n = self.problem.n();
        let p = self.problem.p();
        let per_agent: Vec<(Array1<f64>, f64)> = match &self.pool {
            Some(pool) => pool.install(|| {
                (0..n)
                    .into_par_iter()
                    .map(|i| self.agent_estimate(&state.x, state.k, i, delta_scheduled))
                    .collect::<Result<Vec<_>>>()
            })?,
            None => (0..n)
                .map(|i| self.agent_estimate(&state.x, state.k, i, delta_scheduled))
                .collect::<Result<Vec<_>>>()?,
        };
        let mut estimates = Array2::zeros((n, p));
        let mut deltas = Array1::zeros(n);
        for (i, (grad, delta)) in per_agent.into_iter().enumerate() {
            estimates.row_mut(i).assign(&grad);
            deltas[i] = delta;
        }
        Ok((estimates, deltas))
    }

    fn agent_estimate(
        &self,
        x: &Array2<f64>,
        k: u64,
        agent: usize,
        delta_scheduled: f64,
    ) -> Result<(Array1<f64>, f64)> {
        let row = x.row(agent);
        // The scheduled radius wins unless it has shrunk below what the
        // oracle difference can resolve at this iterate's magnitude.
        let delta = delta_scheduled.max(delta_floor(row));
        let mut rng = stream_rng(self.seed, agent as u64, k);
        let estimate = two_point_sampled(&self.problem, agent, row, delta, &mut rng)?;
        Ok((estimate.grad, estimate.delta_used))
    }
}

// =============================================================================
// tests
// =============================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_topology, Topology};
    use crate::schedule::Regime;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use ndarray::array;

    fn quadratic_engine(regime: Regime, n: usize, p: usize, seed: u64) -> Engine {
        let problem = Problem::quadratic_pl(n, p, 1.0).unwrap();
        let graph = build_topology(Topology::Complete, n, 1.0).unwrap();
        Engine::new(problem, &graph, Schedule::defaults(regime), seed).unwrap()
    }

    fn manual_estimates(
        problem: &Problem,
        x: &Array2<f64>,
        seed: u64,
        k: u64,
        delta_scheduled: f64,
    ) -> Array2<f64> {
        let mut out = Array2::zeros((problem.n(), problem.p()));
        for i in 0..problem.n() {
            let row = x.row(i);
            let delta = delta_scheduled.max(delta_floor(row));
            let mut rng = stream_rng(seed, i as u64, k);
            let est = two_point_sampled(problem, i, row, delta, &mut rng).unwrap();
            out.row_mut(i).assign(&est.grad);
        }
        out
    }

    #[test]
    fn dual_family_step_matches_written_out_update() {
        let seed = 42;
        let engine = quadratic_engine(Regime::PdDiminishing, 2, 2, seed);
        let x0 = array![[1.0, 0.0], [0.0, 1.0]];
        let mut state = RunState::from_x(x0.clone());
        state.v = array![[0.5, -0.25], [-0.5, 0.25]];
        let v0 = state.v.clone();

        let params = engine.schedule().params_at(0, 2, 2).unwrap();
        let g = manual_estimates(engine.problem(), &x0, seed, 0, params.delta_cap);
        let laplacian = build_topology(Topology::Complete, 2, 1.0).unwrap().laplacian();
        let lx = laplacian.dot(&x0);

        let record = engine.step(&mut state).unwrap();
        assert_eq!(record.estimates, g);
        for i in 0..2 {
            for j in 0..2 {
                let expected_x =
                    x0[[i, j]] - params.eta * (params.alpha * lx[[i, j]] + params.beta * v0[[i, j]] + g[[i, j]]);
                let expected_v = v0[[i, j]] + params.eta * params.beta * lx[[i, j]];
                assert_abs_diff_eq!(state.x[[i, j]], expected_x, epsilon = 1e-13);
                assert_abs_diff_eq!(state.v[[i, j]], expected_v, epsilon = 1e-13);
            }
        }
        assert_eq!(state.k, 1);
        assert_eq!(state.oracle_calls, 4);
    }

    #[test]
    fn primal_family_step_matches_written_out_update() {
        let seed = 7;
        let engine = quadratic_engine(Regime::PrimalDiminishing, 2, 2, seed);
        let x0 = array![[2.0, -1.0], [0.5, 1.5]];
        let mut state = RunState::from_x(x0.clone());

        let params = engine.schedule().params_at(0, 2, 2).unwrap();
        let g = manual_estimates(engine.problem(), &x0, seed, 0, params.delta_cap);
        let laplacian = build_topology(Topology::Complete, 2, 1.0).unwrap().laplacian();
        let lx = laplacian.dot(&x0);

        let record = engine.step(&mut state).unwrap();
        assert_eq!(record.estimates, g);
        for i in 0..2 {
            for j in 0..2 {
                let expected =
                    x0[[i, j]] - params.gamma * lx[[i, j]] - params.eta * g[[i, j]];
                assert_abs_diff_eq!(state.x[[i, j]], expected, epsilon = 1e-13);
            }
        }
        // The dual stack is untouched in the primal family.
        assert_eq!(state.v, Array2::<f64>::zeros((2, 2)));
    }

    #[test]
    fn dual_stack_sum_stays_at_zero() {
        let problem = Problem::quadratic_pl(3, 2, 4.0).unwrap();
        let graph = build_topology(Topology::Ring, 3, 1.0).unwrap();
        let mut schedule = Schedule::defaults(Regime::PdDiminishing);
        schedule.kappa2 = 0.002;
        let engine = Engine::new(problem, &graph, schedule, 5).unwrap();
        let mut state = RunState::gaussian(3, 2, 1.0, 5);
        for _ in 0..100 {
            engine.step(&mut state).unwrap();
        }
        let column_sums = state.v.sum_axis(ndarray::Axis(0));
        let v_scale = state.v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        for s in column_sums.iter() {
            assert!(s.abs() <= 1e-12 * (1.0 + v_scale), "dual sum drifted: {s}");
        }
    }

    #[test]
    fn network_average_follows_the_mean_estimate() {
        let problem = Problem::quadratic_pl(4, 3, 2.0).unwrap().with_noise(0.2, 0.5).unwrap();
        let graph = build_topology(Topology::Ring, 4, 1.0).unwrap();
        let mut schedule = Schedule::defaults(Regime::PdDiminishing);
        schedule.kappa2 = 0.003;
        let engine = Engine::new(problem, &graph, schedule, 13).unwrap();
        let mut state = RunState::gaussian(4, 3, 1.0, 13);
        for _ in 0..50 {
            let before = state.x.mean_axis(ndarray::Axis(0)).unwrap();
            let record = engine.step(&mut state).unwrap();
            let after = state.x.mean_axis(ndarray::Axis(0)).unwrap();
            let mean_g = record.estimates.mean_axis(ndarray::Axis(0)).unwrap();
            for j in 0..3 {
                let expected = before[j] - record.params.eta * mean_g[j];
                assert_abs_diff_eq!(after[j], expected, epsilon = 1e-12 * (1.0 + expected.abs()));
            }
        }
    }

    #[test]
    fn identical_seeds_replay_identical_traces() {
        let engine = quadratic_engine(Regime::PdDiminishing, 3, 2, 99);
        let run = |engine: &Engine| {
            let mut state = RunState::gaussian(3, 2, 1.0, engine.seed());
            engine.run(&mut state, 200, 10).unwrap()
        };
        let a = run(&engine);
        let b = run(&engine);
        assert_eq!(a.rows.len(), b.rows.len());
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra, rb);
        }
    }

    #[test]
    fn worker_count_never_changes_the_trace() {
        let make = |workers: usize| {
            let problem = Problem::quadratic_pl(5, 3, 3.0).unwrap().with_noise(0.1, 0.3).unwrap();
            let graph = build_topology(Topology::Ring, 5, 1.0).unwrap();
            let mut schedule = Schedule::defaults(Regime::PdDiminishing);
            schedule.kappa2 = 0.002;
            let engine = Engine::new(problem, &graph, schedule, 21)
                .unwrap()
                .with_workers(workers)
                .unwrap();
            let mut state = RunState::gaussian(5, 3, 1.0, 21);
            engine.run(&mut state, 100, 7).unwrap()
        };
        let sequential = make(1);
        let parallel = make(3);
        for (ra, rb) in sequential.rows.iter().zip(&parallel.rows) {
            assert_eq!(ra, rb);
        }
    }

    #[test]
    fn runaway_steps_end_with_a_divergence_error() {
        let problem = Problem::quadratic_pl(2, 2, 1.0).unwrap();
        let graph = build_topology(Topology::Complete, 2, 1.0).unwrap();
        let mut schedule = Schedule::defaults(Regime::PrimalConstant);
        // A step far beyond 2/L on the unit quadratic oscillates outward.
        schedule.kappa_eta = 1e6;
        schedule.gamma = 0.01;
        let engine = Engine::new(problem, &graph, schedule, 3).unwrap();
        let mut state = RunState::gaussian(2, 2, 1.0, 3);
        let err = (0..200)
            .find_map(|_| engine.step(&mut state).err())
            .expect("the run should have diverged");
        assert!(matches!(err, Error::Diverged { .. } | Error::NonFinite { .. }));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn oracle_call_count_is_twice_agents_times_iterations() {
        let engine = quadratic_engine(Regime::PdDiminishing, 3, 2, 1);
        let mut state = RunState::zeros(3, 2);
        let trace = engine.run(&mut state, 50, 10).unwrap();
        assert_eq!(state.oracle_calls, 2 * 3 * 50);
        for row in &trace.rows {
            assert_eq!(row.oracle_calls, 2 * 3 * row.k);
        }
        assert_eq!(trace.rows.last().unwrap().k, 50);
    }

    #[test]
    fn trace_grid_includes_start_grid_points_and_final_iterate() {
        let engine = quadratic_engine(Regime::PdDiminishing, 2, 2, 1);
        let mut state = RunState::zeros(2, 2);
        let trace = engine.run(&mut state, 25, 10).unwrap();
        let ks: Vec<u64> = trace.rows.iter().map(|r| r.k).collect();
        assert_eq!(ks, vec![0, 10, 20, 25]);
        // The primal-family beta column is undefined.
        let engine = quadratic_engine(Regime::PrimalDiminishing, 2, 2, 1);
        let mut state = RunState::zeros(2, 2);
        let trace = engine.run(&mut state, 5, 1).unwrap();
        assert!(trace.rows.iter().all(|r| r.beta.is_nan()));
        assert!(trace.rows.iter().all(|r| r.eta > 0.0 && r.delta > 0.0));
    }

    #[test]
    fn zero_oracle_runs_contract_disagreement_only() {
        // A flat objective makes every estimate exactly zero, so the primal
        // family reduces to Laplacian averaging: the mean is invariant and
        // the disagreement contracts.
        let problem = Problem::linear_probe(4, 2, 0.0).unwrap();
        let graph = build_topology(Topology::Ring, 4, 1.0).unwrap();
        let mut schedule = Schedule::defaults(Regime::PrimalConstant);
        schedule.kappa_eta = 0.01;
        schedule.gamma = 0.05;
        let engine = Engine::new(problem, &graph, schedule, 17).unwrap();
        let mut state = RunState::gaussian(4, 2, 1.0, 17);
        let mean_before = state.x.mean_axis(ndarray::Axis(0)).unwrap();
        let spread_before = metrics::evaluate(engine.problem(), 0, state.x.view()).consensus_err;
        for _ in 0..100 {
            let record = engine.step(&mut state).unwrap();
            assert_eq!(record.estimates, Array2::<f64>::zeros((4, 2)));
        }
        let mean_after = state.x.mean_axis(ndarray::Axis(0)).unwrap();
        let spread_after = metrics::evaluate(engine.problem(), 0, state.x.view()).consensus_err;
        for j in 0..2 {
            assert_abs_diff_eq!(mean_after[j], mean_before[j], epsilon = 1e-12);
        }
        assert!(spread_after < 1e-6 * spread_before);
    }

    #[test]
    fn engine_rejects_mismatched_problem_and_graph() {
        let problem = Problem::quadratic_pl(3, 2, 1.0).unwrap();
        let graph = build_topology(Topology::Ring, 4, 1.0).unwrap();
        let err = Engine::new(problem, &graph, Schedule::defaults(Regime::PdDiminishing), 0)
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn gaussian_start_is_reproducible_and_scaled() {
        let a = RunState::gaussian(3, 4, 2.0, 11);
        let b = RunState::gaussian(3, 4, 2.0, 11);
        assert_eq!(a.x, b.x);
        let c = RunState::gaussian(3, 4, 1.0, 11);
        assert_relative_eq!(a.x[[1, 2]], 2.0 * c.x[[1, 2]], max_relative = 1e-15);
        assert_eq!(a.v, Array2::<f64>::zeros((3, 4)));
        assert_eq!(a.k, 0);
    }
}
