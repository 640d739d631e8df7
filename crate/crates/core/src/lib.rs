//! Distributed zeroth-order stochastic optimization over agent networks.
//!
//! A group of `n` agents cooperatively minimizes the average of local cost
//! functions `f(x) = (1/n) sum_i f_i(x)` over `x` in `R^p`. Agents never see
//! gradients: each one may only sample a noisy function-value oracle
//! `F_i(x, xi)` twice per iteration, and may only exchange its primal iterate
//! with its graph neighbors. This crate provides
//!
//! * undirected communication graphs with exact Laplacian spectra and the
//!   spectral gain advisors derived from them ([`graph`]),
//! * benchmark problems with closed-form minima, smoothness and
//!   gradient-dominance constants, wrapped in a noise model whose variance
//!   constants hold exactly by construction ([`oracle`]),
//! * the two-point sphere-smoothed gradient estimator ([`estimator`]),
//! * the gain schedules (diminishing, horizon-tuned, gradient-dominated and
//!   constant arms for both algorithm families) and their validator
//!   ([`schedule`]),
//! * the two update rules themselves, a primal-dual rule with a running
//!   disagreement integrator and a penalty-style primal rule, driven by
//!   reproducible counter-based randomness ([`engine`], [`rng`]),
//! * exact-side-channel metrics (optimality gap, squared gradient norm,
//!   consensus error), log-log rate fitting and cross-seed aggregation
//!   ([`metrics`]),
//! * config-file driven experiment running with CSV/JSON/SVG output
//!   ([`config`], [`runner`], [`report`]).
//!
//! Everything is deterministic given the config: traces are byte-identical
//! across reruns and across worker counts.

pub mod config;
pub mod engine;
pub mod error;
pub mod estimator;
pub mod graph;
pub mod metrics;
pub mod oracle;
pub mod report;
pub mod rng;
pub mod runner;
pub mod schedule;

pub use config::Config;
pub use engine::{Engine, RunState, StepRecord, Trace, TraceRow};
pub use error::{Error, Result};
pub use estimator::{
    delta_floor, sample_sphere, two_point_estimate, two_point_sampled, Estimate,
};
pub use graph::{build_topology, Graph, SpectralReport, Topology};
pub use metrics::{
    aggregate, evaluate, fit_loglog, fit_semilog, AggregateRow, FitMode, MetricPoint, RateFit,
};
pub use oracle::{Problem, ProblemKind, XiSample};
pub use rng::{stream_rng, MASTER_STREAM};
pub use schedule::{validate, Regime, Schedule, StepParams, ValidationReport};
