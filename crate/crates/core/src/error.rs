//! Crate-wide error type.
//!
//! Variants are grouped by the stage that raises them: graph construction,
//! problem construction, estimation, schedule validation, the run loop, rate
//! fitting, and config handling. The CLI maps them onto exit codes (config
//! and validation problems are exit 1, runtime divergence is exit 2), so run
//! failures must stay distinguishable from bad input.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // -- graph construction -------------------------------------------------
    #[error("graph needs at least one vertex")]
    EmptyGraph,

    #[error("edge probability {0} outside (0, 1]")]
    EdgeProbability(f64),

    #[error("edge weight {0} must be positive and finite")]
    EdgeWeight(f64),

    #[error("no connected graph with n = {n}, edge probability {prob} found in {attempts} attempts")]
    ConnectivityBudget { n: usize, prob: f64, attempts: u32 },

    #[error("graph is disconnected at working precision (smallest positive eigenvalue {rho2:.3e})")]
    Disconnected { rho2: f64 },

    #[error("single-vertex graph has no consensus spectrum; gain advisors are undefined for n = 1")]
    SingleAgentSpectrum,

    // -- problem construction ----------------------------------------------
    #[error("problem parameter {name} = {value} rejected: {reason}")]
    ProblemParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("additive heterogeneity with p = 1 needs an even agent count, got n = {n}")]
    OddHeterogeneity { n: usize },

    #[error("additive (sigma2) and multiplicative (sigma0_tilde) heterogeneity cannot be combined; the variance constants would no longer be exact")]
    MixedHeterogeneity,

    // -- estimator -----------------------------------------------------------
    #[error("smoothing radius {delta:.6e} is not positive")]
    DeltaNotPositive { delta: f64 },

    #[error("smoothing radius {delta:.6e} below the numeric floor {floor:.6e} = 1e-10 * (1 + |x|); the two-point difference would be dominated by cancellation")]
    DeltaBelowFloor { delta: f64, floor: f64 },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    // -- advisors and schedule validation ------------------------------------
    #[error("kappa1 = {kappa1} must exceed c1 = {c1}; the dual gain ratio leaves no spectral margin")]
    Kappa1TooSmall { kappa1: f64, c1: f64 },

    #[error("gamma = {gamma} outside the stable mixing band (0, d1 = {d1})")]
    GammaOutsideBand { gamma: f64, d1: f64 },

    #[error("smoothness constant {lf} must be positive")]
    NonPositiveSmoothness { lf: f64 },

    #[error("schedule invalid:\n{0}")]
    ScheduleInvalid(String),

    // -- run loop -------------------------------------------------------------
    #[error("iterates diverged at iteration {k}: max |x| = {magnitude:.3e} exceeds 1e12")]
    Diverged { k: u64, magnitude: f64 },

    // -- rate fitting ----------------------------------------------------------
    #[error("rate fit needs strictly positive values, found {value:.3e} at k = {k}")]
    FitNonPositive { k: u64, value: f64 },

    #[error("rate fit window [{lo}, {hi}] selects {found} points, need at least 2")]
    FitWindowTooSmall { lo: u64, hi: u64, found: usize },

    // -- config and io -----------------------------------------------------------
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit code the CLI should report for this error: 2 for a run that
    /// started and then blew up, 1 for everything the user can fix in the
    /// config.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Diverged { .. } | Error::NonFinite { .. } => 2,
            _ => 1,
        }
    }
}
