//! Step-size schedules and their feasibility checks.
//!
//! Each regime fixes how the coupling gain `beta`, consensus gain `alpha`,
//! step size `eta`, and exploration radius cap evolve with the iteration
//! counter. The dual-variable regimes tie `eta * beta = kappa2` exactly;
//! the primal-only regimes drive consensus through a fixed mixing gain
//! `gamma` instead. `validate` separates violations that void the tuning
//! rules (hard failures) from conditions that only affect the constants in
//! the guarantees (warnings).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::oracle::Problem;

/// Schedule family selector.
///
/// The `Pd*` regimes run the primal-dual update with a dual variable per
/// agent; the `Primal*` regimes run the single-variable update with a fixed
/// mixing gain. Within each family: `Diminishing` uses a polynomial decay
/// with exponent `theta`, `Pl` uses exact `1/k` decay tuned for gradient
/// dominated objectives, `Speedup` uses horizon-dependent constants sized so
/// the stationarity bound improves with the number of agents, and `Constant`
/// keeps every gain fixed with a geometrically shrinking exploration radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    PdDiminishing,
    PdSpeedup,
    PdPl,
    PdConstant,
    PrimalDiminishing,
    PrimalSpeedup,
    PrimalPl,
    PrimalConstant,
}

impl Regime {
    /// True for the regimes that maintain a dual variable.
    pub fn is_primal_dual(self) -> bool {
        matches!(
            self,
            Regime::PdDiminishing | Regime::PdSpeedup | Regime::PdPl | Regime::PdConstant
        )
    }

    /// True for the regimes whose constants depend on the run horizon.
    pub fn needs_horizon(self) -> bool {
        matches!(self, Regime::PdSpeedup | Regime::PrimalSpeedup)
    }

    fn name(self) -> &'static str {
        match self {
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
}

/// Gain constants for one run.
///
/// Fields that a regime does not read are simply ignored; `defaults` fills
/// every field so a caller only has to override the gains it cares about.
/// `horizon` must be set for the speedup regimes and is ignored elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub regime: Regime,
    /// Coupling-gain scale: `beta_k = kappa0 * (k + t1)^theta` in the
    /// diminishing regimes, the constant `beta` itself in `pd_constant`.
    pub kappa0: f64,
    /// Consensus-to-coupling ratio: `alpha_k = kappa1 * beta_k`.
    pub kappa1: f64,
    /// Step-coupling product: `eta_k * beta_k = kappa2` in every dual regime.
    pub kappa2: f64,
    /// Primal step scale: `eta_k = kappa_eta / (k + t1)^theta` in the
    /// diminishing primal regimes, the constant `eta` in `primal_constant`.
    pub kappa_eta: f64,
    /// Exploration-radius scale multiplying the per-regime cap formula.
    pub kappa_delta: f64,
    /// Decay exponent for the diminishing regimes, in (1/2, 1).
    pub theta: f64,
    /// Iteration offset keeping early steps finite, at least 1.
    pub t1: f64,
    /// Fixed mixing gain for the primal regimes.
    pub gamma: f64,
    /// Total iteration count, read only by the speedup regimes.
    pub horizon: Option<u64>,
    /// Geometric decay ratio for the constant regimes' radius cap, in (0, 1).
    pub epsilon_tilde: f64,
    /// Fraction of the radius cap actually used, in (0, 1].
    pub delta_multiplier: f64,
}

/// Per-iteration gains produced by a schedule.
///
/// Slots a regime does not define are `NaN`: `alpha` and `beta` in the
/// primal regimes, `gamma` in the dual regimes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub eta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Upper cap on the exploration radius before the multiplier and the
    /// numerical floor are applied.
    pub delta_cap: f64,
}

/// Outcome of checking a schedule against a graph and a problem.
///
/// `hard_failures` lists violated conditions the tuning rules require;
/// `warnings` lists conditions that only degrade the guarantee constants or
/// could not be checked. The advisor values used for the checks are recorded
/// so callers can print them alongside the verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub regime: String,
    pub hard_failures: Vec<String>,
    pub warnings: Vec<String>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub d1: Option<f64>,
    pub d2: Option<f64>,
}

impl ValidationReport {
    /// True when no hard failure was recorded.
    pub fn is_ok(&self) -> bool {
        self.hard_failures.is_empty()
    }

    /// Collapse the report into an error if any hard failure was recorded.
    pub fn into_result(self) -> Result<Self> {
        if self.is_ok() {
            Ok(self)
        } else {
            Err(Error::ScheduleInvalid(self.hard_failures.join("; ")))
        }
    }
}

impl Schedule {
    /// A complete schedule with conservative generic gains.
    ///
    /// The defaults are placeholders meant to be overridden per run: they
    /// satisfy the domain checks for every regime but not necessarily the
    /// graph-dependent gain bounds.
    pub fn defaults(regime: Regime) -> Self {
        Schedule {
            regime,
            kappa0: 1.0,
            kappa1: 2.0,
            kappa2: 0.1,
            kappa_eta: 1.0,
            kappa_delta: 1.0,
            theta: 0.6,
            t1: 10.0,
            gamma: 0.01,
            horizon: None,
            epsilon_tilde: 0.9,
            delta_multiplier: 1.0,
        }
    }

    /// Gains at iteration `k` for a network of `n` agents in dimension `p`.
    ///
    /// Fails only when a speedup regime is missing its horizon; all other
    /// parameter checking is `validate`'s job.
    pub fn params_at(&self, k: u64, n: usize, p: usize) -> Result<StepParams> {
        let kf = k as f64;
        let nf = n as f64;
        let pf = p as f64;
        match self.regime {
            Regime::PdDiminishing | Regime::PdPl => {
                let exponent = if self.regime == Regime::PdPl { 1.0 } else { self.theta };
                let beta = self.kappa0 * (kf + self.t1).powf(exponent);
                let eta = self.kappa2 / beta;
                Ok(StepParams {
                    eta,
                    alpha: self.kappa1 * beta,
                    beta,
                    gamma: f64::NAN,
                    delta_cap: self.kappa_delta * (pf * eta).sqrt() / (nf + pf).sqrt(),
                })
            }
            Regime::PdSpeedup => {
                let horizon = self.horizon_or_err()?;
                let beta = self.kappa2 * (pf * horizon).sqrt() / nf.sqrt();
                let eta = self.kappa2 / beta;
                Ok(StepParams {
                    eta,
                    alpha: self.kappa1 * beta,
                    beta,
                    gamma: f64::NAN,
                    delta_cap: self.kappa_delta * pf.powf(0.25) * nf.powf(0.25)
                        / ((nf + pf).sqrt() * (kf + 1.0).powf(0.25)),
                })
            }
            Regime::PdConstant => {
                let beta = self.kappa0;
                Ok(StepParams {
                    eta: self.kappa2 / beta,
                    alpha: self.kappa1 * beta,
                    beta,
                    gamma: f64::NAN,
                    delta_cap: self.kappa_delta * self.epsilon_tilde.powf(kf),
                })
            }
            Regime::PrimalDiminishing | Regime::PrimalPl => {
                let exponent = if self.regime == Regime::PrimalPl { 1.0 } else { self.theta };
                let eta = self.kappa_eta / (kf + self.t1).powf(exponent);
                Ok(StepParams {
                    eta,
                    alpha: f64::NAN,
                    beta: f64::NAN,
                    gamma: self.gamma,
                    delta_cap: self.kappa_delta * (pf * eta).sqrt() / (nf + pf).sqrt(),
                })
            }
            Regime::PrimalSpeedup => {
                let horizon = self.horizon_or_err()?;
                let eta = nf.sqrt() / (pf * horizon).sqrt();
                Ok(StepParams {
                    eta,
                    alpha: f64::NAN,
                    beta: f64::NAN,
                    gamma: self.gamma,
                    delta_cap: self.kappa_delta * pf.powf(0.25) * nf.powf(0.25)
                        / ((nf + pf).sqrt() * (kf + 1.0).powf(0.25)),
                })
            }
            Regime::PrimalConstant => Ok(StepParams {
                eta: self.kappa_eta,
                alpha: f64::NAN,
                beta: f64::NAN,
                gamma: self.gamma,
                delta_cap: self.kappa_delta * self.epsilon_tilde.powf(kf),
            }),
        }
    }

    fn horizon_or_err(&self) -> Result<f64> {
        match self.horizon {
            Some(t) if t >= 1 => Ok(t as f64),
            _ => Err(Error::ScheduleInvalid(format!(
                "regime {} requires a positive horizon",
                self.regime.name()
            ))),
        }
    }
}

/// Check a schedule's gains against the tuning rules for `graph` and
/// `problem`.
///
/// Never fails outright; every violation lands in the report so a caller can
/// show all of them at once. Graph-dependent checks are skipped with a
/// warning on a single-agent network, where the consensus terms vanish.
pub fn validate(schedule: &Schedule, graph: &Graph, problem: &Problem) -> ValidationReport {
    let mut report = ValidationReport {
        regime: schedule.regime.name().to_string(),
        hard_failures: Vec::new(),
        warnings: Vec::new(),
        c1: None,
        c2: None,
        d1: None,
        d2: None,
    };
    let mut hard = Vec::new();
    let mut warn = Vec::new();

    check_domain(schedule, &mut hard);

    let single_agent = graph.n() == 1;
    if single_agent {
        warn.push(
            "single-agent network: consensus-gain bounds are vacuous and were skipped"
                .to_string(),
        );
    }

    if schedule.regime.is_primal_dual() {
        if !single_agent {
            check_dual_gains(schedule, graph, &mut report, &mut hard);
        }
        if schedule.kappa0 <= 0.0
            && matches!(
                schedule.regime,
                Regime::PdDiminishing | Regime::PdPl | Regime::PdConstant
            )
        {
            hard.push(format!("kappa0 = {} must be positive", schedule.kappa0));
        }
        if schedule.regime == Regime::PdPl {
            check_pd_pl(schedule, problem, &mut hard, &mut warn);
        }
        if schedule.regime == Regime::PdConstant {
            check_constant_noise(problem, &mut warn);
        }
    } else {
        if !single_agent {
            check_primal_gains(schedule, graph, problem, &mut report, &mut hard, &mut warn);
        }
        if schedule.regime == Regime::PrimalPl {
            check_primal_pl(schedule, problem, &mut warn);
        }
        if schedule.regime == Regime::PrimalConstant {
            check_constant_noise(problem, &mut warn);
        }
    }

    if schedule.regime.needs_horizon() {
        check_horizon(schedule, graph, problem, &report, &mut hard, &mut warn);
    }

    report.hard_failures = hard;
    report.warnings = warn;
    report
}

/// Regime-independent domain checks on the raw gain values.
fn check_domain(schedule: &Schedule, hard: &mut Vec<String>) {
    let finite_fields = [
        ("kappa0", schedule.kappa0),
        ("kappa1", schedule.kappa1),
        ("kappa2", schedule.kappa2),
        ("kappa_eta", schedule.kappa_eta),
        ("kappa_delta", schedule.kappa_delta),
        ("theta", schedule.theta),
        ("t1", schedule.t1),
        ("gamma", schedule.gamma),
        ("epsilon_tilde", schedule.epsilon_tilde),
        ("delta_multiplier", schedule.delta_multiplier),
    ];
    for (name, value) in finite_fields {
        if !value.is_finite() {
            hard.push(format!("{name} = {value} must be finite"));
        }
    }
    if schedule.kappa_delta <= 0.0 {
        hard.push(format!(
            "kappa_delta = {} must be positive",
            schedule.kappa_delta
        ));
    }
    if !(schedule.delta_multiplier > 0.0 && schedule.delta_multiplier <= 1.0) {
        hard.push(format!(
            "delta_multiplier = {} must lie in (0, 1]",
            schedule.delta_multiplier
        ));
    }
    let diminishing = matches!(
        schedule.regime,
        Regime::PdDiminishing | Regime::PrimalDiminishing
    );
    if diminishing && !(schedule.theta > 0.5 && schedule.theta < 1.0) {
        hard.push(format!(
            "theta = {} must lie in (1/2, 1) for a diminishing schedule",
            schedule.theta
        ));
    }
    let uses_t1 = matches!(
        schedule.regime,
        Regime::PdDiminishing | Regime::PdPl | Regime::PrimalDiminishing | Regime::PrimalPl
    );
    if uses_t1 && schedule.t1 < 1.0 {
        hard.push(format!("t1 = {} must be at least 1", schedule.t1));
    }
    let constant = matches!(schedule.regime, Regime::PdConstant | Regime::PrimalConstant);
    if constant && !(schedule.epsilon_tilde > 0.0 && schedule.epsilon_tilde < 1.0) {
        hard.push(format!(
            "epsilon_tilde = {} must lie in (0, 1)",
            schedule.epsilon_tilde
        ));
    }
    if schedule.regime.is_primal_dual() && schedule.kappa2 <= 0.0 {
        hard.push(format!("kappa2 = {} must be positive", schedule.kappa2));
    }
}

/// Gain bounds shared by every dual regime: `kappa1 > c1` and
/// `kappa2 < c2(kappa1)`.
fn check_dual_gains(
    schedule: &Schedule,
    graph: &Graph,
    report: &mut ValidationReport,
    hard: &mut Vec<String>,
) {
    match graph.advisor_c1() {
        Ok(c1) => {
            report.c1 = Some(c1);
            if schedule.kappa1 <= c1 {
                hard.push(format!(
                    "kappa1 = {} must exceed the consensus-ratio bound c1 = {c1}",
                    schedule.kappa1
                ));
            }
        }
        Err(e) => hard.push(format!("consensus-ratio bound unavailable: {e}")),
    }
    match graph.advisor_c2(schedule.kappa1) {
        Ok(c2) => {
            report.c2 = Some(c2);
            if !(schedule.kappa2 > 0.0 && schedule.kappa2 < c2) {
                hard.push(format!(
                    "kappa2 = {} must lie in (0, c2) with c2 = {c2}",
                    schedule.kappa2
                ));
            }
        }
        Err(e) => {
            // kappa1 below the feasibility threshold already failed above;
            // report the missing bound once rather than twice.
            if !matches!(e, Error::Kappa1TooSmall { .. }) {
                hard.push(format!("step-coupling bound unavailable: {e}"));
            }
        }
    }
}

/// Gain bounds shared by every primal regime: `gamma` inside the mixing
/// band and the step scale below the advisor step bound.
fn check_primal_gains(
    schedule: &Schedule,
    graph: &Graph,
    problem: &Problem,
    report: &mut ValidationReport,
    hard: &mut Vec<String>,
    warn: &mut Vec<String>,
) {
    match graph.advisor_d1() {
        Ok(d1) => {
            report.d1 = Some(d1);
            if !(schedule.gamma > 0.0 && schedule.gamma < d1) {
                hard.push(format!(
                    "gamma = {} must lie in (0, d1) with d1 = {d1}",
                    schedule.gamma
                ));
            }
        }
        Err(e) => hard.push(format!("mixing-gain bound unavailable: {e}")),
    }
    if problem.lf() <= 0.0 {
        warn.push(format!(
            "smoothness constant {} is not positive; the step bound d2 is undefined and the step-scale check was skipped",
            problem.lf()
        ));
        return;
    }
    let d2 = match graph.advisor_d2(
        schedule.gamma,
        problem.lf(),
        problem.p(),
        problem.sigma0(),
        problem.sigma0_tilde(),
    ) {
        Ok(d2) => {
            report.d2 = Some(d2);
            d2
        }
        Err(e) => {
            // An out-of-band gamma already failed the check above.
            if !matches!(e, Error::GammaOutsideBand { .. }) {
                hard.push(format!("step bound unavailable: {e}"));
            }
            return;
        }
    };
    match schedule.regime {
        Regime::PrimalDiminishing => {
            let cap = d2 * schedule.t1.powf(schedule.theta);
            if !(schedule.kappa_eta > 0.0 && schedule.kappa_eta <= cap) {
                hard.push(format!(
                    "kappa_eta = {} must lie in (0, d2 * t1^theta] = (0, {cap}]",
                    schedule.kappa_eta
                ));
            }
        }
        Regime::PrimalPl => {
            let cap = d2 * schedule.t1;
            if !(schedule.kappa_eta > 0.0 && schedule.kappa_eta <= cap) {
                hard.push(format!(
                    "kappa_eta = {} must lie in (0, d2 * t1] = (0, {cap}]",
                    schedule.kappa_eta
                ));
            }
        }
        Regime::PrimalConstant => {
            if !(schedule.kappa_eta > 0.0 && schedule.kappa_eta < d2) {
                hard.push(format!(
                    "kappa_eta = {} must lie in (0, d2) with d2 = {d2}",
                    schedule.kappa_eta
                ));
            }
        }
        Regime::PrimalSpeedup => {
            // The speedup step is horizon-determined; d2 enters through the
            // horizon lower bound handled in check_horizon.
        }
        _ => unreachable!("dual regime routed to primal gain checks"),
    }
}

/// Extra conditions for exact `1/k` decay in the dual family. The window for
/// `kappa0` needs the gradient-dominance constant; its lower end and the
/// offset floor involve unpublished proof constants, so only the upper end
/// is enforced.
fn check_pd_pl(
    schedule: &Schedule,
    problem: &Problem,
    hard: &mut Vec<String>,
    warn: &mut Vec<String>,
) {
    let Some(nu) = problem.pl_nu() else {
        warn.push(
            "gradient-dominance constant unknown for this objective; the kappa0 window cannot be checked"
                .to_string(),
        );
        return;
    };
    let cap = 3.0 * nu * schedule.kappa2 / 16.0;
    if schedule.kappa0 >= cap {
        hard.push(format!(
            "kappa0 = {} must stay below 3*nu*kappa2/16 = {cap}",
            schedule.kappa0
        ));
    }
    warn.push(
        "the lower end of the kappa0 window and the t1 floor depend on proof constants that are not computed here"
            .to_string(),
    );
}

/// Extra conditions for exact `1/k` decay in the primal family. The band
/// floor `kappa_eta > 8/nu` trades off against the hard step cap through
/// t1; it is reported as a warning so practical small-offset runs remain
/// expressible.
fn check_primal_pl(schedule: &Schedule, problem: &Problem, warn: &mut Vec<String>) {
    let Some(nu) = problem.pl_nu() else {
        warn.push(
            "gradient-dominance constant unknown for this objective; the kappa_eta band cannot be checked"
                .to_string(),
        );
        return;
    };
    let floor = 8.0 / nu;
    if schedule.kappa_eta <= floor {
        warn.push(format!(
            "kappa_eta = {} is at or below 8/nu = {floor}; the 1/k rate guarantee needs a larger step scale (and a correspondingly large t1)",
            schedule.kappa_eta
        ));
    }
}

/// Note when a constant-gain schedule meets a noisy oracle: the iterates
/// then converge to a noise ball, not to the optimum.
fn check_constant_noise(problem: &Problem, warn: &mut Vec<String>) {
    if problem.sigma0() > 0.0 || problem.sigma1() > 0.0 {
        warn.push(
            "constant gains with a noisy oracle converge to a neighborhood whose radius scales with the noise; exact convergence needs a noiseless or purely relative-noise oracle"
                .to_string(),
        );
    }
}

/// Horizon lower bounds for the speedup regimes.
fn check_horizon(
    schedule: &Schedule,
    graph: &Graph,
    problem: &Problem,
    report: &ValidationReport,
    hard: &mut Vec<String>,
    warn: &mut Vec<String>,
) {
    let Some(horizon) = schedule.horizon else {
        hard.push(format!(
            "regime {} requires a horizon",
            schedule.regime.name()
        ));
        return;
    };
    let t = horizon as f64;
    let n = graph.n() as f64;
    let p = problem.p() as f64;
    let cube_floor = n.powi(3) / p;
    if t < cube_floor {
        hard.push(format!(
            "horizon {horizon} is below the network floor n^3/p = {cube_floor}"
        ));
    }
    match schedule.regime {
        Regime::PdSpeedup => {
            warn.push(
                "the horizon floor involving the dual proof constant was not checked"
                    .to_string(),
            );
        }
        Regime::PrimalSpeedup => {
            if let Some(d2) = report.d2 {
                let step_floor = n / (p * d2 * d2);
                if t < step_floor {
                    hard.push(format!(
                        "horizon {horizon} is below the step-bound floor n/(p*d2^2) = {step_floor}"
                    ));
                }
            } else if graph.n() > 1 && problem.lf() > 0.0 {
                warn.push(
                    "step bound unavailable; the horizon floor n/(p*d2^2) was not checked"
                        .to_string(),
                );
            }
        }
        _ => unreachable!("non-speedup regime routed to horizon checks"),
    }
}
