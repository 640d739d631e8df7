//! Experiment configuration: a flat TOML file with `[problem]`, `[graph]`,
//! `[schedule]`, `[run]`, and optional `[output]` sections.
//!
//! Parsing is strict: unknown keys are rejected so a typo cannot silently
//! fall back to a default. Value-level validation lives with the types the
//! sections build (`Problem`, `Graph`, `Schedule`); this module only checks
//! structure and cross-section consistency.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::graph::{build_topology, Graph, Topology};
use crate::oracle::Problem;
use crate::schedule::{Regime, Schedule};

/// Parsed experiment file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub problem: ProblemSection,
    pub graph: GraphSection,
    pub schedule: ScheduleSection,
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    /// One of `quadratic_pl`, `sin_pl`, `heterogeneous_quadratic`,
    /// `linear_probe`, `logistic_synth`.
    pub kind: String,
    pub n: usize,
    pub p: usize,
    #[serde(default)]
    pub sigma0: f64,
    #[serde(default)]
    pub sigma1: f64,
    /// Additive heterogeneity level for `heterogeneous_quadratic`.
    #[serde(default)]
    pub sigma2: f64,
    /// Multiplicative heterogeneity level for `heterogeneous_quadratic`.
    #[serde(default)]
    pub sigma0_tilde: f64,
    /// Curvature spread for the quadratic kinds.
    #[serde(default = "one")]
    pub condition_number: f64,
    /// Common gradient slope for `linear_probe`.
    #[serde(default = "one")]
    pub slope: f64,
    /// Data set size per agent for `logistic_synth`.
    #[serde(default = "default_samples")]
    pub samples_per_agent: usize,
    /// Ridge weight for `logistic_synth`.
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    /// Data-generation seed for `logistic_synth`, independent of run seeds.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    /// One of `ring`, `complete`, `star`, `path`, `erdos_renyi`, `custom`.
    pub topology: String,
    /// Optional repetition of the agent count; must match `problem.n`.
    pub n: Option<usize>,
    /// Edge probability for `erdos_renyi`.
    pub er_prob: Option<f64>,
    /// Uniform edge weight for the named topologies.
    #[serde(default = "one")]
    pub weight: f64,
    /// Sampling seed for `erdos_renyi`.
    #[serde(default)]
    pub seed: u64,
    /// Dense symmetric weight matrix for `custom`, row by row.
    pub weights: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    /// One of the eight `Regime` names, e.g. `pd_diminishing`.
    pub regime: String,
    pub kappa0: Option<f64>,
    pub kappa1: Option<f64>,
    pub kappa2: Option<f64>,
    pub kappa_eta: Option<f64>,
    pub kappa_delta: Option<f64>,
    pub theta: Option<f64>,
    pub t1: Option<f64>,
    pub gamma: Option<f64>,
    /// Horizon for the speedup regimes; falls back to `run.T`.
    #[serde(rename = "T")]
    pub t: Option<u64>,
    pub epsilon_tilde: Option<f64>,
    pub delta_multiplier: Option<f64>,
    /// Run even when the feasibility checks report hard failures.
    #[serde(default)]
    pub allow_unvalidated: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Iterations per seed.
    #[serde(rename = "T")]
    pub t: u64,
    #[serde(default = "one_u64")]
    pub record_every: u64,
    /// Number of independent seeds.
    #[serde(default = "one_usize")]
    pub seeds: usize,
    /// Base seed; seed `j` runs with `seed + j`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one_usize")]
    pub workers: usize,
    /// Start distribution: `zeros` or `gaussian`.
    #[serde(default = "default_x0")]
    pub x0: String,
    #[serde(default = "one")]
    pub x0_scale: f64,
    /// Agent counts for the speedup sweep command.
    pub sweep_n: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: String,
    /// Any of `csv`, `json`, `svg`.
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_dir(),
            formats: default_formats(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn one_u64() -> u64 {
    1
}
fn one_usize() -> usize {
    1
}
fn default_samples() -> usize {
    20
}
fn default_ridge() -> f64 {
    0.1
}
fn default_x0() -> String {
    "gaussian".to_string()
}
fn default_dir() -> String {
    "out".to_string()
}
fn default_formats() -> Vec<String> {
    vec!["csv".to_string(), "json".to_string(), "svg".to_string()]
}

impl Config {
    /// Parse a config from TOML text and check cross-section consistency.
    pub fn from_toml(text: &str) -> Result<Config> {
        let config: Config =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        config.check()?;
        Ok(config)
    }

    /// Read and parse a config file.
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)?;
        Config::from_toml(&text)
    }

    fn check(&self) -> Result<()> {
        if let Some(graph_n) = self.graph.n {
            if graph_n != self.problem.n {
                return Err(Error::Config(format!(
                    "graph.n = {} disagrees with problem.n = {}",
                    graph_n, self.problem.n
                )));
            }
        }
        if self.run.t == 0 {
            return Err(Error::Config("run.T must be at least 1".to_string()));
        }
        if self.run.seeds == 0 {
            return Err(Error::Config("run.seeds must be at least 1".to_string()));
        }
        if self.run.workers == 0 {
            return Err(Error::Config("run.workers must be at least 1".to_string()));
        }
        if !matches!(self.run.x0.as_str(), "zeros" | "gaussian") {
            return Err(Error::Config(format!(
                "run.x0 = {:?} must be \"zeros\" or \"gaussian\"",
                self.run.x0
            )));
        }
        for format in &self.output.formats {
            if !matches!(format.as_str(), "csv" | "json" | "svg") {
                return Err(Error::Config(format!(
                    "output format {format:?} is not one of csv, json, svg"
                )));
            }
        }
        if let Some(ns) = &self.run.sweep_n {
            if ns.is_empty() {
                return Err(Error::Config("run.sweep_n must not be empty".to_string()));
            }
        }
        // Fail early on an unknown kind, regime, or topology so the message
        // points at the config rather than a downstream builder.
        self.parse_regime()?;
        self.parse_topology()?;
        if !matches!(
            self.problem.kind.as_str(),
            "quadratic_pl" | "sin_pl" | "heterogeneous_quadratic" | "linear_probe"
                | "logistic_synth"
        ) {
            return Err(Error::Config(format!(
                "problem.kind {:?} is not a known objective",
                self.problem.kind
            )));
        }
        Ok(())
    }

    fn parse_regime(&self) -> Result<Regime> {
        Ok(match self.schedule.regime.as_str() {
            "pd_diminishing" => Regime::PdDiminishing,
            "pd_speedup" => Regime::PdSpeedup,
            "pd_pl" => Regime::PdPl,
            "pd_constant" => Regime::PdConstant,
            "primal_diminishing" => Regime::PrimalDiminishing,
            "primal_speedup" => Regime::PrimalSpeedup,
            "primal_pl" => Regime::PrimalPl,
            "primal_constant" => Regime::PrimalConstant,
            other => {
                return Err(Error::Config(format!(
                    "schedule.regime {other:?} is not a known regime"
                )))
            }
        })
    }

    /// The named topology, or `None` for `custom` (built from
    /// `graph.weights` instead).
    fn parse_topology(&self) -> Result<Option<Topology>> {
        let kind = match self.graph.topology.as_str() {
            "ring" => Topology::Ring,
            "complete" => Topology::Complete,
            "star" => Topology::Star,
            "path" => Topology::Path,
            "erdos_renyi" => {
                let prob = self.graph.er_prob.ok_or_else(|| {
                    Error::Config("graph.er_prob is required for erdos_renyi".to_string())
                })?;
                Topology::ErdosRenyi {
                    prob,
                    seed: self.graph.seed,
                }
            }
            "custom" => {
                if self.graph.weights.is_none() {
                    return Err(Error::Config(
                        "graph.weights is required for topology \"custom\"".to_string(),
                    ));
                }
                return Ok(None);
            }
            other => {
                return Err(Error::Config(format!(
                    "graph.topology {other:?} is not a known topology"
                )))
            }
        };
        if self.graph.weights.is_some() {
            return Err(Error::Config(format!(
                "graph.weights is only read with topology \"custom\", not {:?}",
                self.graph.topology
            )));
        }
        Ok(Some(kind))
    }

    /// Build the objective the config describes.
    pub fn build_problem(&self) -> Result<Problem> {
        let s = &self.problem;
        let problem = match s.kind.as_str() {
            "quadratic_pl" => Problem::quadratic_pl(s.n, s.p, s.condition_number)?,
            "sin_pl" => Problem::sin_pl(s.n, s.p)?,
            "heterogeneous_quadratic" => Problem::heterogeneous_quadratic(
                s.n,
                s.p,
                s.condition_number,
                s.sigma2,
                s.sigma0_tilde,
            )?,
            "linear_probe" => Problem::linear_probe(s.n, s.p, s.slope)?,
            "logistic_synth" => {
                Problem::logistic_synth(s.n, s.p, s.samples_per_agent, s.ridge, s.seed)?
            }
            other => unreachable!("kind {other:?} passed the config check"),
        };
        problem.with_noise(s.sigma0, s.sigma1)
    }

    /// Build the communication graph the config describes.
    pub fn build_graph(&self) -> Result<Graph> {
        match self.parse_topology()? {
            Some(kind) => build_topology(kind, self.problem.n, self.graph.weight),
            None => {
                let rows = self.graph.weights.as_ref().expect("checked in parse");
                let n = rows.len();
                if n != self.problem.n {
                    return Err(Error::Config(format!(
                        "graph.weights is {n}x{n}, problem.n is {}",
                        self.problem.n
                    )));
                }
                let mut weights = ndarray::Array2::<f64>::zeros((n, n));
                for (i, row) in rows.iter().enumerate() {
                    if row.len() != n {
                        return Err(Error::Config(format!(
                            "graph.weights row {i} has {} entries, expected {n}",
                            row.len()
                        )));
                    }
                    for (j, &w) in row.iter().enumerate() {
                        weights[[i, j]] = w;
                    }
                }
                Graph::from_weights(weights)
            }
        }
    }

    /// Build the gain schedule the config describes. Keys the file leaves
    /// unset keep the regime defaults; the speedup horizon falls back to
    /// `run.T`.
    pub fn build_schedule(&self) -> Result<Schedule> {
        let regime = self.parse_regime()?;
        let mut schedule = Schedule::defaults(regime);
        let s = &self.schedule;
        if let Some(v) = s.kappa0 {
            schedule.kappa0 = v;
        }
        if let Some(v) = s.kappa1 {
            schedule.kappa1 = v;
        }
        if let Some(v) = s.kappa2 {
            schedule.kappa2 = v;
        }
        if let Some(v) = s.kappa_eta {
            schedule.kappa_eta = v;
        }
        if let Some(v) = s.kappa_delta {
            schedule.kappa_delta = v;
        }
        if let Some(v) = s.theta {
            schedule.theta = v;
        }
        if let Some(v) = s.t1 {
            schedule.t1 = v;
        }
        if let Some(v) = s.gamma {
            schedule.gamma = v;
        }
        if let Some(v) = s.epsilon_tilde {
            schedule.epsilon_tilde = v;
        }
        if let Some(v) = s.delta_multiplier {
            schedule.delta_multiplier = v;
        }
        schedule.horizon = Some(s.t.unwrap_or(self.run.t));
        Ok(schedule)
    }
}

// =============================================================================
// tests
// =============================================================================

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [problem]
        kind = "quadratic_pl"
        n = 4
        p = 3
        condition_number = 10.0

        [graph]
        topology = "ring"

        [schedule]
        regime = "pd_diminishing"
        kappa2 = 0.005

        [run]
        T = 100
    "#;

    #[test]
    fn minimal_config_builds_all_three_components() {
        let config = Config::from_toml(MINIMAL).unwrap();
        let problem = config.build_problem().unwrap();
        assert_eq!(problem.n(), 4);
        assert_eq!(problem.p(), 3);
        assert_eq!(problem.sigma0(), 0.0);
        let graph = config.build_graph().unwrap();
        assert_eq!(graph.n(), 4);
        let schedule = config.build_schedule().unwrap();
        assert_eq!(schedule.regime, Regime::PdDiminishing);
        assert_eq!(schedule.kappa2, 0.005);
        // Untouched keys keep the regime defaults.
        assert_eq!(schedule.kappa1, 2.0);
        assert_eq!(schedule.theta, 0.6);
        // The horizon falls back to run.T.
        assert_eq!(schedule.horizon, Some(100));
        assert_eq!(config.run.record_every, 1);
        assert_eq!(config.run.seeds, 1);
        assert_eq!(config.run.x0, "gaussian");
        assert_eq!(config.output.dir, "out");
        assert_eq!(config.output.formats, vec!["csv", "json", "svg"]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("T = 100", "T = 100\n        iterations = 5");
        let err = Config::from_toml(&text).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("iterations"));
    }

    #[test]
    fn unknown_names_are_rejected_with_context() {
        let bad_kind = MINIMAL.replace("quadratic_pl", "cubic");
        assert!(Config::from_toml(&bad_kind)
            .unwrap_err()
            .to_string()
            .contains("cubic"));
        let bad_regime = MINIMAL.replace("pd_diminishing", "warp");
        assert!(Config::from_toml(&bad_regime)
            .unwrap_err()
            .to_string()
            .contains("warp"));
        let bad_topology = MINIMAL.replace("\"ring\"", "\"moebius\"");
        assert!(Config::from_toml(&bad_topology)
            .unwrap_err()
            .to_string()
            .contains("moebius"));
        let bad_x0 = MINIMAL.replace("T = 100", "T = 100\n        x0 = \"corner\"");
        assert!(Config::from_toml(&bad_x0)
            .unwrap_err()
            .to_string()
            .contains("corner"));
    }

    #[test]
    fn graph_agent_count_must_match_problem() {
        let text = MINIMAL.replace("topology = \"ring\"", "topology = \"ring\"\n        n = 5");
        let err = Config::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("graph.n"));
        let text = MINIMAL.replace("topology = \"ring\"", "topology = \"ring\"\n        n = 4");
        assert!(Config::from_toml(&text).is_ok());
    }

    #[test]
    fn random_graph_requires_edge_probability() {
        let text = MINIMAL.replace("\"ring\"", "\"erdos_renyi\"");
        let err = Config::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("er_prob"));
        let text = MINIMAL.replace(
            "topology = \"ring\"",
            "topology = \"erdos_renyi\"\n        er_prob = 0.8\n        seed = 3",
        );
        let config = Config::from_toml(&text).unwrap();
        assert!(config.build_graph().is_ok());
    }

    #[test]
    fn custom_graph_builds_from_a_weight_matrix() {
        // A 4-path with one doubled edge; the Laplacian spectrum must come
        // from these weights, not from any named topology.
        let text = MINIMAL.replace(
            "topology = \"ring\"",
            "topology = \"custom\"\n        weights = [[0.0, 2.0, 0.0, 0.0], \
             [2.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 1.0], [0.0, 0.0, 1.0, 0.0]]",
        );
        let config = Config::from_toml(&text).unwrap();
        let graph = config.build_graph().unwrap();
        assert_eq!(graph.n(), 4);
        assert!(graph.is_connected());
        let lap = graph.laplacian();
        assert_eq!(lap[[0, 0]], 2.0);
        assert_eq!(lap[[0, 1]], -2.0);
        assert_eq!(lap[[2, 2]], 2.0);
    }

    #[test]
    fn custom_graph_requires_a_square_matching_matrix() {
        let missing = MINIMAL.replace("\"ring\"", "\"custom\"");
        let err = Config::from_toml(&missing).unwrap_err();
        assert!(err.to_string().contains("weights"));

        let wrong_size = MINIMAL.replace(
            "topology = \"ring\"",
            "topology = \"custom\"\n        weights = [[0.0, 1.0], [1.0, 0.0]]",
        );
        let err = Config::from_toml(&wrong_size)
            .unwrap()
            .build_graph()
            .unwrap_err();
        assert!(err.to_string().contains("problem.n"));

        let ragged = MINIMAL.replace(
            "topology = \"ring\"",
            "topology = \"custom\"\n        weights = [[0.0, 1.0, 0.0, 0.0], \
             [1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0, 0.0]]",
        );
        let err = Config::from_toml(&ragged)
            .unwrap()
            .build_graph()
            .unwrap_err();
        assert!(err.to_string().contains("row 2"));
    }

    #[test]
    fn weight_matrix_is_rejected_outside_custom_topology() {
        let text = MINIMAL.replace(
            "topology = \"ring\"",
            "topology = \"ring\"\n        weights = [[0.0, 1.0], [1.0, 0.0]]",
        );
        let err = Config::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("only read with topology"));
    }

    #[test]
    fn noise_and_start_settings_flow_through() {
        let text = r#"
            [problem]
            kind = "heterogeneous_quadratic"
            n = 4
            p = 2
            condition_number = 5.0
            sigma2 = 1.5
            sigma0 = 0.2
            sigma1 = 0.7

            [graph]
            topology = "complete"
            weight = 2.0

            [schedule]
            regime = "primal_constant"
            kappa_eta = 0.001
            gamma = 0.02
            epsilon_tilde = 0.95

            [run]
            T = 50
            seeds = 3
            seed = 11
            record_every = 5
            workers = 2
            x0 = "zeros"

            [output]
            dir = "results"
            formats = ["csv", "json"]
        "#;
        let config = Config::from_toml(text).unwrap();
        let problem = config.build_problem().unwrap();
        assert_eq!(problem.sigma0(), 0.2);
        assert_eq!(problem.sigma1(), 0.7);
        assert_eq!(problem.sigma2(), 1.5);
        let schedule = config.build_schedule().unwrap();
        assert_eq!(schedule.kappa_eta, 0.001);
        assert_eq!(schedule.gamma, 0.02);
        assert_eq!(schedule.epsilon_tilde, 0.95);
        assert_eq!(config.output.dir, "results");
        assert_eq!(config.run.workers, 2);
        assert_eq!(config.run.x0, "zeros");
    }

    #[test]
    fn schedule_horizon_key_overrides_run_length() {
        let text = MINIMAL.replace(
            "regime = \"pd_diminishing\"",
            "regime = \"pd_speedup\"\n        T = 4000",
        );
        let config = Config::from_toml(&text).unwrap();
        let schedule = config.build_schedule().unwrap();
        assert_eq!(schedule.horizon, Some(4000));
        assert_eq!(config.run.t, 100);
    }

    #[test]
    fn zero_counts_are_rejected() {
        for (needle, replacement) in [
            ("T = 100", "T = 0"),
            ("T = 100", "T = 100\n        seeds = 0"),
            ("T = 100", "T = 100\n        workers = 0"),
        ] {
            let text = MINIMAL.replace(needle, replacement);
            assert!(Config::from_toml(&text).is_err(), "accepted: {replacement}");
        }
    }

    #[test]
    fn logistic_settings_flow_through() {
        let text = MINIMAL
            .replace("kind = \"quadratic_pl\"", "kind = \"logistic_synth\"")
            .replace(
                "condition_number = 10.0",
                "samples_per_agent = 8\n        ridge = 0.05\n        seed = 9",
            );
        let config = Config::from_toml(&text).unwrap();
        let problem = config.build_problem().unwrap();
        assert_eq!(problem.n(), 4);
        assert!(problem.f_star().is_some());
    }
}
