//! Experiment configuration: presets, the flat key=value config-file
//! format, CLI overrides, and the agent-list grammar.
//!
//! Precedence is `preset < config file < command line`: the experiment id
//! selects a preset encoding that benchmark's standard setup, the config
//! file overrides individual fields, and CLI flags override both.
//!
//! The agent list is a comma-separated sequence of tokens:
//!
//! | token                | agent                                            |
//! |----------------------|--------------------------------------------------|
//! | `vanilla-ts`         | exact conjugate sampler, matched to the prior     |
//! | `vanilla-ts:A/B`     | exact sampler with a fixed `Beta(A,B)` on each arm|
//! | `racing-ts`          | racing sampler at the configured `delta`/`sigma`  |
//! | `racing-ts:D/S`      | racing sampler at `δ=D`, `σ=S`                    |
//! | `smc-ts`             | SMC baseline (pool from `smc_particles`/schedule) |
//! | `smc-ts:N`           | SMC baseline with a pool of at least `N`          |
//! | `random`             | uniform-random control                            |

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::racing::RacingConfig;

use super::output::fmt_sig;

/// Master seed used when none is supplied.
pub const DEFAULT_SEED: u64 = 2_718_281_828;

/// The (δ, σ) values swept by the sensitivity experiment, per axis.
pub const SENSITIVITY_GRID: [f64; 4] = [0.1, 0.3, 0.5, 0.7];

/// Which experiment preset to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentId {
    /// 10 Bernoulli arms under an independent `Beta(5,5)` prior; a 4×4 grid
    /// of racing agents sweeps `(δ, σ)`.
    Sensitivity,
    /// 10 Bernoulli arms under independent `Beta(a_i, b_i)` priors with the
    /// hyperparameters drawn uniformly from (1, 10) per replication; exact
    /// conjugate sampling races against the racing sampler.
    Conjugate,
    /// 10 Bernoulli arms whose mean vector follows a Gaussian truncated to
    /// the unit box (componentwise mean 0.5, variance 1, independent).
    Nonconjugate,
    /// 10 Bernoulli arms whose mean vector follows a truncated Gaussian
    /// with rank-3 factor covariance `Σ_ij = u_i · u_j`, redrawn per
    /// replication.
    Dependent,
    /// A plain testbed: `k` Bernoulli arms under a uniform prior on the
    /// unit box.
    Custom,
}

impl ExperimentId {
    /// Lowercase identifier used in tables and file names.
    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Sensitivity => "sensitivity",
            ExperimentId::Conjugate => "conjugate",
            ExperimentId::Nonconjugate => "nonconjugate",
            ExperimentId::Dependent => "dependent",
            ExperimentId::Custom => "custom",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sensitivity" => Ok(ExperimentId::Sensitivity),
            "conjugate" => Ok(ExperimentId::Conjugate),
            "nonconjugate" => Ok(ExperimentId::Nonconjugate),
            "dependent" => Ok(ExperimentId::Dependent),
            "custom" => Ok(ExperimentId::Custom),
            other => Err(Error::Config(format!(
                "unknown experiment {other:?}; expected one of sensitivity, conjugate, \
                 nonconjugate, dependent, custom"
            ))),
        }
    }
}

/// Output table encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    /// Comma-separated values with the fixed header.
    Csv,
    /// JSON array of row objects.
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!(
                "unknown format {other:?}; expected csv or json"
            ))),
        }
    }
}

/// One configured agent.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentChoice {
    /// Exact conjugate sampler using the experiment's own Beta prior.
    VanillaMatched,
    /// Exact conjugate sampler with a fixed `Beta(a, b)` prior on every arm
    /// (deliberately mismatched unless it happens to equal the truth).
    VanillaBeta {
        /// First Beta hyperparameter.
        a: f64,
        /// Second Beta hyperparameter.
        b: f64,
    },
    /// Racing sampler with its stopping parameters.
    RacingTs {
        /// Error tolerance δ of each race.
        delta: f64,
        /// Slack σ added to the stopping threshold.
        sigma: f64,
    },
    /// SMC baseline; `particles` floors the pool size.
    SmcTs {
        /// Minimum particle pool, if given.
        particles: Option<usize>,
    },
    /// Uniform-random control.
    Random,
}

impl AgentChoice {
    /// Stable, CSV-safe column name.
    pub fn name(&self) -> String {
        match self {
            AgentChoice::VanillaMatched => "vanilla-ts".to_string(),
            AgentChoice::VanillaBeta { a, b } => {
                format!("vanilla-ts-beta{}-{}", fmt_sig(*a), fmt_sig(*b))
            }
            AgentChoice::RacingTs { delta, sigma } => {
                format!("racing-ts-d{}-s{}", fmt_sig(*delta), fmt_sig(*sigma))
            }
            AgentChoice::SmcTs { .. } => "smc-ts".to_string(),
            AgentChoice::Random => "random".to_string(),
        }
    }
}

fn parse_slash_pair(tok: &str, what: &str) -> Result<(f64, f64)> {
    let (x, y) = tok
        .split_once('/')
        .ok_or_else(|| Error::Config(format!("{what}: expected two values as X/Y, got {tok:?}")))?;
    let parse = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("{what}: {s:?} is not a number")))
    };
    Ok((parse(x)?, parse(y)?))
}

/// Parses the comma-separated agent list; plain `racing-ts` picks up the
/// supplied default `delta`/`sigma`.
pub fn parse_agent_list(list: &str, delta: f64, sigma: f64) -> Result<Vec<AgentChoice>> {
    let mut agents = Vec::new();
    for tok in list.split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            continue;
        }
        let (head, arg) = match tok.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a.trim())),
            None => (tok, None),
        };
        let agent = match (head, arg) {
            ("vanilla-ts", None) => AgentChoice::VanillaMatched,
            ("vanilla-ts", Some(arg)) => {
                let (a, b) = parse_slash_pair(arg, "vanilla-ts prior")?;
                AgentChoice::VanillaBeta { a, b }
            }
            ("racing-ts", None) => AgentChoice::RacingTs { delta, sigma },
            ("racing-ts", Some(arg)) => {
                let (d, s) = parse_slash_pair(arg, "racing-ts parameters")?;
                AgentChoice::RacingTs { delta: d, sigma: s }
            }
            ("smc-ts", None) => AgentChoice::SmcTs { particles: None },
            ("smc-ts", Some(arg)) => {
                let n = arg.parse::<usize>().map_err(|_| {
                    Error::Config(format!("smc-ts pool: {arg:?} is not a positive integer"))
                })?;
                AgentChoice::SmcTs { particles: Some(n) }
            }
            ("random", None) => AgentChoice::Random,
            _ => {
                return Err(Error::Config(format!(
                    "unknown agent token {tok:?}; expected vanilla-ts[:A/B], racing-ts[:D/S], \
                     smc-ts[:N], or random"
                )))
            }
        };
        agents.push(agent);
    }
    if agents.is_empty() {
        return Err(Error::Config("agent list is empty".into()));
    }
    Ok(agents)
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Which experiment to run.
    pub experiment: ExperimentId,
    /// Master seed; replication r uses `seed ^ r`.
    pub seed: u64,
    /// Number of arms.
    pub k: usize,
    /// Number of independent replications.
    pub replications: usize,
    /// Steps per replication.
    pub horizon: usize,
    /// Default racing error tolerance for plain `racing-ts` tokens.
    pub delta: f64,
    /// Default racing slack for plain `racing-ts` tokens.
    pub sigma: f64,
    /// Racing stopping-check cadence (draws between checks).
    pub batch_size: usize,
    /// Hard per-race sample cap.
    pub absolute_cap: u64,
    /// SMC pool size when no racing schedule fixes it.
    pub smc_particles: usize,
    /// Agents to run, in output order.
    pub agents: Vec<AgentChoice>,
    /// Table encoding.
    pub format: OutputFormat,
    /// Output path; `None` prints the table to stdout.
    pub out: Option<PathBuf>,
}

fn default_agents(id: ExperimentId, delta: f64, sigma: f64) -> Vec<AgentChoice> {
    match id {
        ExperimentId::Sensitivity => {
            let mut agents = Vec::with_capacity(16);
            for &d in &SENSITIVITY_GRID {
                for &s in &SENSITIVITY_GRID {
                    agents.push(AgentChoice::RacingTs { delta: d, sigma: s });
                }
            }
            agents
        }
        ExperimentId::Conjugate => vec![
            AgentChoice::VanillaMatched,
            AgentChoice::RacingTs { delta, sigma },
        ],
        ExperimentId::Nonconjugate | ExperimentId::Dependent => vec![
            AgentChoice::VanillaBeta { a: 50.0, b: 50.0 },
            AgentChoice::RacingTs { delta, sigma },
            AgentChoice::SmcTs { particles: None },
        ],
        ExperimentId::Custom => vec![AgentChoice::RacingTs { delta, sigma }],
    }
}

impl ExperimentConfig {
    /// The standard setup for `id`: arm count, horizon, replication count,
    /// and agent roster.
    pub fn preset(id: ExperimentId) -> Self {
        let replications = match id {
            ExperimentId::Sensitivity | ExperimentId::Custom => 10,
            ExperimentId::Conjugate => 100,
            ExperimentId::Nonconjugate | ExperimentId::Dependent => 50,
        };
        ExperimentConfig {
            experiment: id,
            seed: DEFAULT_SEED,
            k: 10,
            replications,
            horizon: 1000,
            delta: 0.1,
            sigma: 0.1,
            batch_size: 1,
            absolute_cap: 1_000_000,
            smc_particles: 1000,
            agents: default_agents(id, 0.1, 0.1),
            format: OutputFormat::Csv,
            out: None,
        }
    }

    /// Merges `preset(experiment) < file < cli` and validates the result.
    pub fn resolve(file: Option<&Overrides>, cli: &Overrides) -> Result<ExperimentConfig> {
        let experiment = cli
            .experiment
            .or(file.and_then(|f| f.experiment))
            .ok_or_else(|| {
                Error::Config(
                    "no experiment selected; pass --experiment or set `experiment` in the \
                     config file"
                        .into(),
                )
            })?;
        let mut cfg = ExperimentConfig::preset(experiment);
        let mut agents_list: Option<&str> = None;
        for src in [file, Some(cli)].into_iter().flatten() {
            if let Some(v) = src.seed {
                cfg.seed = v;
            }
            if let Some(v) = src.k {
                cfg.k = v;
            }
            if let Some(v) = src.replications {
                cfg.replications = v;
            }
            if let Some(v) = src.horizon {
                cfg.horizon = v;
            }
            if let Some(v) = src.delta {
                cfg.delta = v;
            }
            if let Some(v) = src.sigma {
                cfg.sigma = v;
            }
            if let Some(v) = src.batch_size {
                cfg.batch_size = v;
            }
            if let Some(v) = src.absolute_cap {
                cfg.absolute_cap = v;
            }
            if let Some(v) = src.smc_particles {
                cfg.smc_particles = v;
            }
            if let Some(v) = &src.agents {
                agents_list = Some(v);
            }
            if let Some(v) = src.format {
                cfg.format = v;
            }
            if let Some(v) = &src.out {
                cfg.out = Some(v.clone());
            }
        }
        cfg.agents = match agents_list {
            Some(list) => parse_agent_list(list, cfg.delta, cfg.sigma)?,
            None => default_agents(experiment, cfg.delta, cfg.sigma),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every field combination the runner relies on.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.absolute_cap == 0 {
            return Err(Error::Config("absolute_cap must be at least 1".into()));
        }
        if self.smc_particles == 0 {
            return Err(Error::Config("smc_particles must be at least 1".into()));
        }
        if self.agents.is_empty() {
            return Err(Error::Config("agent list is empty".into()));
        }
        let mut names: Vec<String> = self.agents.iter().map(AgentChoice::name).collect();
        names.sort();
        for pair in names.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::Config(format!(
                    "duplicate agent {:?}: table rows would be indistinguishable",
                    pair[0]
                )));
            }
        }
        for agent in &self.agents {
            match agent {
                AgentChoice::RacingTs { delta, sigma } => {
                    RacingConfig::new(*delta, *sigma)
                        .map_err(|e| Error::Config(format!("racing-ts: {e}")))?;
                }
                AgentChoice::VanillaBeta { a, b } => {
                    if !(a.is_finite() && b.is_finite() && *a > 0.0 && *b > 0.0) {
                        return Err(Error::Config(format!(
                            "vanilla-ts prior Beta({a}, {b}) must have positive finite \
                             hyperparameters"
                        )));
                    }
                }
                AgentChoice::VanillaMatched => {
                    if matches!(
                        self.experiment,
                        ExperimentId::Nonconjugate | ExperimentId::Dependent
                    ) {
                        return Err(Error::Config(
                            "vanilla-ts without an explicit prior needs a conjugate \
                             experiment prior; use vanilla-ts:A/B here"
                                .into(),
                        ));
                    }
                }
                AgentChoice::SmcTs { .. } | AgentChoice::Random => {}
            }
        }
        Ok(())
    }
}

/// Partial configuration from one source (config file or CLI).
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    /// Experiment id, if given.
    pub experiment: Option<ExperimentId>,
    /// Master seed.
    pub seed: Option<u64>,
    /// Arm count.
    pub k: Option<usize>,
    /// Replication count.
    pub replications: Option<usize>,
    /// Steps per replication.
    pub horizon: Option<usize>,
    /// Default racing δ.
    pub delta: Option<f64>,
    /// Default racing σ.
    pub sigma: Option<f64>,
    /// Racing check cadence.
    pub batch_size: Option<usize>,
    /// Per-race hard cap.
    pub absolute_cap: Option<u64>,
    /// Default SMC pool.
    pub smc_particles: Option<usize>,
    /// Agent list, unparsed (resolved against the final δ/σ).
    pub agents: Option<String>,
    /// Output format.
    pub format: Option<OutputFormat>,
    /// Output path.
    pub out: Option<PathBuf>,
}

impl Overrides {
    /// Parses a flat `key = value` file: one pair per line, `#` starts a
    /// comment, blank lines are skipped, later keys override earlier ones.
    pub fn from_file(path: &Path) -> Result<Overrides> {
        let text = std::fs::read_to_string(path)?;
        let mut o = Overrides::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "{}: line {line_no}: expected key = value, got {raw:?}",
                    path.display()
                ))
            })?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim();
            let ctx = |what: &str| {
                Error::Config(format!(
                    "{}: line {line_no}: {what}: {value:?}",
                    path.display()
                ))
            };
            match key.as_str() {
                "experiment" => o.experiment = Some(value.parse()?),
                "seed" => o.seed = Some(value.parse().map_err(|_| ctx("bad u64"))?),
                "k" => o.k = Some(value.parse().map_err(|_| ctx("bad integer"))?),
                "replications" => {
                    o.replications = Some(value.parse().map_err(|_| ctx("bad integer"))?)
                }
                "horizon" => o.horizon = Some(value.parse().map_err(|_| ctx("bad integer"))?),
                "delta" => o.delta = Some(value.parse().map_err(|_| ctx("bad number"))?),
                "sigma" => o.sigma = Some(value.parse().map_err(|_| ctx("bad number"))?),
                "batch_size" => o.batch_size = Some(value.parse().map_err(|_| ctx("bad integer"))?),
                "absolute_cap" => {
                    o.absolute_cap = Some(value.parse().map_err(|_| ctx("bad integer"))?)
                }
                "smc_particles" => {
                    o.smc_particles = Some(value.parse().map_err(|_| ctx("bad integer"))?)
                }
                "agents" => o.agents = Some(value.to_string()),
                "format" => o.format = Some(value.parse()?),
                "out" => o.out = Some(PathBuf::from(value)),
                other => {
                    return Err(Error::Config(format!(
                        "{}: line {line_no}: unknown key {other:?}",
                        path.display()
                    )))
                }
            }
        }
        Ok(o)
    }
}
