//! Experiment execution: builds the per-replication prior and instance,
//! runs every configured agent over the horizon, and collects the result
//! table plus its metadata.
//!
//! Randomness layout: replication `r` derives its seed as `master ^ r`;
//! within a replication, stream 0 of the seeded generator drives the prior
//! draws and the instance, and agent `i` owns stream `i + 1`. Agents never
//! share generators, so every agent faces the same instance and the table
//! is a pure function of the configuration.
//!
//! Rows are ordered by agent (config order), then replication, then step.
//! Replications run concurrently; the reduction is keyed by replication
//! index, so concurrency cannot reorder the output.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::agents::{Agent, RacingTs, RandomAgent, SmcTs, VanillaTs};
use crate::distributions::{FamilyKind, PriorSpec};
use crate::env::{draw_instance, BanditInstance};
use crate::error::{Error, Result};
use crate::racing::RacingConfig;

use super::config::{AgentChoice, ExperimentConfig, ExperimentId};

/// Eigenvalue floor applied when a dependent-prior covariance is projected
/// to the positive-definite cone. The factor covariance `S = U Uᵀ` has rank
/// 3, so a floor is required for a density to exist at all; this value
/// keeps the floored directions' precision moderate so that prior density
/// ratios stay numerically meaningful, while leaving the dominant factor
/// eigenvalues (around 3.3) untouched. The projection distance is recorded
/// in the run metadata.
pub const PD_EIGENVALUE_FLOOR: f64 = 1e-2;

/// One table row: one step of one agent in one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRow {
    /// Agent index into [`RunResult::agent_names`].
    pub agent: usize,
    /// Replication index.
    pub replication: usize,
    /// Step index within the replication.
    pub step: usize,
    /// Arm pulled.
    pub arm: usize,
    /// Observed reward.
    pub reward: f64,
    /// Cumulative expected regret after this step.
    pub cum_regret: f64,
    /// Posterior samples consumed by the race behind this decision;
    /// `None` for warm-up pulls and non-racing agents.
    pub samples_used: Option<u64>,
}

/// Record of one covariance projection onto the PD cone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdProjection {
    /// Replication whose covariance was projected.
    pub replication: usize,
    /// Frobenius distance between the raw and projected covariance.
    pub frobenius_distance: f64,
}

/// Reproducibility sidecar: everything needed to regenerate the table,
/// and nothing volatile (no timestamps, no paths).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    /// Experiment name.
    pub experiment: String,
    /// Crate version that produced the table.
    pub version: String,
    /// Master seed.
    pub seed: u64,
    /// Arm count.
    pub k: usize,
    /// Replication count.
    pub replications: usize,
    /// Steps per replication.
    pub horizon: usize,
    /// Racing stopping-check cadence.
    pub batch_size: usize,
    /// Hard per-race sample cap.
    pub absolute_cap: u64,
    /// Default SMC pool size.
    pub smc_particles: usize,
    /// Agent names in table order.
    pub agents: Vec<String>,
    /// Human-readable description of the prior, including any defaults the
    /// experiment definition leaves open.
    pub prior: String,
    /// Output format requested ("csv" or "json").
    pub format: String,
    /// PD projections applied to dependent-prior covariances.
    pub pd_projection: Vec<PdProjection>,
}

impl RunMetadata {
    #[cfg(test)]
    pub(crate) fn for_tests(experiment: &str) -> Self {
        RunMetadata {
            experiment: experiment.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: 0,
            k: 2,
            replications: 1,
            horizon: 2,
            batch_size: 1,
            absolute_cap: 1_000_000,
            smc_particles: 1000,
            agents: vec![],
            prior: String::new(),
            format: "csv".to_string(),
            pd_projection: vec![],
        }
    }
}

/// Full result of a run: the table plus its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Experiment name, repeated in every row.
    pub experiment: String,
    /// Agent names in table order.
    pub agent_names: Vec<String>,
    /// All rows, ordered by agent, then replication, then step.
    pub rows: Vec<StepRow>,
    /// Reproducibility sidecar.
    pub metadata: RunMetadata,
}

fn prior_description(id: ExperimentId) -> String {
    match id {
        ExperimentId::Sensitivity => {
            "independent Beta(5,5) on each arm mean".to_string()
        }
        ExperimentId::Conjugate => {
            "independent Beta(a_i,b_i) on each arm mean, a_i and b_i drawn uniformly from \
             (1,10) per replication"
                .to_string()
        }
        ExperimentId::Nonconjugate => {
            "Gaussian truncated to the unit box; componentwise mean 0.5 and variance 1.0 \
             (defaults, independent coordinates)"
                .to_string()
        }
        ExperimentId::Dependent => format!(
            "Gaussian truncated to the unit box; mean 0.5, covariance S_ij = u_i . u_j with \
             unit rows u_i in R^3 redrawn per replication, eigenvalues floored at {PD_EIGENVALUE_FLOOR:e} \
             (Frobenius projection distances recorded)"
        ),
        ExperimentId::Custom => "uniform on the unit box".to_string(),
    }
}

/// The per-replication environment: the prior, the Beta hyperparameters
/// when the prior is a product of Betas (for the matched vanilla agent),
/// and the PD-projection distance when one was applied.
struct RepEnvironment {
    prior: Arc<PriorSpec>,
    matched_hyper: Option<Vec<(f64, f64)>>,
    pd_distance: Option<f64>,
}

fn unit_rows<R: Rng + ?Sized>(k: usize, d: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..k)
        .map(|_| loop {
            let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                return v.into_iter().map(|x| x / norm).collect();
            }
        })
        .collect()
}

/// Projects the factor covariance `S = U Uᵀ` onto the PD cone by flooring
/// its eigenvalues, returning the row-major matrix and the Frobenius
/// distance moved.
fn dependent_covariance(rows: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let k = rows.len();
    let raw = DMatrix::from_fn(k, k, |i, j| {
        rows[i]
            .iter()
            .zip(&rows[j])
            .map(|(a, b)| a * b)
            .sum::<f64>()
    });
    let eigen = raw.clone().symmetric_eigen();
    let clipped: DVector<f64> = eigen.eigenvalues.map(|l| l.max(PD_EIGENVALUE_FLOOR));
    let distance = eigen
        .eigenvalues
        .iter()
        .zip(clipped.iter())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let rebuilt =
        &eigen.eigenvectors * DMatrix::from_diagonal(&clipped) * eigen.eigenvectors.transpose();
    // The eigendecomposition round trip leaves ~1e-16 asymmetry; symmetrize
    // exactly so downstream validation sees a symmetric matrix.
    let mut cov = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            cov[i * k + j] = 0.5 * (rebuilt[(i, j)] + rebuilt[(j, i)]);
        }
    }
    (cov, distance)
}

fn build_environment<R: Rng + ?Sized>(
    config: &ExperimentConfig,
    rng: &mut R,
) -> Result<RepEnvironment> {
    let k = config.k;
    match config.experiment {
        ExperimentId::Sensitivity => {
            let hyper = vec![(5.0, 5.0); k];
            let prior = PriorSpec::independent_beta(&hyper)?;
            Ok(RepEnvironment {
                prior: Arc::new(prior),
                matched_hyper: Some(hyper),
                pd_distance: None,
            })
        }
        ExperimentId::Conjugate => {
            let hyper: Vec<(f64, f64)> = (0..k)
                .map(|_| {
                    let a = rng.random_range(1.0..10.0);
                    let b = rng.random_range(1.0..10.0);
                    (a, b)
                })
                .collect();
            let prior = PriorSpec::independent_beta(&hyper)?;
            Ok(RepEnvironment {
                prior: Arc::new(prior),
                matched_hyper: Some(hyper),
                pd_distance: None,
            })
        }
        ExperimentId::Nonconjugate => {
            let mean = vec![0.5; k];
            let mut cov = vec![0.0; k * k];
            for i in 0..k {
                cov[i * k + i] = 1.0;
            }
            let bounds = vec![(0.0, 1.0); k];
            let prior = PriorSpec::truncated_gaussian(&mean, &cov, &bounds)?;
            Ok(RepEnvironment {
                prior: Arc::new(prior),
                matched_hyper: None,
                pd_distance: None,
            })
        }
        ExperimentId::Dependent => {
            let rows = unit_rows(k, 3, rng);
            let (cov, distance) = dependent_covariance(&rows);
            let mean = vec![0.5; k];
            let bounds = vec![(0.0, 1.0); k];
            let prior = PriorSpec::truncated_gaussian(&mean, &cov, &bounds)?;
            Ok(RepEnvironment {
                prior: Arc::new(prior),
                matched_hyper: None,
                pd_distance: Some(distance),
            })
        }
        ExperimentId::Custom => {
            let prior = PriorSpec::uniform_box(&vec![(0.0, 1.0); k])?;
            Ok(RepEnvironment {
                prior: Arc::new(prior),
                matched_hyper: Some(vec![(1.0, 1.0); k]),
                pd_distance: None,
            })
        }
    }
}

fn build_agent(
    choice: &AgentChoice,
    env: &RepEnvironment,
    config: &ExperimentConfig,
    schedule: Option<Vec<u64>>,
    rng: &mut ChaCha8Rng,
) -> Result<Agent> {
    let k = config.k;
    match choice {
        AgentChoice::VanillaMatched => {
            let hyper = env.matched_hyper.clone().ok_or_else(|| {
                Error::Config(
                    "vanilla-ts without an explicit prior needs a Beta-prior experiment".into(),
                )
            })?;
            Ok(Agent::Vanilla(VanillaTs::new(hyper)?))
        }
        AgentChoice::VanillaBeta { a, b } => Ok(Agent::Vanilla(VanillaTs::new(vec![(*a, *b); k])?)),
        AgentChoice::RacingTs { delta, sigma } => {
            let rc = RacingConfig::new(*delta, *sigma)?
                .with_batch_size(config.batch_size)?
                .with_absolute_cap(config.absolute_cap)?;
            Ok(Agent::Racing(RacingTs::new(
                env.prior.clone(),
                FamilyKind::Bernoulli,
                rc,
            )?))
        }
        AgentChoice::SmcTs { particles } => {
            let pool = match &schedule {
                Some(_) => particles.unwrap_or(0),
                None => particles.unwrap_or(config.smc_particles),
            };
            Ok(Agent::Smc(SmcTs::new(
                &env.prior,
                FamilyKind::Bernoulli,
                pool,
                schedule,
                rng,
            )?))
        }
        AgentChoice::Random => Ok(Agent::Random(RandomAgent::new(k)?)),
    }
}

fn agent_rng(rep_seed: u64, agent_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
    rng.set_stream(agent_index as u64 + 1);
    rng
}

fn run_agent(
    mut agent: Agent,
    agent_index: usize,
    replication: usize,
    instance: &BanditInstance,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<StepRow>> {
    let mut rows = Vec::with_capacity(horizon);
    let mut cum_regret = 0.0;
    for step in 0..horizon {
        let selection = agent.select_arm(rng)?;
        let arm = selection.arm;
        let reward = instance.pull(arm, rng)?;
        agent.observe(arm, reward)?;
        cum_regret += instance.regret_of(arm);
        rows.push(StepRow {
            agent: agent_index,
            replication,
            step,
            arm,
            reward,
            cum_regret,
            samples_used: selection.racing.map(|o| o.samples_used),
        });
    }
    Ok(rows)
}

struct RepOutput {
    per_agent_rows: Vec<Vec<StepRow>>,
    pd_distance: Option<f64>,
}

fn run_replication(config: &ExperimentConfig, replication: usize) -> Result<RepOutput> {
    let rep_seed = config.seed ^ (replication as u64);
    let mut env_rng = ChaCha8Rng::seed_from_u64(rep_seed);
    env_rng.set_stream(0);
    let env = build_environment(config, &mut env_rng)?;
    let instance = draw_instance(&env.prior, FamilyKind::Bernoulli, &mut env_rng)?;

    let mut per_agent_rows: Vec<Vec<StepRow>> = vec![Vec::new(); config.agents.len()];
    let mut schedule: Option<Vec<u64>> = None;

    // Non-SMC agents first: the first racing agent's per-decision sample
    // counts become the schedule the SMC baseline must honor.
    for (i, choice) in config.agents.iter().enumerate() {
        if matches!(choice, AgentChoice::SmcTs { .. }) {
            continue;
        }
        let mut rng = agent_rng(rep_seed, i);
        let agent = build_agent(choice, &env, config, None, &mut rng)?;
        let rows = run_agent(agent, i, replication, &instance, config.horizon, &mut rng)?;
        if schedule.is_none() && matches!(choice, AgentChoice::RacingTs { .. }) {
            let s: Vec<u64> = rows.iter().filter_map(|row| row.samples_used).collect();
            if !s.is_empty() {
                schedule = Some(s);
            }
        }
        per_agent_rows[i] = rows;
    }
    for (i, choice) in config.agents.iter().enumerate() {
        if !matches!(choice, AgentChoice::SmcTs { .. }) {
            continue;
        }
        let mut rng = agent_rng(rep_seed, i);
        let agent = build_agent(choice, &env, config, schedule.clone(), &mut rng)?;
        per_agent_rows[i] = run_agent(agent, i, replication, &instance, config.horizon, &mut rng)?;
    }

    Ok(RepOutput {
        per_agent_rows,
        pd_distance: env.pd_distance,
    })
}

/// Runs the full experiment: every replication (concurrently), every agent,
/// every step. The result is a pure function of `config`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunResult> {
    config.validate()?;
    let agent_names: Vec<String> = config.agents.iter().map(|a| a.name()).collect();

    let reps: Vec<RepOutput> = (0..config.replications)
        .into_par_iter()
        .map(|r| run_replication(config, r))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for agent in 0..config.agents.len() {
        for rep in &reps {
            rows.extend_from_slice(&rep.per_agent_rows[agent]);
        }
    }
    let pd_projection: Vec<PdProjection> = reps
        .iter()
        .enumerate()
        .filter_map(|(r, rep)| {
            rep.pd_distance.map(|d| PdProjection {
                replication: r,
                frobenius_distance: d,
            })
        })
        .collect();

    let metadata = RunMetadata {
        experiment: config.experiment.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        k: config.k,
        replications: config.replications,
        horizon: config.horizon,
        batch_size: config.batch_size,
        absolute_cap: config.absolute_cap,
        smc_particles: config.smc_particles,
        agents: agent_names.clone(),
        prior: prior_description(config.experiment),
        format: match config.format {
            super::config::OutputFormat::Csv => "csv",
            super::config::OutputFormat::Json => "json",
        }
        .to_string(),
        pd_projection,
    };

    Ok(RunResult {
        experiment: config.experiment.name().to_string(),
        agent_names,
        rows,
        metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Overrides;
    use crate::harness::output::to_csv;

    fn resolve(experiment: ExperimentId, cli: Overrides) -> ExperimentConfig {
        let cli = Overrides {
            experiment: Some(experiment),
            ..cli
        };
        ExperimentConfig::resolve(None, &cli).unwrap()
    }

    fn small(
        experiment: ExperimentId,
        agents: &str,
        k: usize,
        t: usize,
        r: usize,
    ) -> ExperimentConfig {
        resolve(
            experiment,
            Overrides {
                agents: Some(agents.to_string()),
                k: Some(k),
                horizon: Some(t),
                replications: Some(r),
                ..Overrides::default()
            },
        )
    }

    #[test]
    fn reruns_are_identical() {
        let cfg = small(ExperimentId::Custom, "racing-ts,random", 3, 25, 2);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(to_csv(&a), to_csv(&b));
    }

    #[test]
    fn rows_are_ordered_and_complete() {
        let (k, t, r) = (3, 10, 2);
        let cfg = small(ExperimentId::Custom, "racing-ts,random", k, t, r);
        let res = run_experiment(&cfg).unwrap();
        assert_eq!(res.rows.len(), 2 * r * t);
        let mut idx = 0;
        for agent in 0..2 {
            for rep in 0..r {
                for step in 0..t {
                    let row = &res.rows[idx];
                    assert_eq!((row.agent, row.replication, row.step), (agent, rep, step));
                    idx += 1;
                }
            }
        }
    }

    #[test]
    fn samples_used_marks_exactly_post_warm_racing_rows() {
        let (k, t) = (3, 12);
        let cfg = small(ExperimentId::Custom, "racing-ts,random", k, t, 1);
        let res = run_experiment(&cfg).unwrap();
        for row in &res.rows {
            let racing = row.agent == 0;
            let warm = row.step < k;
            assert_eq!(
                row.samples_used.is_some(),
                racing && !warm,
                "agent {} step {}",
                row.agent,
                row.step
            );
            if let Some(n) = row.samples_used {
                assert!(n >= 1);
            }
        }
    }

    #[test]
    fn regret_is_nondecreasing_within_each_replication() {
        let cfg = small(ExperimentId::Custom, "racing-ts,random", 4, 30, 2);
        let res = run_experiment(&cfg).unwrap();
        let mut last: Option<(usize, usize, f64)> = None;
        for row in &res.rows {
            if let Some((agent, rep, regret)) = last {
                if agent == row.agent && rep == row.replication {
                    assert!(row.cum_regret >= regret - 1e-12);
                }
            }
            last = Some((row.agent, row.replication, row.cum_regret));
        }
    }

    #[test]
    fn zero_replications_produce_an_empty_table() {
        let cfg = small(ExperimentId::Conjugate, "vanilla-ts,racing-ts", 10, 100, 0);
        let res = run_experiment(&cfg).unwrap();
        assert!(res.rows.is_empty());
        assert_eq!(
            to_csv(&res),
            "experiment,agent,replication,step,arm,reward,cum_regret,samples_used\n"
        );
    }

    #[test]
    fn conjugate_smoke_runs_matched_vanilla() {
        let cfg = small(ExperimentId::Conjugate, "vanilla-ts,racing-ts", 4, 12, 1);
        let res = run_experiment(&cfg).unwrap();
        assert_eq!(res.agent_names[0], "vanilla-ts");
        assert_eq!(res.rows.len(), 2 * 12);
        assert!(res.metadata.pd_projection.is_empty());
    }

    #[test]
    fn nonconjugate_smoke_runs_all_three_agents() {
        let cfg = small(
            ExperimentId::Nonconjugate,
            "vanilla-ts:50/50,racing-ts,smc-ts",
            4,
            12,
            1,
        );
        let res = run_experiment(&cfg).unwrap();
        assert_eq!(res.agent_names[0], "vanilla-ts-beta50-50");
        assert_eq!(res.rows.len(), 3 * 12);
        // SMC rows never report samples.
        for row in res.rows.iter().filter(|r| r.agent == 2) {
            assert!(row.samples_used.is_none());
        }
    }

    #[test]
    fn dependent_records_the_projection_distance() {
        let cfg = small(ExperimentId::Dependent, "racing-ts,smc-ts", 6, 8, 1);
        let res = run_experiment(&cfg).unwrap();
        assert_eq!(res.metadata.pd_projection.len(), 1);
        let d = res.metadata.pd_projection[0].frobenius_distance;
        // Rank-3 covariance on 6 arms: three eigenvalues floored from ~0
        // to 1e-6, so the distance is close to sqrt(3)*1e-6.
        let expect = 3f64.sqrt() * PD_EIGENVALUE_FLOOR;
        assert!(
            (d - expect).abs() < 0.5 * expect,
            "distance {d} vs expected {expect}"
        );
    }

    #[test]
    fn dependent_covariance_projection_is_exact_on_known_input() {
        // Two identical unit rows: S = [[1,1],[1,1]], eigenvalues {2, 0}.
        let rows = vec![vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]];
        let (cov, distance) = dependent_covariance(&rows);
        assert!((distance - PD_EIGENVALUE_FLOOR).abs() < 1e-12);
        // The floored matrix is [[1+e/2, 1-e/2], [1-e/2, 1+e/2]] with
        // e = 1e-6: eigenvector (1,1)/sqrt(2) keeps eigenvalue 2,
        // eigenvector (1,-1)/sqrt(2) moves from 0 to e.
        let e = PD_EIGENVALUE_FLOOR;
        assert!((cov[0] - (1.0 + e / 2.0)).abs() < 1e-12);
        assert!((cov[1] - (1.0 - e / 2.0)).abs() < 1e-12);
        assert_eq!(cov[1], cov[2]);
    }

    #[test]
    fn sensitivity_grid_runs_at_toy_scale() {
        let cfg = resolve(
            ExperimentId::Sensitivity,
            Overrides {
                k: Some(3),
                horizon: Some(8),
                replications: Some(1),
                ..Overrides::default()
            },
        );
        let res = run_experiment(&cfg).unwrap();
        assert_eq!(res.agent_names.len(), 16);
        assert_eq!(res.rows.len(), 16 * 8);
    }

    #[test]
    fn agents_face_the_same_instance() {
        // Two vanilla agents with different priors still pull the same
        // best arm eventually; here we check the instance itself is shared
        // by verifying both agents' regret-per-arm bookkeeping agrees: a
        // pull of the same arm adds the same regret for both agents.
        let cfg = small(ExperimentId::Custom, "vanilla-ts,vanilla-ts:2/2", 3, 40, 1);
        let res = run_experiment(&cfg).unwrap();
        use std::collections::HashMap;
        let mut regret_step: HashMap<(usize, usize), f64> = HashMap::new();
        let mut prev = [0.0; 2];
        for row in &res.rows {
            let inc = row.cum_regret - prev[row.agent];
            prev[row.agent] = row.cum_regret;
            let key = (row.agent, row.arm);
            regret_step.insert(key, inc);
        }
        for arm in 0..3 {
            if let (Some(a), Some(b)) = (regret_step.get(&(0, arm)), regret_step.get(&(1, arm))) {
                assert!((a - b).abs() < 1e-12, "arm {arm}: {a} vs {b}");
            }
        }
    }
}
