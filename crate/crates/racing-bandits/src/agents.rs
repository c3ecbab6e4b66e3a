//! Bandit policies.
//!
//! Four agents share one interface:
//!
//! * [`VanillaTs`] — exact Thompson sampling for Bernoulli arms under
//!   independent Beta priors, the conjugate case where posterior sampling
//!   is closed-form.
//! * [`RacingTs`] — Thompson sampling for an *arbitrary* prior over the
//!   arm parameters: each decision runs a [`race`]
//!   that identifies the arm a fresh exact posterior sample would pick.
//! * [`SmcTs`] — a sequential-Monte-Carlo baseline that carries a fixed
//!   particle population reweighted by each observation, optionally
//!   restricted per step to a prefix of the population so its per-decision
//!   sample budget can mirror a recorded racing schedule.
//! * [`RandomAgent`] — uniform-random control.
//!
//! Every agent warms up by pulling each arm once in index order before its
//! policy takes over. This keeps the comparison fair and guarantees the
//! racing agent's proposal posteriors are proper by the first race.
//!
//! [`Agent::select_arm`] takes `&self`: selecting must not mutate the agent,
//! so repeated calls with identically-seeded generators return identical
//! decisions. All learning happens in [`Agent::observe`].

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::distributions::{FamilyKind, PosteriorState, PriorSpec};
use crate::error::{Error, Result};
use crate::gumbel::GumbelNoise;
use crate::racing::{race, RacingConfig, RacingOutcome};
use crate::smc::ParticleSet;

/// One decision: the pulled arm, plus the race record when the decision was
/// produced by the racing sampler (absent for warm-up pulls and for all
/// other agents).
#[derive(Debug, Clone)]
pub struct Selection {
    /// Index of the arm to pull.
    pub arm: usize,
    /// Full racing outcome when a race produced this decision.
    pub racing: Option<RacingOutcome>,
}

impl Selection {
    fn plain(arm: usize) -> Self {
        Selection { arm, racing: None }
    }
}

/// Round-robin warm-up: with `obs` total observations so far and `k` arms,
/// returns the forced arm while some arm is still unobserved.
fn warm_arm(obs: usize, k: usize) -> Option<usize> {
    if obs < k {
        Some(obs)
    } else {
        None
    }
}

/// Argmax with ties broken toward the lowest index.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn check_arm(arm: usize, k: usize) -> Result<()> {
    if arm >= k {
        return Err(Error::DimensionMismatch {
            context: "agent observation arm",
            expected: k,
            got: arm,
        });
    }
    Ok(())
}

/// Exact Thompson sampling for Bernoulli rewards under independent
/// `Beta(a_i, b_i)` priors: each decision samples one mean per arm from its
/// Beta posterior and pulls the argmax.
#[derive(Debug, Clone)]
pub struct VanillaTs {
    /// Per-arm prior hyperparameters `(a, b)`.
    hyper: Vec<(f64, f64)>,
    /// Per-arm observed `(successes, failures)`.
    counts: Vec<(f64, f64)>,
    obs: usize,
}

impl VanillaTs {
    /// Creates the agent from per-arm Beta hyperparameters.
    pub fn new(hyper: Vec<(f64, f64)>) -> Result<Self> {
        if hyper.is_empty() {
            return Err(Error::InvalidParameter(
                "vanilla agent needs at least one arm".into(),
            ));
        }
        for &(a, b) in &hyper {
            if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "Beta hyperparameters must be positive and finite, got ({a}, {b})"
                )));
            }
        }
        let k = hyper.len();
        Ok(VanillaTs {
            hyper,
            counts: vec![(0.0, 0.0); k],
            obs: 0,
        })
    }

    /// Number of arms.
    pub fn k(&self) -> usize {
        self.hyper.len()
    }

    fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Selection> {
        if let Some(arm) = warm_arm(self.obs, self.k()) {
            return Ok(Selection::plain(arm));
        }
        let mut draws = Vec::with_capacity(self.k());
        for (&(a, b), &(s, f)) in self.hyper.iter().zip(&self.counts) {
            let beta = Beta::new(a + s, b + f)
                .map_err(|e| Error::InvalidParameter(format!("Beta posterior: {e}")))?;
            draws.push(beta.sample(rng));
        }
        Ok(Selection::plain(argmax(&draws)))
    }

    fn observe(&mut self, arm: usize, x: f64) -> Result<()> {
        check_arm(arm, self.k())?;
        if x == 1.0 {
            self.counts[arm].0 += 1.0;
        } else if x == 0.0 {
            self.counts[arm].1 += 1.0;
        } else {
            return Err(Error::Domain(format!(
                "Bernoulli observation must be 0 or 1, got {x}"
            )));
        }
        self.obs += 1;
        Ok(())
    }
}

/// Thompson sampling for an arbitrary prior, decided by racing.
///
/// The agent keeps the running per-arm easy-family posteriors as the race
/// proposal. Each decision draws fresh Gumbel noise, races until the
/// winner's lead clears the confidence threshold (or a cap), and pulls the
/// identified arm.
#[derive(Debug, Clone)]
pub struct RacingTs {
    prior: Arc<PriorSpec>,
    proposal: PosteriorState,
    config: RacingConfig,
    obs: usize,
}

impl RacingTs {
    /// Creates the agent: `prior` is the (possibly dependent, possibly
    /// non-conjugate) prior over all arm parameters; `kind` selects the
    /// easy observation family driving the proposal posteriors.
    pub fn new(prior: Arc<PriorSpec>, kind: FamilyKind, config: RacingConfig) -> Result<Self> {
        let proposal = PosteriorState::new(kind, prior.k())?;
        Ok(RacingTs {
            prior,
            proposal,
            config,
            obs: 0,
        })
    }

    /// Number of arms.
    pub fn k(&self) -> usize {
        self.proposal.k()
    }

    /// The race stopping parameters in use.
    pub fn config(&self) -> &RacingConfig {
        &self.config
    }

    fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Selection> {
        if let Some(arm) = warm_arm(self.obs, self.k()) {
            return Ok(Selection::plain(arm));
        }
        let noise = GumbelNoise::draw(self.k(), rng);
        let outcome = race(&self.prior, &self.proposal, &noise, &self.config, rng)?;
        Ok(Selection {
            arm: outcome.chosen_arm,
            racing: Some(outcome),
        })
    }

    fn observe(&mut self, arm: usize, x: f64) -> Result<()> {
        self.proposal.update(arm, x)?;
        self.obs += 1;
        Ok(())
    }
}

/// Sequential-Monte-Carlo Thompson sampling baseline.
///
/// A fixed population of particles is drawn from the prior once; every
/// observation reweights it by the likelihood (no resampling). Each decision
/// draws one particle proportionally to weight and pulls the arm with the
/// best mean under that particle. With a schedule attached, decision `t`
/// draws only among the first `schedule[t]` particles, so the per-decision
/// budget matches a recorded racing run sample-for-sample.
#[derive(Debug, Clone)]
pub struct SmcTs {
    particles: ParticleSet,
    kind: FamilyKind,
    schedule: Option<Arc<[u64]>>,
    obs: usize,
}

impl SmcTs {
    /// Draws the particle population from `prior`. When `schedule` is given,
    /// the population holds `max(schedule)` particles (raised to `pool` if
    /// that is larger) so every scheduled prefix exists; otherwise it holds
    /// `pool` particles.
    pub fn new<R: Rng + ?Sized>(
        prior: &PriorSpec,
        kind: FamilyKind,
        pool: usize,
        schedule: Option<Vec<u64>>,
        rng: &mut R,
    ) -> Result<Self> {
        let schedule = match schedule {
            Some(s) => {
                if s.is_empty() {
                    return Err(Error::InvalidParameter(
                        "sample-size schedule must not be empty".into(),
                    ));
                }
                Some(s)
            }
            None => None,
        };
        let n = match &schedule {
            Some(s) => {
                let top = s.iter().copied().max().unwrap_or(1).max(1) as usize;
                top.max(pool)
            }
            None => pool,
        };
        if n == 0 {
            return Err(Error::InvalidParameter(
                "particle population must not be empty".into(),
            ));
        }
        let particles = ParticleSet::from_prior(prior, n, rng)?;
        Ok(SmcTs {
            particles,
            kind,
            schedule: schedule.map(Arc::from),
            obs: 0,
        })
    }

    /// Number of arms.
    pub fn k(&self) -> usize {
        self.particles.k()
    }

    /// Size of the particle population.
    pub fn pool(&self) -> usize {
        self.particles.n()
    }

    fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Selection> {
        if let Some(arm) = warm_arm(self.obs, self.k()) {
            return Ok(Selection::plain(arm));
        }
        let n_first = match &self.schedule {
            Some(s) => {
                // Post-warm decision index; schedules shorter than the run
                // stay on their final entry.
                let idx = (self.obs - self.k()).min(s.len() - 1);
                (s[idx].max(1) as usize).min(self.pool())
            }
            None => self.pool(),
        };
        let params = self.particles.sample_mean_vector_among(n_first, rng)?;
        let means: Vec<f64> = params.iter().map(|&p| self.kind.mean_of(p)).collect();
        Ok(Selection::plain(argmax(&means)))
    }

    fn observe(&mut self, arm: usize, x: f64) -> Result<()> {
        self.particles.reweight(arm, x, self.kind)?;
        self.obs += 1;
        Ok(())
    }
}

/// Uniform-random control: after warm-up, every arm is equally likely.
#[derive(Debug, Clone)]
pub struct RandomAgent {
    k: usize,
    obs: usize,
}

impl RandomAgent {
    /// Creates the control for `k` arms.
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter(
                "random agent needs at least one arm".into(),
            ));
        }
        Ok(RandomAgent { k, obs: 0 })
    }

    /// Number of arms.
    pub fn k(&self) -> usize {
        self.k
    }

    fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Selection> {
        if let Some(arm) = warm_arm(self.obs, self.k) {
            return Ok(Selection::plain(arm));
        }
        Ok(Selection::plain(rng.random_range(0..self.k)))
    }

    fn observe(&mut self, arm: usize, _x: f64) -> Result<()> {
        check_arm(arm, self.k)?;
        self.obs += 1;
        Ok(())
    }
}

/// Any of the four policies, under one interface.
#[derive(Debug, Clone)]
pub enum Agent {
    /// Exact conjugate Thompson sampling.
    Vanilla(VanillaTs),
    /// Racing Thompson sampling.
    Racing(RacingTs),
    /// Sequential-Monte-Carlo baseline.
    Smc(SmcTs),
    /// Uniform-random control.
    Random(RandomAgent),
}

impl Agent {
    /// Number of arms.
    pub fn k(&self) -> usize {
        match self {
            Agent::Vanilla(a) => a.k(),
            Agent::Racing(a) => a.k(),
            Agent::Smc(a) => a.k(),
            Agent::Random(a) => a.k(),
        }
    }

    /// Picks the next arm. Does not mutate the agent; all state changes go
    /// through [`Agent::observe`].
    pub fn select_arm<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Selection> {
        match self {
            Agent::Vanilla(a) => a.select(rng),
            Agent::Racing(a) => a.select(rng),
            Agent::Smc(a) => a.select(rng),
            Agent::Random(a) => a.select(rng),
        }
    }

    /// Records the reward `x` received from pulling `arm`.
    pub fn observe(&mut self, arm: usize, x: f64) -> Result<()> {
        match self {
            Agent::Vanilla(a) => a.observe(arm, x),
            Agent::Racing(a) => a.observe(arm, x),
            Agent::Smc(a) => a.observe(arm, x),
            Agent::Random(a) => a.observe(arm, x),
        }
    }
}
