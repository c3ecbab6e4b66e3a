//! Bandit instances and regret accounting.

use rand::Rng;

use crate::distributions::{FamilyKind, PriorSpec};
use crate::error::{Error, Result};

/// Redraws allowed before [`draw_instance`] gives up on finding a parameter
/// vector that is valid for the family.
const MAX_INSTANCE_REDRAWS: u32 = 100_000;

/// A fixed bandit problem: one reward family and one canonical parameter
/// per arm.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditInstance {
    kind: FamilyKind,
    params: Vec<f64>,
    means: Vec<f64>,
    best_mean: f64,
}

impl BanditInstance {
    /// Builds an instance, validating every arm parameter against the
    /// family's legal range.
    pub fn new(kind: FamilyKind, params: Vec<f64>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::InvalidParameter(
                "bandit instance needs at least one arm".into(),
            ));
        }
        for (i, &p) in params.iter().enumerate() {
            if !kind.param_valid(p) {
                return Err(Error::InvalidParameter(format!(
                    "arm {i}: {} parameter {p} out of range",
                    kind.name()
                )));
            }
        }
        let means: Vec<f64> = params.iter().map(|&p| kind.mean_of(p)).collect();
        let best_mean = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(BanditInstance {
            kind,
            params,
            means,
            best_mean,
        })
    }

    /// The reward family.
    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    /// Number of arms.
    pub fn k(&self) -> usize {
        self.params.len()
    }

    /// Canonical parameters, in arm order.
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mean rewards, in arm order.
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Mean reward of one arm.
    pub fn mean(&self, arm: usize) -> f64 {
        self.means[arm]
    }

    /// Largest mean reward across arms.
    pub fn best_mean(&self) -> f64 {
        self.best_mean
    }

    /// Draws one reward from `arm`.
    pub fn pull<R: Rng + ?Sized>(&self, arm: usize, rng: &mut R) -> Result<f64> {
        if arm >= self.k() {
            return Err(Error::DimensionMismatch {
                context: "pull arm index",
                expected: self.k(),
                got: arm,
            });
        }
        self.kind.sample_reward(self.params[arm], rng)
    }

    /// Expected per-step regret of playing `arm`: best mean minus the arm's
    /// mean. Always nonnegative.
    pub fn regret_of(&self, arm: usize) -> f64 {
        self.best_mean - self.means[arm]
    }

    /// Expected cumulative regret of an action sequence: Σ_t (µ* − µ_{a_t}).
    pub fn cumulative_regret(&self, arms: &[usize]) -> f64 {
        arms.iter().map(|&a| self.regret_of(a)).sum()
    }
}

/// Draws a bandit instance with parameters sampled from `prior`, redrawing
/// until every arm parameter is valid for the family.
///
/// A prior whose support includes invalid parameters (a uniform box wider
/// than [0, 1] for a Bernoulli family, say) just costs redraws; a prior that
/// essentially never produces a valid vector errors out after a bounded
/// number of attempts.
pub fn draw_instance<R: Rng + ?Sized>(
    prior: &PriorSpec,
    kind: FamilyKind,
    rng: &mut R,
) -> Result<BanditInstance> {
    for _ in 0..MAX_INSTANCE_REDRAWS {
        let params = prior.sample(rng);
        if params.iter().all(|&p| kind.param_valid(p)) {
            return BanditInstance::new(kind, params);
        }
    }
    Err(Error::Domain(format!(
        "no valid {} instance found in {MAX_INSTANCE_REDRAWS} prior draws",
        kind.name()
    )))
}
