//! Easy-prior conjugate posteriors used as racing proposals.
//!
//! Each reward family carries a fixed "easy" prior chosen for conjugacy, not
//! for realism: it makes the per-arm posterior a textbook distribution that
//! can be sampled cheaply and whose density never has to be evaluated. The
//! racing sampler draws proposals from the product of these per-arm
//! posteriors and corrects toward the *actual* prior with importance
//! weights, so a mismatch between easy prior and actual prior costs samples
//! but never correctness.
//!
//! Two of the easy priors are improper (Gaussian flat, Poisson ∝ 1/√λ);
//! their posteriors only integrate to one after the first observation, and
//! sampling them earlier is an error. The uniform warm start performed by
//! every agent guarantees each arm has an observation before any race runs.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal};

use crate::distributions::family::FamilyKind;
use crate::error::{Error, Result};

/// Sufficient statistics of one arm's easy-prior posterior.
///
/// Fields are public so tests and diagnostics can inspect the exact counts;
/// use [`ArmPosterior::update`] to keep them consistent with the family's
/// support checks.
#[derive(Debug, Clone, PartialEq)]
pub enum ArmPosterior {
    /// Beta(1 + successes, 1 + failures), from the Uniform(0, 1) easy prior.
    Bernoulli {
        /// Number of rewards equal to 1.
        successes: f64,
        /// Number of rewards equal to 0.
        failures: f64,
    },
    /// Gamma(1 + count, rate 1 + sum), from the Exp(1) easy prior on the rate.
    Exponential {
        /// Number of observations.
        count: f64,
        /// Sum of observed rewards.
        sum: f64,
    },
    /// Normal(sum / count, 1 / count), from the flat improper easy prior.
    GaussianUnitVariance {
        /// Number of observations.
        count: f64,
        /// Sum of observed rewards.
        sum: f64,
    },
    /// Gamma(1/2 + sum, rate count), from the ∝ 1/√λ improper easy prior.
    Poisson {
        /// Number of observations.
        count: f64,
        /// Sum of observed counts.
        sum: f64,
    },
}

impl ArmPosterior {
    /// The no-data posterior (equal to the easy prior itself).
    pub fn new(kind: FamilyKind) -> Self {
        match kind {
            FamilyKind::Bernoulli => ArmPosterior::Bernoulli {
                successes: 0.0,
                failures: 0.0,
            },
            FamilyKind::Exponential => ArmPosterior::Exponential {
                count: 0.0,
                sum: 0.0,
            },
            FamilyKind::GaussianUnitVariance => ArmPosterior::GaussianUnitVariance {
                count: 0.0,
                sum: 0.0,
            },
            FamilyKind::Poisson => ArmPosterior::Poisson {
                count: 0.0,
                sum: 0.0,
            },
        }
    }

    /// The family this posterior belongs to.
    pub fn kind(&self) -> FamilyKind {
        match self {
            ArmPosterior::Bernoulli { .. } => FamilyKind::Bernoulli,
            ArmPosterior::Exponential { .. } => FamilyKind::Exponential,
            ArmPosterior::GaussianUnitVariance { .. } => FamilyKind::GaussianUnitVariance,
            ArmPosterior::Poisson { .. } => FamilyKind::Poisson,
        }
    }

    /// Absorbs one observation into the sufficient statistics.
    ///
    /// Errors if `x` lies outside the family's support (e.g. a Bernoulli
    /// reward that is neither 0 nor 1).
    pub fn update(&mut self, x: f64) -> Result<()> {
        match self {
            ArmPosterior::Bernoulli {
                successes,
                failures,
            } => {
                if x == 1.0 {
                    *successes += 1.0;
                } else if x == 0.0 {
                    *failures += 1.0;
                } else {
                    return Err(Error::Domain(format!(
                        "Bernoulli observation must be 0 or 1, got {x}"
                    )));
                }
            }
            ArmPosterior::Exponential { count, sum } => {
                if !(x.is_finite() && x >= 0.0) {
                    return Err(Error::Domain(format!(
                        "Exponential observation must be finite and >= 0, got {x}"
                    )));
                }
                *count += 1.0;
                *sum += x;
            }
            ArmPosterior::GaussianUnitVariance { count, sum } => {
                if !x.is_finite() {
                    return Err(Error::Domain(format!(
                        "Gaussian observation must be finite, got {x}"
                    )));
                }
                *count += 1.0;
                *sum += x;
            }
            ArmPosterior::Poisson { count, sum } => {
                if !(x.is_finite() && x >= 0.0 && x.fract() == 0.0) {
                    return Err(Error::Domain(format!(
                        "Poisson observation must be a nonnegative integer, got {x}"
                    )));
                }
                *count += 1.0;
                *sum += x;
            }
        }
        Ok(())
    }

    /// True when the posterior integrates to one.
    ///
    /// The Bernoulli and Exponential easy priors are proper, so their
    /// posteriors always are; the Gaussian and Poisson rows become proper
    /// with the first observation.
    pub fn is_proper(&self) -> bool {
        match self {
            ArmPosterior::Bernoulli { .. } | ArmPosterior::Exponential { .. } => true,
            ArmPosterior::GaussianUnitVariance { count, .. }
            | ArmPosterior::Poisson { count, .. } => *count >= 1.0,
        }
    }

    /// Log-density of the family's easy prior at parameter value `value`.
    ///
    /// For the improper rows this is the unnormalized log-density (flat → 0,
    /// Poisson → −½·log λ); constants shared across arms cancel in the
    /// importance ratios that consume it.
    pub fn easy_prior_log_density(&self, value: f64) -> f64 {
        match self.kind() {
            FamilyKind::Bernoulli => {
                if (0.0..=1.0).contains(&value) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            FamilyKind::Exponential => {
                if value > 0.0 {
                    -value
                } else {
                    f64::NEG_INFINITY
                }
            }
            FamilyKind::GaussianUnitVariance => 0.0,
            FamilyKind::Poisson => {
                if value > 0.0 {
                    -0.5 * value.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    fn prepared(&self, arm: usize) -> Result<PreparedArm> {
        if !self.is_proper() {
            return Err(Error::ImproperPosterior { arm });
        }
        Ok(match self {
            ArmPosterior::Bernoulli {
                successes,
                failures,
            } => PreparedArm::Beta(
                Beta::new(1.0 + successes, 1.0 + failures).expect("counts are nonnegative"),
            ),
            ArmPosterior::Exponential { count, sum } => PreparedArm::Gamma(
                Gamma::new(1.0 + count, 1.0 / (1.0 + sum)).expect("shape and scale are positive"),
            ),
            ArmPosterior::GaussianUnitVariance { count, sum } => PreparedArm::Normal(
                Normal::new(sum / count, (1.0 / count).sqrt()).expect("count is positive"),
            ),
            ArmPosterior::Poisson { count, sum } => PreparedArm::Gamma(
                Gamma::new(0.5 + sum, 1.0 / count).expect("shape and scale are positive"),
            ),
        })
    }
}

/// One arm's posterior frozen into a ready-to-sample distribution.
#[derive(Debug, Clone)]
enum PreparedArm {
    Beta(Beta<f64>),
    Gamma(Gamma<f64>),
    Normal(Normal<f64>),
}

impl PreparedArm {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            PreparedArm::Beta(d) => d.sample(rng),
            PreparedArm::Gamma(d) => d.sample(rng),
            PreparedArm::Normal(d) => d.sample(rng),
        }
    }
}

/// The product of all arms' easy-prior posteriors at one point in time.
///
/// This is the racing sampler's proposal distribution: independent across
/// arms, conjugate within each arm, refreshed after every observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    kind: FamilyKind,
    arms: Vec<ArmPosterior>,
}

impl PosteriorState {
    /// A fresh state for `k` arms with no observations.
    ///
    /// Errors if `k` is zero.
    pub fn new(kind: FamilyKind, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter(
                "posterior state needs at least one arm".into(),
            ));
        }
        Ok(PosteriorState {
            kind,
            arms: (0..k).map(|_| ArmPosterior::new(kind)).collect(),
        })
    }

    /// The reward family all arms share.
    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    /// Number of arms.
    pub fn k(&self) -> usize {
        self.arms.len()
    }

    /// Per-arm posteriors, in arm order.
    pub fn arms(&self) -> &[ArmPosterior] {
        &self.arms
    }

    /// Absorbs one observation of reward `x` on arm `arm`.
    pub fn update(&mut self, arm: usize, x: f64) -> Result<()> {
        let k = self.k();
        let slot = self.arms.get_mut(arm).ok_or(Error::DimensionMismatch {
            context: "posterior update",
            expected: k,
            got: arm,
        })?;
        slot.update(x)
    }

    /// True when every arm's posterior is proper.
    pub fn is_proper(&self) -> bool {
        self.arms.iter().all(ArmPosterior::is_proper)
    }

    /// Draws one parameter vector from the product posterior.
    ///
    /// Errors with [`Error::ImproperPosterior`] if any arm is still awaiting
    /// its first observation. For repeated draws, [`PosteriorState::prepared`]
    /// amortizes the per-arm setup.
    pub fn sample_proposal<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let prepared = self.prepared()?;
        let mut out = vec![0.0; self.k()];
        prepared.sample_into(&mut out, rng);
        Ok(out)
    }

    /// Sum of per-arm easy-prior log-densities at `params`.
    ///
    /// This is the denominator of the racing importance ratio. Errors if
    /// `params` has the wrong length.
    pub fn proposal_prior_log_density(&self, params: &[f64]) -> Result<f64> {
        if params.len() != self.k() {
            return Err(Error::DimensionMismatch {
                context: "proposal_prior_log_density",
                expected: self.k(),
                got: params.len(),
            });
        }
        Ok(self
            .arms
            .iter()
            .zip(params)
            .map(|(arm, &v)| arm.easy_prior_log_density(v))
            .sum())
    }

    /// Freezes the current posteriors into a reusable sampler.
    pub fn prepared(&self) -> Result<PreparedProposal> {
        let arms = self
            .arms
            .iter()
            .enumerate()
            .map(|(i, a)| a.prepared(i))
            .collect::<Result<Vec<_>>>()?;
        Ok(PreparedProposal {
            kind: self.kind,
            state: self.clone(),
            arms,
        })
    }
}

/// A [`PosteriorState`] snapshot with all per-arm samplers constructed once.
///
/// Races draw thousands of proposal vectors from the same state; this type
/// pays the Beta/Gamma/Normal setup cost once per race instead of once per
/// draw.
#[derive(Debug, Clone)]
pub struct PreparedProposal {
    kind: FamilyKind,
    state: PosteriorState,
    arms: Vec<PreparedArm>,
}

impl PreparedProposal {
    /// The reward family all arms share.
    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    /// Number of arms.
    pub fn k(&self) -> usize {
        self.arms.len()
    }

    /// Fills `out` with one draw from the product posterior.
    ///
    /// `out.len()` must equal [`PreparedProposal::k`].
    pub fn sample_into<R: Rng + ?Sized>(&self, out: &mut [f64], rng: &mut R) {
        debug_assert_eq!(out.len(), self.arms.len());
        for (slot, arm) in out.iter_mut().zip(&self.arms) {
            *slot = arm.sample(rng);
        }
    }

    /// Sum of per-arm easy-prior log-densities at `params`.
    pub fn easy_prior_log_density(&self, params: &[f64]) -> f64 {
        debug_assert_eq!(params.len(), self.arms.len());
        self.state
            .arms()
            .iter()
            .zip(params)
            .map(|(arm, &v)| arm.easy_prior_log_density(v))
            .sum()
    }
}
