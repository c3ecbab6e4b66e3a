//! Reward families.
//!
//! Each bandit arm draws rewards from a one-parameter family. The harness
//! works in *mean space* (priors are placed on the vector of arm means), so
//! every family knows how to translate between its canonical parameter and
//! its mean, and how to validate a parameter drawn from a possibly wider
//! prior support.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson, StandardUniform};

use crate::error::{Error, Result};

/// The reward families with a pinned easy-prior/posterior pair.
///
/// | family              | parameter       | easy prior            | posterior after data        |
/// |---------------------|-----------------|-----------------------|-----------------------------|
/// | Bernoulli           | success prob. p | Uniform(0, 1)         | Beta(1 + ones, 1 + zeros)   |
/// | Exponential         | rate λ          | Exp(1)                | Gamma(1 + n, rate 1 + Σx)   |
/// | GaussianUnitVariance| mean μ          | flat (improper)       | Normal(Σx / n, 1/n)         |
/// | Poisson             | rate λ          | ∝ 1/√λ (improper)     | Gamma(1/2 + Σx, rate n)     |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    /// Rewards in {0, 1} with success probability p ∈ [0, 1].
    Bernoulli,
    /// Rewards in (0, ∞) with density λ·exp(−λx); parameter is the rate λ.
    Exponential,
    /// Rewards in ℝ with density N(μ, 1); parameter is the mean μ.
    GaussianUnitVariance,
    /// Rewards in {0, 1, 2, …} with rate λ > 0.
    Poisson,
}

impl FamilyKind {
    /// Short lowercase name used in configs and run metadata.
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Bernoulli => "bernoulli",
            FamilyKind::Exponential => "exponential",
            FamilyKind::GaussianUnitVariance => "gaussian-unit-variance",
            FamilyKind::Poisson => "poisson",
        }
    }

    /// True when `param` is a legal canonical parameter for this family.
    pub fn param_valid(self, param: f64) -> bool {
        match self {
            FamilyKind::Bernoulli => (0.0..=1.0).contains(&param),
            FamilyKind::Exponential | FamilyKind::Poisson => param > 0.0 && param.is_finite(),
            FamilyKind::GaussianUnitVariance => param.is_finite(),
        }
    }

    /// Mean reward of an arm with canonical parameter `param`.
    ///
    /// Bernoulli and Gaussian arms are parameterized by their mean already;
    /// an Exponential arm with rate λ has mean 1/λ; a Poisson arm with rate
    /// λ has mean λ.
    pub fn mean_of(self, param: f64) -> f64 {
        match self {
            FamilyKind::Bernoulli | FamilyKind::GaussianUnitVariance | FamilyKind::Poisson => param,
            FamilyKind::Exponential => 1.0 / param,
        }
    }

    /// Canonical parameter of an arm whose mean reward is `mean`.
    ///
    /// Inverse of [`FamilyKind::mean_of`]; for Exponential the rate is the
    /// reciprocal of the mean.
    pub fn param_from_mean(self, mean: f64) -> f64 {
        match self {
            FamilyKind::Bernoulli | FamilyKind::GaussianUnitVariance | FamilyKind::Poisson => mean,
            FamilyKind::Exponential => 1.0 / mean,
        }
    }

    /// Draws one reward from an arm with canonical parameter `param`.
    ///
    /// Errors if `param` is outside the family's legal range.
    pub fn sample_reward<R: Rng + ?Sized>(self, param: f64, rng: &mut R) -> Result<f64> {
        if !self.param_valid(param) {
            return Err(Error::InvalidParameter(format!(
                "{} parameter {param} out of range",
                self.name()
            )));
        }
        Ok(match self {
            FamilyKind::Bernoulli => {
                let u: f64 = StandardUniform.sample(rng);
                if u < param {
                    1.0
                } else {
                    0.0
                }
            }
            FamilyKind::Exponential => Exp::new(param)
                .expect("validated rate is positive")
                .sample(rng),
            FamilyKind::GaussianUnitVariance => Normal::new(param, 1.0)
                .expect("validated mean is finite")
                .sample(rng),
            FamilyKind::Poisson => Poisson::new(param)
                .expect("validated rate is positive")
                .sample(rng),
        })
    }

    /// Log-likelihood of a single observation `x` under parameter `param`.
    ///
    /// Used by the SMC baseline to reweight particles after each reward.
    /// Observations outside the family's support (a Bernoulli reward of 0.5,
    /// a negative Exponential reward) return −∞ rather than an error, so the
    /// caller can treat them as zero-probability events.
    pub fn log_likelihood(self, param: f64, x: f64) -> f64 {
        match self {
            FamilyKind::Bernoulli => {
                if x == 1.0 {
                    param.ln()
                } else if x == 0.0 {
                    (1.0 - param).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            FamilyKind::Exponential => {
                if x >= 0.0 && param > 0.0 {
                    param.ln() - param * x
                } else {
                    f64::NEG_INFINITY
                }
            }
            FamilyKind::GaussianUnitVariance => {
                let d = x - param;
                -0.5 * d * d - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
            FamilyKind::Poisson => {
                if param > 0.0 && x >= 0.0 && x.fract() == 0.0 {
                    x * param.ln() - param - libm::lgamma(x + 1.0)
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}
