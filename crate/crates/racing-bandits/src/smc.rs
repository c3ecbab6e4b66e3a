//! Sequential-Monte-Carlo posterior approximation.
//!
//! The SMC baseline maintains N particles drawn once from the prior and
//! reweights them by the likelihood of every observed reward. A posterior
//! draw is then a weighted pick of one particle. This is cheap and exact in
//! the limit, but the particle set is never refreshed: as data accumulates,
//! the weights concentrate on the few particles that happen to sit near the
//! truth, the effective sample size collapses, and late-horizon draws come
//! from a handful of atoms. The racing sampler exists to avoid exactly this
//! degeneracy, so the baseline deliberately performs no rejuvenation;
//! [`ParticleSet::multinomial_resample`] is provided for completeness and
//! for tests.

use rand::Rng;

use crate::distributions::{FamilyKind, PriorSpec};
use crate::error::{Error, Result};

/// A weighted particle approximation of the posterior over the arm
/// parameter vector. Log-weights are stored unnormalized; every consumer
/// normalizes on the fly, so reweighting is a pure addition.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    /// Row-major n × k particle matrix.
    particles: Vec<f64>,
    log_weights: Vec<f64>,
    k: usize,
}

impl ParticleSet {
    /// Draws `n` particles i.i.d. from `prior`, all with weight one.
    pub fn from_prior<R: Rng + ?Sized>(prior: &PriorSpec, n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "particle set needs at least one particle".into(),
            ));
        }
        let k = prior.k();
        let mut particles = Vec::with_capacity(n * k);
        for _ in 0..n {
            particles.extend_from_slice(&prior.sample(rng));
        }
        Ok(ParticleSet {
            particles,
            log_weights: vec![0.0; n],
            k,
        })
    }

    /// Wraps externally constructed particles and log-weights.
    ///
    /// All particle vectors must share one dimension, and log-weights must
    /// not be NaN or +∞ (−∞ marks a dead particle and is allowed).
    pub fn from_parts(particles: Vec<Vec<f64>>, log_weights: Vec<f64>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::InvalidParameter(
                "particle set needs at least one particle".into(),
            ));
        }
        if particles.len() != log_weights.len() {
            return Err(Error::DimensionMismatch {
                context: "from_parts weights",
                expected: particles.len(),
                got: log_weights.len(),
            });
        }
        let k = particles[0].len();
        if k == 0 {
            return Err(Error::InvalidParameter(
                "particles need at least one dimension".into(),
            ));
        }
        let mut flat = Vec::with_capacity(particles.len() * k);
        for p in &particles {
            if p.len() != k {
                return Err(Error::DimensionMismatch {
                    context: "from_parts particles",
                    expected: k,
                    got: p.len(),
                });
            }
            flat.extend_from_slice(p);
        }
        if let Some(bad) = log_weights
            .iter()
            .find(|w| w.is_nan() || **w == f64::INFINITY)
        {
            return Err(Error::InvalidParameter(format!(
                "log-weights must be finite or -inf, got {bad}"
            )));
        }
        Ok(ParticleSet {
            particles: flat,
            log_weights,
            k,
        })
    }

    /// Number of particles.
    pub fn n(&self) -> usize {
        self.log_weights.len()
    }

    /// Dimension of each particle (number of arms).
    pub fn k(&self) -> usize {
        self.k
    }

    /// The `i`-th particle's parameter vector.
    pub fn particle(&self, i: usize) -> &[f64] {
        &self.particles[i * self.k..(i + 1) * self.k]
    }

    /// Unnormalized log-weights, in particle order.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Multiplies every particle's weight by the likelihood of observing
    /// reward `x` on arm `arm`, i.e. adds the log-likelihood at the
    /// particle's parameter for that arm.
    pub fn reweight(&mut self, arm: usize, x: f64, kind: FamilyKind) -> Result<()> {
        if arm >= self.k {
            return Err(Error::DimensionMismatch {
                context: "reweight arm index",
                expected: self.k,
                got: arm,
            });
        }
        let k = self.k;
        for (i, lw) in self.log_weights.iter_mut().enumerate() {
            if *lw > f64::NEG_INFINITY {
                *lw += kind.log_likelihood(self.particles[i * k + arm], x);
            }
        }
        Ok(())
    }

    /// Effective sample size (Σw)² / Σw² of the normalized weights: n for
    /// uniform weights, 1 when a single particle carries everything, 0 when
    /// every particle is dead.
    pub fn effective_sample_size(&self) -> f64 {
        self.ess_among(self.n())
    }

    fn ess_among(&self, n_first: usize) -> f64 {
        let slice = &self.log_weights[..n_first];
        let max = slice.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return 0.0;
        }
        let (mut s, mut s2) = (0.0, 0.0);
        for &lw in slice {
            let w = (lw - max).exp();
            s += w;
            s2 += w * w;
        }
        s * s / s2
    }

    /// Draws one particle proportionally to its weight and returns a copy of
    /// its parameter vector. Errors if every particle is dead.
    pub fn sample_mean_vector<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        self.sample_mean_vector_among(self.n(), rng)
    }

    /// Like [`ParticleSet::sample_mean_vector`], but draws only among the
    /// first `n_first` particles. This is how a sample-size schedule is
    /// honored: a budget of s posterior samples at some step corresponds to
    /// drawing from the prefix of s particles.
    pub fn sample_mean_vector_among<R: Rng + ?Sized>(
        &self,
        n_first: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if n_first == 0 || n_first > self.n() {
            return Err(Error::InvalidParameter(format!(
                "prefix size {} must lie in [1, {}]",
                n_first,
                self.n()
            )));
        }
        let idx = self.pick_index(n_first, rng)?;
        Ok(self.particle(idx).to_vec())
    }

    /// Categorical draw over the first `n_first` weights via CDF inversion.
    fn pick_index<R: Rng + ?Sized>(&self, n_first: usize, rng: &mut R) -> Result<usize> {
        let slice = &self.log_weights[..n_first];
        let max = slice.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::DegenerateWeights(
                "every particle weight is zero".into(),
            ));
        }
        let total: f64 = slice.iter().map(|&lw| (lw - max).exp()).sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut last_live = 0;
        for (i, &lw) in slice.iter().enumerate() {
            let w = (lw - max).exp();
            if w > 0.0 {
                last_live = i;
                acc += w;
                if acc >= target {
                    return Ok(i);
                }
            }
        }
        // Rounding pushed the target past the last increment.
        Ok(last_live)
    }

    /// Replaces the particles with `n` multinomial draws from themselves and
    /// resets all weights to one. Keeps the approximation unbiased but
    /// duplicates heavy particles; not used by the baseline agent.
    pub fn multinomial_resample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let n = self.n();
        let mut new_particles = Vec::with_capacity(n * self.k);
        for _ in 0..n {
            let idx = self.pick_index(n, rng)?;
            new_particles.extend_from_slice(self.particle(idx));
        }
        self.particles = new_particles;
        self.log_weights = vec![0.0; n];
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn flat_prior(k: usize) -> PriorSpec {
        PriorSpec::uniform_box(&vec![(0.0, 1.0); k]).unwrap()
    }

    #[test]
    fn from_prior_starts_with_unit_weights() {
        let prior = flat_prior(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let set = ParticleSet::from_prior(&prior, 50, &mut rng).unwrap();
        assert_eq!(set.n(), 50);
        assert_eq!(set.k(), 3);
        assert!(set.log_weights().iter().all(|&w| w == 0.0));
        for i in 0..set.n() {
            assert!(set.particle(i).iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
        assert!((set.effective_sample_size() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn reweight_applies_bernoulli_likelihood() {
        let set = ParticleSet::from_parts(vec![vec![0.25], vec![0.5]], vec![0.0, 0.0]).unwrap();
        let mut set = set;
        set.reweight(0, 1.0, FamilyKind::Bernoulli).unwrap();
        assert!((set.log_weights()[0] - 0.25f64.ln()).abs() < 1e-12);
        assert!((set.log_weights()[1] - 0.5f64.ln()).abs() < 1e-12);
        set.reweight(0, 0.0, FamilyKind::Bernoulli).unwrap();
        assert!((set.log_weights()[0] - (0.25f64.ln() + 0.75f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn ess_matches_closed_forms() {
        // Uniform weights over 10 particles.
        let set = ParticleSet::from_parts(vec![vec![0.5]; 10], vec![0.0; 10]).unwrap();
        assert!((set.effective_sample_size() - 10.0).abs() < 1e-12);

        // All mass on one particle.
        let set = ParticleSet::from_parts(
            vec![vec![0.1], vec![0.2], vec![0.3]],
            vec![0.0, f64::NEG_INFINITY, f64::NEG_INFINITY],
        )
        .unwrap();
        assert!((set.effective_sample_size() - 1.0).abs() < 1e-12);

        // Weights (2, 1, 1): (Σw)²/Σw² = 16/6.
        let set = ParticleSet::from_parts(
            vec![vec![0.1], vec![0.2], vec![0.3]],
            vec![2.0f64.ln(), 0.0, 0.0],
        )
        .unwrap();
        assert!((set.effective_sample_size() - 16.0 / 6.0).abs() < 1e-12);

        // Dead set.
        let set = ParticleSet::from_parts(vec![vec![0.1]], vec![f64::NEG_INFINITY]).unwrap();
        assert_eq!(set.effective_sample_size(), 0.0);
    }

    #[test]
    fn weighted_sampling_tracks_weights() {
        let set =
            ParticleSet::from_parts(vec![vec![0.1], vec![0.9]], vec![2.0f64.ln(), 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 60_000;
        let mut first = 0u64;
        for _ in 0..n {
            if set.sample_mean_vector(&mut rng).unwrap()[0] == 0.1 {
                first += 1;
            }
        }
        let freq = first as f64 / n as f64;
        assert!(
            (freq - 2.0 / 3.0).abs() < 0.01,
            "frequency {freq} not near 2/3"
        );
    }

    #[test]
    fn prefix_sampling_never_leaves_the_prefix() {
        let set = ParticleSet::from_parts(
            vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]],
            vec![0.0; 4],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let v = set.sample_mean_vector_among(2, &mut rng).unwrap()[0];
            assert!(v == 1.0 || v == 2.0);
        }
        assert!(set.sample_mean_vector_among(0, &mut rng).is_err());
        assert!(set.sample_mean_vector_among(5, &mut rng).is_err());
    }

    #[test]
    fn degenerate_sets_report_errors() {
        let set = ParticleSet::from_parts(
            vec![vec![0.5], vec![0.6]],
            vec![f64::NEG_INFINITY, f64::NEG_INFINITY],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(matches!(
            set.sample_mean_vector(&mut rng),
            Err(Error::DegenerateWeights(_))
        ));
    }

    #[test]
    fn invalid_constructions_are_rejected() {
        assert!(ParticleSet::from_parts(vec![], vec![]).is_err());
        assert!(ParticleSet::from_parts(vec![vec![0.5]], vec![0.0, 0.0]).is_err());
        assert!(ParticleSet::from_parts(vec![vec![0.5], vec![0.1, 0.2]], vec![0.0, 0.0]).is_err());
        assert!(ParticleSet::from_parts(vec![vec![0.5]], vec![f64::NAN]).is_err());
        let prior = flat_prior(1);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        assert!(ParticleSet::from_prior(&prior, 0, &mut rng).is_err());
    }

    #[test]
    fn resampling_resets_weights_and_respects_distribution() {
        let mut set =
            ParticleSet::from_parts(vec![vec![0.0], vec![1.0]], vec![3.0f64.ln(), 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // Average the post-resample composition over many trials.
        let mut heavy = 0u64;
        let trials = 2000;
        for _ in 0..trials {
            let mut copy = set.clone();
            copy.multinomial_resample(&mut rng).unwrap();
            assert!(copy.log_weights().iter().all(|&w| w == 0.0));
            heavy += copy
                .particle(0)
                .iter()
                .chain(copy.particle(1))
                .filter(|&&x| x == 0.0)
                .count() as u64;
        }
        let frac = heavy as f64 / (2 * trials) as f64;
        assert!((frac - 0.75).abs() < 0.03, "heavy fraction {frac}");
        // The original is untouched by cloned resamples.
        set.reweight(0, 1.0, FamilyKind::Bernoulli).unwrap();
    }

    proptest! {
        /// Reweighting is log-additive: applying observations one at a time
        /// matches adding their joint log-likelihood.
        #[test]
        fn reweight_is_log_additive(
            p in 0.05f64..0.95,
            obs in proptest::collection::vec(proptest::bool::ANY, 1..20),
        ) {
            let mut set =
                ParticleSet::from_parts(vec![vec![p]], vec![0.0]).unwrap();
            let mut joint = 0.0;
            for &b in &obs {
                let x = if b { 1.0 } else { 0.0 };
                set.reweight(0, x, FamilyKind::Bernoulli).unwrap();
                joint += FamilyKind::Bernoulli.log_likelihood(p, x);
            }
            prop_assert!((set.log_weights()[0] - joint).abs() < 1e-9);
        }

        /// ESS is always in [1, n] while at least one particle lives.
        #[test]
        fn ess_stays_in_range(
            weights in proptest::collection::vec(0.01f64..100.0, 1..30),
        ) {
            let n = weights.len();
            let set = ParticleSet::from_parts(
                vec![vec![0.5]; n],
                weights.iter().map(|w| w.ln()).collect(),
            )
            .unwrap();
            let ess = set.effective_sample_size();
            prop_assert!(ess >= 1.0 - 1e-12);
            prop_assert!(ess <= n as f64 + 1e-12);
        }
    }
}
