//! Gumbel-Max sampling utilities.
//!
//! If ε₁, …, ε_K are i.i.d. standard Gumbel and w₁, …, w_K are nonnegative
//! weights, then
//!
//!   argmax_i (ε_i + log w_i)
//!
//! is distributed Categorical(w / Σw). This identity converts "sample an
//! index proportionally to w" into "maximize a perturbed score", which is
//! the reformulation the racing selector builds on: the weights there are
//! posterior probabilities that never need to be computed explicitly.

use rand::Rng;

use crate::error::{Error, Result};

/// Maps a uniform draw u ∈ (0, 1) to a standard Gumbel variate
/// ε = −log(−log u).
///
/// Kept separate from [`sample_gumbel`] so the deterministic transform can
/// be tested against closed-form values.
fn gumbel_from_uniform(u: f64) -> f64 {
    -(-u.ln()).ln()
}

/// Draws one standard Gumbel variate via inversion: ε = −log(−log u) with
/// u ~ Uniform(0, 1).
///
/// Draws of exactly 0 or 1 (possible at the edges of the generator's range)
/// are rejected and redrawn, so the transform never sees log 0.
pub fn sample_gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 && u < 1.0 {
            return gumbel_from_uniform(u);
        }
    }
}

/// A fixed vector of standard Gumbel perturbations, one per arm.
///
/// The racing selector draws this once per decision step and holds it fixed
/// for the whole race, so the race solves a single realized optimization
/// problem rather than chasing a moving target.
#[derive(Debug, Clone, PartialEq)]
pub struct GumbelNoise {
    values: Vec<f64>,
}

impl GumbelNoise {
    /// Draws `k` independent standard Gumbel variates.
    pub fn draw<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Self {
        let values = (0..k).map(|_| sample_gumbel(rng)).collect();
        GumbelNoise { values }
    }

    /// Wraps externally supplied perturbations (useful for reproducing a
    /// specific realized race). All entries must be finite.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Gumbel perturbations must be finite, got {bad}"
            )));
        }
        Ok(GumbelNoise { values })
    }

    /// The perturbation attached to each arm.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of arms covered.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when no perturbations are stored.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest perturbation, or −∞ when empty.
    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Samples an index proportionally to `exp(log_weights)` via the Gumbel-Max
/// trick: draws fresh noise and returns argmax_i (ε_i + log w_i).
///
/// Entries of −∞ denote zero weight and can never win. Exact score ties are
/// broken toward the lowest index. Errors if `log_weights` is empty or if
/// every entry is −∞ (no normalizable distribution exists).
pub fn gumbel_max_select<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> Result<usize> {
    if log_weights.is_empty() {
        return Err(Error::DegenerateWeights(
            "no weights supplied to gumbel_max_select".into(),
        ));
    }
    if let Some(bad) = log_weights
        .iter()
        .find(|w| w.is_nan() || **w == f64::INFINITY)
    {
        return Err(Error::InvalidParameter(format!(
            "log-weights must be finite or -inf, got {bad}"
        )));
    }
    if log_weights.iter().all(|w| *w == f64::NEG_INFINITY) {
        return Err(Error::DegenerateWeights("all log-weights are -inf".into()));
    }

    let mut best = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    for (i, &lw) in log_weights.iter().enumerate() {
        if lw == f64::NEG_INFINITY {
            // Still consume one noise draw so the winning index depends only
            // on the weights, not on which entries happen to be zero.
            let _ = sample_gumbel(rng);
            continue;
        }
        let score = sample_gumbel(rng) + lw;
        if score > best_score {
            best_score = score;
            best = i;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn transform_matches_closed_form() {
        // ε(0.5) = −log(log 2)
        let expected = 0.366_512_920_581_664_33;
        assert!((gumbel_from_uniform(0.5) - expected).abs() < 1e-12);
        // u = 1/e gives −log(−log e^{-1}) = −log 1 = 0.
        assert!(gumbel_from_uniform((-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn empirical_mean_matches_euler_mascheroni() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mean = (0..n).map(|_| sample_gumbel(&mut rng)).sum::<f64>() / n as f64;
        assert!(
            (mean - 0.577_215_664_9).abs() < 0.01,
            "Gumbel mean {mean} too far from Euler-Mascheroni"
        );
    }

    #[test]
    fn degenerate_weights_always_pick_the_only_live_arm() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let lw = [0.0, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for _ in 0..100 {
            assert_eq!(gumbel_max_select(&lw, &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn symmetric_weights_select_uniformly() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let lw = [0.5f64.ln(), 0.5f64.ln()];
        let n = 100_000;
        let mut zero = 0u64;
        for _ in 0..n {
            if gumbel_max_select(&lw, &mut rng).unwrap() == 0 {
                zero += 1;
            }
        }
        let freq = zero as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.01, "frequency {freq} not near 0.5");
    }

    #[test]
    fn all_zero_weights_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let lw = [f64::NEG_INFINITY; 3];
        assert!(matches!(
            gumbel_max_select(&lw, &mut rng),
            Err(Error::DegenerateWeights(_))
        ));
        assert!(matches!(
            gumbel_max_select(&[], &mut rng),
            Err(Error::DegenerateWeights(_))
        ));
    }

    #[test]
    fn noise_vector_reports_its_max() {
        let noise = GumbelNoise::from_values(vec![0.3, -1.2, 2.5]).unwrap();
        assert_eq!(noise.len(), 3);
        assert_eq!(noise.max(), 2.5);
        assert!(GumbelNoise::from_values(vec![0.0, f64::NAN]).is_err());
    }

    proptest! {
        /// Same seed, same draw: the selector is a pure function of
        /// (weights, rng state).
        #[test]
        fn selection_is_deterministic_given_seed(
            seed in any::<u64>(),
            weights in proptest::collection::vec(0.01f64..10.0, 1..6),
        ) {
            let lw: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
            let a = gumbel_max_select(&lw, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let b = gumbel_max_select(&lw, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(a, b);
        }

        /// Adding a constant to every log-weight rescales all weights by the
        /// same factor and must not change the realized selection.
        #[test]
        fn selection_is_shift_invariant(
            seed in any::<u64>(),
            shift in -30.0f64..30.0,
            weights in proptest::collection::vec(0.01f64..10.0, 1..6),
        ) {
            let lw: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
            let shifted: Vec<f64> = lw.iter().map(|w| w + shift).collect();
            let a = gumbel_max_select(&lw, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let b = gumbel_max_select(&shifted, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(a, b);
        }

        /// Draws stay finite and the winner always has positive weight.
        #[test]
        fn winner_has_positive_weight(
            seed in any::<u64>(),
            weights in proptest::collection::vec(0.0f64..10.0, 2..6),
        ) {
            prop_assume!(weights.iter().any(|w| *w > 0.0));
            let lw: Vec<f64> = weights
                .iter()
                .map(|w| if *w > 0.0 { w.ln() } else { f64::NEG_INFINITY })
                .collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pick = gumbel_max_select(&lw, &mut rng).unwrap();
            prop_assert!(weights[pick] > 0.0);
        }
    }
}
