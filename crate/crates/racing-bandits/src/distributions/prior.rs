//! Actual priors over the arm-parameter vector.
//!
//! The racing sampler needs three things from a prior π: draws (to seed SMC
//! particles and to draw problem instances), pointwise log-density evaluation
//! (for importance ratios), and a finite upper bound on the density (so the
//! importance ratio's scale is known). [`PriorSpec`] packages exactly those,
//! and the constructors below cover the priors the experiment presets use:
//! uniform boxes, products of Beta marginals, and (possibly correlated)
//! Gaussians truncated to a box.
//!
//! Densities may be unnormalized: every consumer in the crate uses π only
//! inside ratios where a constant factor cancels, and the reported upper
//! bound refers to the same unnormalized scale.

use nalgebra::{Cholesky, DMatrix};
use rand::SeedableRng;
use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};

/// Proposals the truncation probe is allowed before declaring the region
/// unreachable.
const PROBE_ATTEMPTS: u64 = 1_000_000;

/// Acceptance level the probe certifies when it errors out.
const PROBE_MIN_ACCEPTANCE: f64 = 1e-6;

/// Boxed pointwise log-density evaluator.
type LogDensityFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Boxed exact sampler producing one parameter vector per call.
type SamplerFn = Box<dyn Fn(&mut dyn RngCore) -> Vec<f64> + Send + Sync>;

/// A prior over the k-dimensional arm-parameter vector.
///
/// Construction always establishes the three invariants consumers rely on:
/// the sampler only produces points inside `support`, `log_density` is −∞
/// outside it, and `exp(log_density)` never exceeds `density_upper_bound`.
pub struct PriorSpec {
    k: usize,
    log_density: LogDensityFn,
    sampler: SamplerFn,
    support: Vec<(f64, f64)>,
    density_upper_bound: f64,
    label: String,
}

impl std::fmt::Debug for PriorSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PriorSpec")
            .field("k", &self.k)
            .field("label", &self.label)
            .field("support", &self.support)
            .field("density_upper_bound", &self.density_upper_bound)
            .finish()
    }
}

impl PriorSpec {
    /// Number of arms (dimensions) the prior covers.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Human-readable name recorded in run metadata.
    pub fn label(&self) -> &str {
        &self.label
    }

    /// Per-dimension interval outside which the density is zero.
    pub fn support(&self) -> &[(f64, f64)] {
        &self.support
    }

    /// A finite M with exp(log_density(µ)) ≤ M everywhere.
    pub fn density_upper_bound(&self) -> f64 {
        self.density_upper_bound
    }

    /// Log-density (possibly unnormalized) at `params`; −∞ outside the
    /// support. `params.len()` must equal [`PriorSpec::k`].
    pub fn log_density(&self, params: &[f64]) -> f64 {
        debug_assert_eq!(params.len(), self.k);
        (self.log_density)(params)
    }

    /// Draws one parameter vector from the prior.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        // Re-wrap so unsized callers (R = dyn RngCore) can still be erased
        // into the boxed sampler's &mut dyn RngCore argument.
        let mut shim = RngShim(rng);
        (self.sampler)(&mut shim)
    }

    /// Uniform density over the box `bounds` (product of intervals).
    ///
    /// The density is the normalized 1/volume inside the box, so the upper
    /// bound equals 1/volume.
    pub fn uniform_box(bounds: &[(f64, f64)]) -> Result<Self> {
        validate_bounds(bounds)?;
        let k = bounds.len();
        let support = bounds.to_vec();
        let log_vol: f64 = support.iter().map(|(lo, hi)| (hi - lo).ln()).sum();
        let inside = support.clone();
        let log_density = Box::new(move |p: &[f64]| {
            if in_box(p, &inside) {
                -log_vol
            } else {
                f64::NEG_INFINITY
            }
        });
        let draw_box = support.clone();
        let sampler = Box::new(move |rng: &mut dyn RngCore| {
            draw_box
                .iter()
                .map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
                .collect()
        });
        Ok(PriorSpec {
            k,
            log_density,
            sampler,
            support,
            density_upper_bound: (-log_vol).exp(),
            label: format!("uniform-box-{k}d"),
        })
    }

    /// Product of independent Beta(aᵢ, bᵢ) marginals on [0, 1]ᵏ.
    ///
    /// Requires every aᵢ, bᵢ ≥ 1 so each marginal density is bounded; the
    /// upper bound is the product of the marginal densities at their modes
    /// (aᵢ − 1)/(aᵢ + bᵢ − 2).
    pub fn independent_beta(params: &[(f64, f64)]) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::InvalidParameter(
                "independent_beta needs at least one dimension".into(),
            ));
        }
        for &(a, b) in params {
            if !(a.is_finite() && b.is_finite() && a >= 1.0 && b >= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "Beta shape parameters must be finite and >= 1 \
                     for a bounded density, got ({a}, {b})"
                )));
            }
        }
        let k = params.len();
        let shapes: Vec<(f64, f64)> = params.to_vec();
        // log B(a, b)⁻¹ per dimension, cached once.
        let lognorm: Vec<f64> = shapes
            .iter()
            .map(|&(a, b)| libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b))
            .collect();

        let mut log_bound = 0.0;
        for (i, &(a, b)) in shapes.iter().enumerate() {
            let mode = if a + b > 2.0 {
                (a - 1.0) / (a + b - 2.0)
            } else {
                0.5 // a = b = 1: flat density, any point attains the max.
            };
            log_bound += beta_log_pdf(a, b, lognorm[i], mode);
        }

        let dens_shapes = shapes.clone();
        let dens_norm = lognorm.clone();
        let log_density = Box::new(move |p: &[f64]| {
            let mut acc = 0.0;
            for (i, &x) in p.iter().enumerate() {
                let (a, b) = dens_shapes[i];
                acc += beta_log_pdf(a, b, dens_norm[i], x);
                if acc == f64::NEG_INFINITY {
                    return acc;
                }
            }
            acc
        });

        let draw_shapes: Vec<rand_distr::Beta<f64>> = shapes
            .iter()
            .map(|&(a, b)| rand_distr::Beta::new(a, b).expect("validated shapes"))
            .collect();
        let sampler = Box::new(move |rng: &mut dyn RngCore| {
            draw_shapes.iter().map(|d| d.sample(rng)).collect()
        });

        Ok(PriorSpec {
            k,
            log_density,
            sampler,
            support: vec![(0.0, 1.0); k],
            density_upper_bound: log_bound.exp(),
            label: "independent-beta".into(),
        })
    }

    /// Gaussian N(mean, cov) truncated to the box `bounds`, with density
    /// kept unnormalized: log π(x) = −½ (x − m)ᵀ Σ⁻¹ (x − m) inside the box.
    ///
    /// `cov` is row-major with length k². Errors if the covariance is not
    /// symmetric positive definite, or if a deterministic 10⁶-draw probe of
    /// the rejection sampler never lands in the box (acceptance below 10⁻⁶).
    ///
    /// The upper bound is exp(−½ q*) where q* minimizes the quadratic form
    /// over the box (zero — bound 1 — whenever the mean lies inside).
    pub fn truncated_gaussian(mean: &[f64], cov: &[f64], bounds: &[(f64, f64)]) -> Result<Self> {
        validate_bounds(bounds)?;
        let k = bounds.len();
        if mean.len() != k {
            return Err(Error::DimensionMismatch {
                context: "truncated_gaussian mean",
                expected: k,
                got: mean.len(),
            });
        }
        if cov.len() != k * k {
            return Err(Error::DimensionMismatch {
                context: "truncated_gaussian covariance",
                expected: k * k,
                got: cov.len(),
            });
        }
        for i in 0..k {
            for j in 0..i {
                let d = (cov[i * k + j] - cov[j * k + i]).abs();
                let scale = cov[i * k + j].abs().max(cov[j * k + i].abs()).max(1.0);
                if d > 1e-9 * scale {
                    return Err(Error::NotPositiveDefinite(format!(
                        "covariance entry ({i},{j}) is not symmetric"
                    )));
                }
            }
        }

        let mat = DMatrix::from_row_slice(k, k, cov);
        let chol = Cholesky::new(mat.clone())
            .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
        let precision = chol.inverse();
        let precision_rows: Vec<f64> = precision.transpose().as_slice().to_vec();
        let chol_rows: Vec<f64> = chol.l().transpose().as_slice().to_vec();

        let mean_v = mean.to_vec();
        let support = bounds.to_vec();

        // Minimize q(x) = (x−m)ᵀ P (x−m) over the box by projected
        // coordinate descent; the problem is a convex QP, so cycling through
        // exact per-coordinate minimizers converges to the global minimum.
        let q_min = {
            let mut x: Vec<f64> = mean_v
                .iter()
                .zip(&support)
                .map(|(&m, &(lo, hi))| m.clamp(lo, hi))
                .collect();
            for _ in 0..500 {
                let mut moved = 0.0f64;
                for i in 0..k {
                    let mut cross = 0.0;
                    for j in 0..k {
                        if j != i {
                            cross += precision_rows[i * k + j] * (x[j] - mean_v[j]);
                        }
                    }
                    let target = mean_v[i] - cross / precision_rows[i * k + i];
                    let clamped = target.clamp(support[i].0, support[i].1);
                    moved = moved.max((clamped - x[i]).abs());
                    x[i] = clamped;
                }
                if moved < 1e-13 {
                    break;
                }
            }
            quadform(&precision_rows, &mean_v, &x)
        };
        let density_upper_bound = (-0.5 * q_min).exp();

        // Diagonal covariances admit exact per-coordinate truncation, which
        // is dramatically cheaper than joint rejection when the box cuts
        // deep into the Gaussian.
        let diagonal = (0..k).all(|i| (0..k).all(|j| i == j || cov[i * k + j].abs() <= 1e-12));
        let trunc = if diagonal {
            let normals = (0..k)
                .map(|i| {
                    Normal::new(mean_v[i], cov[i * k + i].sqrt())
                        .expect("validated positive variance")
                })
                .collect();
            TruncSampler::Diagonal {
                normals,
                bounds: support.clone(),
            }
        } else {
            TruncSampler::Joint {
                mean: mean_v.clone(),
                chol_rows,
                bounds: support.clone(),
            }
        };
        trunc.probe()?;

        let dens_prec = precision_rows;
        let dens_mean = mean_v;
        let dens_box = support.clone();
        let log_density = Box::new(move |p: &[f64]| {
            if !in_box(p, &dens_box) {
                return f64::NEG_INFINITY;
            }
            -0.5 * quadform(&dens_prec, &dens_mean, p)
        });
        let sampler = Box::new(move |rng: &mut dyn RngCore| trunc.sample(rng));

        Ok(PriorSpec {
            k,
            log_density,
            sampler,
            support,
            density_upper_bound,
            label: "truncated-gaussian".into(),
        })
    }

    /// Wraps caller-supplied density and sampler closures.
    ///
    /// The caller asserts the [`PriorSpec`] invariants: the sampler stays in
    /// `support`, the density is −∞ outside it, and `density_upper_bound`
    /// really dominates `exp(log_density)`.
    pub fn custom(
        log_density: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        sampler: impl Fn(&mut dyn RngCore) -> Vec<f64> + Send + Sync + 'static,
        support: Vec<(f64, f64)>,
        density_upper_bound: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        validate_bounds(&support)?;
        if !(density_upper_bound.is_finite() && density_upper_bound > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "density upper bound must be finite and positive, \
                 got {density_upper_bound}"
            )));
        }
        Ok(PriorSpec {
            k: support.len(),
            log_density: Box::new(log_density),
            sampler: Box::new(sampler),
            support,
            density_upper_bound,
            label: label.into(),
        })
    }
}

/// Sized view over a possibly unsized random generator, so generic rngs can
/// be passed to the boxed sampler closures.
struct RngShim<'a, R: RngCore + ?Sized>(&'a mut R);

impl<R: RngCore + ?Sized> RngCore for RngShim<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }
}

/// Rejection sampler for a box-truncated Gaussian.
enum TruncSampler {
    /// Independent coordinates: truncate each 1-D marginal separately.
    Diagonal {
        normals: Vec<Normal<f64>>,
        bounds: Vec<(f64, f64)>,
    },
    /// Correlated coordinates: draw jointly, accept if inside the box.
    Joint {
        mean: Vec<f64>,
        chol_rows: Vec<f64>,
        bounds: Vec<(f64, f64)>,
    },
}

impl TruncSampler {
    /// Verifies with a fixed-seed probe that the sampler can actually land
    /// in the box. Runs once at construction so `sample` can loop freely.
    fn probe(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7072_6f62); // independent of user rngs
        match self {
            TruncSampler::Diagonal { normals, bounds } => {
                for (normal, &(lo, hi)) in normals.iter().zip(bounds) {
                    let mut hit = false;
                    for _ in 0..PROBE_ATTEMPTS {
                        let x = normal.sample(&mut rng);
                        if x >= lo && x <= hi {
                            hit = true;
                            break;
                        }
                    }
                    if !hit {
                        return Err(Error::TruncationTooSevere {
                            accepted: 0,
                            proposed: PROBE_ATTEMPTS,
                            min_acceptance: PROBE_MIN_ACCEPTANCE,
                        });
                    }
                }
                Ok(())
            }
            TruncSampler::Joint { .. } => {
                for _ in 0..PROBE_ATTEMPTS {
                    if self.try_joint(&mut rng).is_some() {
                        return Ok(());
                    }
                }
                Err(Error::TruncationTooSevere {
                    accepted: 0,
                    proposed: PROBE_ATTEMPTS,
                    min_acceptance: PROBE_MIN_ACCEPTANCE,
                })
            }
        }
    }

    fn try_joint(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        let TruncSampler::Joint {
            mean,
            chol_rows,
            bounds,
        } = self
        else {
            unreachable!("try_joint called on diagonal sampler");
        };
        let k = mean.len();
        let z: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
        let mut x = mean.clone();
        for i in 0..k {
            // Lower-triangular factor: x_i += Σ_{j<=i} L_ij z_j.
            for j in 0..=i {
                x[i] += chol_rows[i * k + j] * z[j];
            }
        }
        if in_box(&x, bounds) {
            Some(x)
        } else {
            None
        }
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        match self {
            TruncSampler::Diagonal { normals, bounds } => normals
                .iter()
                .zip(bounds)
                .map(|(normal, &(lo, hi))| loop {
                    let x = normal.sample(rng);
                    if x >= lo && x <= hi {
                        break x;
                    }
                })
                .collect(),
            TruncSampler::Joint { .. } => loop {
                if let Some(x) = self.try_joint(rng) {
                    break x;
                }
            },
        }
    }
}

/// (x − m)ᵀ P (x − m) with P row-major.
fn quadform(precision_rows: &[f64], mean: &[f64], x: &[f64]) -> f64 {
    let k = mean.len();
    let mut q = 0.0;
    for i in 0..k {
        let di = x[i] - mean[i];
        let row = &precision_rows[i * k..(i + 1) * k];
        let mut s = 0.0;
        for j in 0..k {
            s += row[j] * (x[j] - mean[j]);
        }
        q += di * s;
    }
    q
}

/// Beta(a, b) log-density at x with the log-normalizer passed in; the a = 1
/// and b = 1 cases avoid 0·log 0 at the endpoints.
fn beta_log_pdf(a: f64, b: f64, lognorm: f64, x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return f64::NEG_INFINITY;
    }
    let left = if a == 1.0 { 0.0 } else { (a - 1.0) * x.ln() };
    let right = if b == 1.0 {
        0.0
    } else {
        (b - 1.0) * (1.0 - x).ln()
    };
    lognorm + left + right
}

fn in_box(p: &[f64], bounds: &[(f64, f64)]) -> bool {
    p.len() == bounds.len()
        && p.iter()
            .zip(bounds)
            .all(|(&x, &(lo, hi))| x >= lo && x <= hi)
}

fn validate_bounds(bounds: &[(f64, f64)]) -> Result<()> {
    if bounds.is_empty() {
        return Err(Error::InvalidParameter(
            "prior support needs at least one dimension".into(),
        ));
    }
    for &(lo, hi) in bounds {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "support interval [{lo}, {hi}] must be finite and nonempty"
            )));
        }
    }
    Ok(())
}
