//! Thompson sampling for arbitrary priors via racing-based best-arm
//! identification, plus the baselines and experiment harness used to
//! benchmark it.
//!
//! # What problem this solves
//!
//! Thompson sampling needs one draw from the posterior over "which arm is
//! best" per decision. With a conjugate prior that draw is trivial; with an
//! arbitrary prior π it is not. The Gumbel-Max trick converts the draw into
//! an optimization: attach i.i.d. Gumbel perturbations ε to the arms and
//! pick argmaxᵢ (εᵢ + log P(arm i is best)). Those log-probabilities are
//! expectations under π, so the pick is the best arm of a surrogate bandit
//! whose arm values are estimated by importance sampling from a cheap
//! conjugate proposal. Running a fixed-confidence race on that surrogate
//! yields a Thompson-style decision for *any* prior that can be evaluated
//! pointwise, with per-step sample budgets chosen adaptively.
//!
//! # Crate layout
//!
//! * [`gumbel`] — the perturbation machinery.
//! * [`distributions`] — reward families, conjugate easy-prior posteriors
//!   (the proposals), and actual priors ([`PriorSpec`]).
//! * [`racing`] — the anytime confidence threshold and the race itself.
//! * [`smc`] — a sequential-Monte-Carlo baseline over particle sets.
//! * [`agents`] — bandit policies: vanilla conjugate Thompson sampling,
//!   racing Thompson sampling, the SMC baseline, and a uniform-random
//!   control.
//! * [`env`](mod@env) — bandit instances, reward draws, and regret accounting.
//! * [`harness`] — reproducible experiment presets, a runner, and CSV/JSON
//!   writers behind the `racing-bandits` binary.

pub mod agents;
pub mod distributions;
pub mod env;
pub mod error;
pub mod gumbel;
pub mod harness;
pub mod racing;
pub mod smc;

pub use agents::{Agent, RacingTs, RandomAgent, Selection, SmcTs, VanillaTs};
pub use distributions::{ArmPosterior, FamilyKind, PosteriorState, PreparedProposal, PriorSpec};
pub use env::BanditInstance;
pub use error::{Error, Result};
pub use gumbel::{gumbel_max_select, sample_gumbel, GumbelNoise};
pub use harness::{
    run_experiment, summarize, AgentChoice, ExperimentConfig, ExperimentId, OutputFormat,
    Overrides, RunResult, StepRow,
};
pub use racing::{f_eval, m_max, race, threshold_beta, RacingConfig, RacingOutcome, StoppedBy};
pub use smc::ParticleSet;
