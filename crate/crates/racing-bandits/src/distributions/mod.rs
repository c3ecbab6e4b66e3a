//! Reward families, easy-prior posteriors, and actual priors.
//!
//! Three layers cooperate here:
//!
//! * [`family`] — what an arm's reward distribution looks like;
//! * [`posterior`] — the conjugate "easy prior" posterior per arm, which the
//!   racing sampler uses as its proposal distribution;
//! * [`prior`] — the actual prior over the arm-parameter vector, which may
//!   be anything with a sampler, a pointwise density, and a density bound.

pub mod family;
pub mod posterior;
pub mod prior;

pub use family::FamilyKind;
pub use posterior::{ArmPosterior, PosteriorState, PreparedProposal};
pub use prior::PriorSpec;
