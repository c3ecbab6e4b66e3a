//! Minimal library usage: a racing Thompson-sampling agent on a 3-armed
//! Bernoulli bandit with a flat prior. Mirrors the README example.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use racing_bandits::{Agent, BanditInstance, FamilyKind, PriorSpec, RacingConfig, RacingTs};

fn main() -> racing_bandits::Result<()> {
    let env = BanditInstance::new(FamilyKind::Bernoulli, vec![0.3, 0.5, 0.7])?;
    let prior = Arc::new(PriorSpec::uniform_box(&[(0.0, 1.0); 3])?);
    let racing = RacingTs::new(prior, FamilyKind::Bernoulli, RacingConfig::new(0.1, 0.1)?)?;
    let mut agent = Agent::Racing(racing);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut pulls = Vec::new();
    for _ in 0..200 {
        let selection = agent.select_arm(&mut rng)?;
        let reward = env.pull(selection.arm, &mut rng)?;
        agent.observe(selection.arm, reward)?;
        pulls.push(selection.arm);
    }

    println!("cumulative regret: {:.2}", env.cumulative_regret(&pulls));
    Ok(())
}
