//! Monte Carlo harness: synthetic submissions, a scripted agent and critic
//! with planted error rates, and paired experiment runs.

mod attacks;
mod audit;
mod backend;
mod behavior;
pub mod catalog;
mod experiment;
mod generator;

pub use attacks::{inject_prompt_attack, AttackError, AttackPayload, ATTACK_PAYLOADS};
pub use audit::{adjudicate, audit_draft, compliant, decision_matches, Defect};
pub use backend::SimulatedBackend;
pub use behavior::{AgentModel, BehaviorError, BehaviorModel, CatchRates, CriticModel, PerTier};
pub use experiment::{
    run_experiment, run_seed, score_case, ExperimentConfig, ExperimentError, ReviewerPolicy,
};
pub use generator::{
    case_id, generate_case, generate_cases, generate_specs, tier_profile, CaseMix, PlantRates, ScenarioSpec,
    TierMix, TierProfile,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Independent RNG stream for one `(seed, case, purpose)` triple, so paired
/// systems draw the same agent behavior for the same case.
pub fn stream(seed: u64, case_id: &str, tag: &str) -> ChaCha8Rng {
    let digest = Sha256::digest(format!("{seed}:{case_id}:{tag}").as_bytes());
    ChaCha8Rng::from_seed(digest.into())
}
