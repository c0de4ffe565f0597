//! Policy-gradient discovery of digital detuning pulses.

pub mod env;
pub mod network;
pub mod ppo;
pub mod train;

pub use env::{episode_rngs, EnvConfig, ErrorSampling, QubitEnv, RLState, RewardSchedule, StepOutcome};
pub use network::{gaussian_log_prob, Mlp, PolicyNetwork, PolicyOutput};
pub use ppo::{
    clipped_surrogate, gae, ppo_loss_and_grad, ppo_update, rollout, Episode, PPOConfig, PlateauConfig, PpoOptimizer, Sample,
};
pub use train::{
    evaluate, extract_pulse, train, Checkpoint, EvalResult, ExtractedPulse, Phase, StopReason, TrainOutcome,
    TrainRecord,
};
