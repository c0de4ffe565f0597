//! Episodic qubit-flip environment with renormalized detuning actions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::qubit::{propagate_step, ControlField, DensityMatrix, ErrorPair};

/// Observation: (|rho_22|, previous renormalized detuning, i/N).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RLState {
    pub p: f64,
    pub d_prev: f64,
    pub tau: f64,
}

impl RLState {
    pub const RESET: RLState = RLState { p: 0.0, d_prev: 0.5, tau: 0.0 };

    pub fn to_array(&self) -> [f64; 3] {
        [self.p, self.d_prev, self.tau]
    }
}

/// How the systematic error of an episode is drawn. Ranges are relative:
/// detuning errors in units of delta_max, Rabi errors as a fraction of Omega.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ErrorSampling {
    None,
    SingleDelta { range: f64 },
    SingleOmega { range: f64 },
    Hybrid { range: f64 },
}

impl ErrorSampling {
    pub fn sample<R: Rng>(&self, field: &ControlField, rng: &mut R) -> ErrorPair {
        let mut uniform = |r: f64| if r > 0.0 { rng.gen_range(-r..=r) } else { 0.0 };
        match *self {
            Self::None => ErrorPair::NONE,
            Self::SingleDelta { range } => ErrorPair::relative(field, uniform(range), 0.0),
            Self::SingleOmega { range } => ErrorPair::relative(field, 0.0, uniform(range)),
            Self::Hybrid { range } => {
                let d = uniform(range);
                let w = uniform(range);
                ErrorPair::relative(field, d, w)
            }
        }
    }

    fn range(&self) -> f64 {
        match *self {
            Self::None => 0.0,
            Self::SingleDelta { range } | Self::SingleOmega { range } | Self::Hybrid { range } => range,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RewardSchedule {
    /// |rho_22| - 1 at every step.
    Trivial,
    /// -|d_i - (i-1)/(N-1)|: reward a linear detuning sweep.
    Pretrain,
    /// `constant` at the last step when |rho_22| > threshold, else 0.
    Finetune {
        threshold: f64,
        constant: f64,
        /// Optional extra reward at the first and last step, scaled by how
        /// closely the action follows the linear sweep there.
        #[serde(default)]
        boundary_bonus: Option<f64>,
    },
}

impl RewardSchedule {
    pub fn finetune(threshold: f64) -> Self {
        Self::Finetune { threshold, constant: 1.0, boundary_bonus: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub field: ControlField,
    pub n_steps: usize,
    /// Seconds.
    pub total_time: f64,
    pub error_sampling: ErrorSampling,
    pub reward_schedule: RewardSchedule,
    pub seed: u64,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps < 2 {
            return Err(Error::InvalidParameter(format!("n_steps must be >= 2, got {}", self.n_steps)));
        }
        ensure_finite(self.total_time, "total_time")?;
        if self.total_time <= 0.0 {
            return Err(Error::InvalidParameter(format!("total_time must be > 0, got {}", self.total_time)));
        }
        let range = self.error_sampling.range();
        if !(range.is_finite() && range >= 0.0) {
            return Err(Error::InvalidParameter(format!("error range must be >= 0, got {range}")));
        }
        if let RewardSchedule::Finetune { threshold, constant, boundary_bonus } = self.reward_schedule {
            if !(threshold > 0.0 && threshold < 1.0) {
                return Err(Error::InvalidParameter(format!("threshold must be in (0, 1), got {threshold}")));
            }
            ensure_finite(constant, "finetune constant")?;
            if let Some(b) = boundary_bonus {
                ensure_finite(b, "boundary bonus")?;
            }
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.total_time / self.n_steps as f64
    }

    /// Delta = (2 d - 1) delta_max.
    pub fn detuning(&self, action: f64) -> f64 {
        (2.0 * action - 1.0) * self.field.delta_max()
    }

    /// Target of the linear sweep at 1-based step i.
    fn sweep_target(&self, i: usize) -> f64 {
        (i - 1) as f64 / (self.n_steps - 1) as f64
    }
}

/// Independent random streams for an episode: one for the error draw, one for
/// action noise.
pub fn episode_rngs(seed: u64, episode: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut env = ChaCha8Rng::seed_from_u64(seed);
    env.set_stream(2 * episode);
    let mut policy = ChaCha8Rng::seed_from_u64(seed);
    policy.set_stream(2 * episode + 1);
    (env, policy)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: RLState,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct QubitEnv {
    cfg: EnvConfig,
    rho: DensityMatrix,
    step: usize,
    d_prev: f64,
    err: ErrorPair,
}

impl QubitEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, rho: DensityMatrix::ground(), step: 0, d_prev: 0.5, err: ErrorPair::NONE })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    /// Start an episode with a fixed error.
    pub fn reset_with_error(&mut self, err: ErrorPair) -> RLState {
        self.rho = DensityMatrix::ground();
        self.step = 0;
        self.d_prev = 0.5;
        self.err = err;
        RLState::RESET
    }

    /// Start an episode, drawing its error from the configured sampling.
    pub fn reset<R: Rng>(&mut self, rng: &mut R) -> RLState {
        let err = self.cfg.error_sampling.sample(&self.cfg.field, rng);
        self.reset_with_error(err)
    }

    pub fn error(&self) -> ErrorPair {
        self.err
    }

    pub fn population(&self) -> f64 {
        self.rho.population_excited()
    }

    pub fn rho(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.cfg.n_steps
    }

    pub fn step(&mut self, action: f64) -> Result<StepOutcome> {
        if self.is_done() {
            return Err(Error::EpisodeFinished);
        }
        ensure_finite(action, "action")?;
        let d = action.clamp(0.0, 1.0);
        let delta = self.cfg.detuning(d);
        self.rho = propagate_step(&self.rho, &self.cfg.field, delta, self.cfg.dt(), &self.err)?;
        self.step += 1;
        self.d_prev = d;
        let i = self.step;
        let n = self.cfg.n_steps;
        let p = self.rho.population_excited();
        let done = i == n;
        let reward = match self.cfg.reward_schedule {
            RewardSchedule::Trivial => p - 1.0,
            RewardSchedule::Pretrain => -(d - self.cfg.sweep_target(i)).abs(),
            RewardSchedule::Finetune { threshold, constant, boundary_bonus } => {
                let terminal = if done && p > threshold { constant } else { 0.0 };
                let bonus = match boundary_bonus {
                    Some(b) if i == 1 || done => b * (1.0 - (d - self.cfg.sweep_target(i)).abs()),
                    _ => 0.0,
                };
                terminal + bonus
            }
        };
        let state = RLState { p, d_prev: d, tau: i as f64 / n as f64 };
        Ok(StepOutcome { state, reward, done })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cfg(schedule: RewardSchedule) -> EnvConfig {
        let field = ControlField::from_mhz(20.0, 1.5).unwrap();
        EnvConfig {
            field,
            n_steps: 20,
            total_time: PI / field.omega(),
            error_sampling: ErrorSampling::None,
            reward_schedule: schedule,
            seed: 1,
        }
    }

    #[test]
    fn reset_state() {
        let mut env = QubitEnv::new(cfg(RewardSchedule::Trivial)).unwrap();
        let (mut rng, _) = episode_rngs(3, 0);
        assert_eq!(env.reset(&mut rng), RLState { p: 0.0, d_prev: 0.5, tau: 0.0 });
    }

    #[test]
    fn pretrain_first_step_rewards() {
        let mut env = QubitEnv::new(cfg(RewardSchedule::Pretrain)).unwrap();
        env.reset_with_error(ErrorPair::NONE);
        assert_eq!(env.step(0.0).unwrap().reward, 0.0);
        env.reset_with_error(ErrorPair::NONE);
        assert_eq!(env.step(1.0).unwrap().reward, -1.0);
    }

    #[test]
    fn trivial_schedule_on_pi_pulse() {
        let mut env = QubitEnv::new(cfg(RewardSchedule::Trivial)).unwrap();
        env.reset_with_error(ErrorPair::NONE);
        let mut last = None;
        for i in 0..20 {
            let out = env.step(0.5).unwrap();
            assert!((out.state.tau - (i + 1) as f64 / 20.0).abs() < 1e-15);
            assert!((-1.0..=0.0).contains(&out.reward));
            last = Some(out);
        }
        let last = last.unwrap();
        assert!(last.done);
        assert!(last.reward.abs() < 1e-10);
        assert!(matches!(env.step(0.5), Err(Error::EpisodeFinished)));
    }

    #[test]
    fn finetune_is_terminal_only() {
        let mut env = QubitEnv::new(cfg(RewardSchedule::finetune(0.997))).unwrap();
        env.reset_with_error(ErrorPair::NONE);
        let rewards: Vec<f64> = (0..20).map(|_| env.step(0.5).unwrap().reward).collect();
        assert!(rewards[..19].iter().all(|&r| r == 0.0));
        assert_eq!(rewards[19], 1.0);
    }

    #[test]
    fn error_draws_stay_in_range() {
        let c = cfg(RewardSchedule::Trivial);
        let (mut rng, _) = episode_rngs(5, 7);
        for _ in 0..500 {
            let e = ErrorSampling::Hybrid { range: 0.1 }.sample(&c.field, &mut rng);
            assert!(e.delta_omega.abs() <= 0.1);
            assert!(e.delta_delta.abs() <= 0.1 * c.field.delta_max() * (1.0 + 1e-15));
            let e = ErrorSampling::SingleOmega { range: 0.2 }.sample(&c.field, &mut rng);
            assert!(e.delta_omega.abs() <= 0.2 && e.delta_delta == 0.0);
        }
    }

    #[test]
    fn identical_seed_and_actions_are_deterministic() {
        let mut c = cfg(RewardSchedule::Trivial);
        c.error_sampling = ErrorSampling::Hybrid { range: 0.1 };
        let run = || {
            let mut env = QubitEnv::new(c.clone()).unwrap();
            let (mut rng, _) = episode_rngs(9, 4);
            env.reset(&mut rng);
            (0..20).map(|i| env.step(i as f64 / 19.0).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn invalid_configs() {
        let mut c = cfg(RewardSchedule::Trivial);
        c.n_steps = 1;
        assert!(QubitEnv::new(c).is_err());
        assert!(QubitEnv::new(cfg(RewardSchedule::finetune(1.0))).is_err());
    }
}
