//! Clipped-surrogate PPO with generalized advantage estimation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::env::{episode_rngs, EnvConfig, QubitEnv, RLState};
use super::network::{gaussian_log_prob, sigmoid_and_slope, PolicyNetwork};
use crate::error::{Error, Result};

/// Stop when the moving-average episode reward stops improving.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauConfig {
    pub enabled: bool,
    /// Episodes per averaging window.
    pub window: usize,
    /// Minimum improvement between consecutive windows.
    pub tolerance: f64,
    /// Consecutive non-improving windows before stopping.
    pub patience: usize,
    /// No plateau stop before this many episodes.
    pub min_episodes: usize,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        Self { enabled: true, window: 200, tolerance: 1e-3, patience: 5, min_episodes: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PPOConfig {
    pub batch_episodes: usize,
    pub learning_rate: f64,
    pub clip_ratio: f64,
    pub discount: f64,
    pub gae_lambda: f64,
    pub epochs_per_update: usize,
    pub entropy_coeff: f64,
    pub value_coeff: f64,
    pub max_episodes: usize,
    pub seed: u64,
    /// Samples per gradient step; 0 means the whole batch.
    pub minibatch_size: usize,
    pub normalize_advantages: bool,
    /// Global gradient-norm clip; non-positive disables it.
    pub max_grad_norm: f64,
    /// Evaluate the deterministic pulse every this many updates.
    pub eval_every: usize,
    pub plateau: PlateauConfig,
    /// Allow a fine-tune phase to start from a fresh network.
    pub allow_fresh_finetune: bool,
}

impl Default for PPOConfig {
    fn default() -> Self {
        Self {
            batch_episodes: 20,
            learning_rate: 1e-4,
            clip_ratio: 0.2,
            discount: 1.0,
            gae_lambda: 0.95,
            epochs_per_update: 10,
            entropy_coeff: 0.01,
            value_coeff: 0.5,
            max_episodes: 20_000,
            seed: 0,
            minibatch_size: 64,
            normalize_advantages: true,
            max_grad_norm: 0.5,
            eval_every: 5,
            plateau: PlateauConfig::default(),
            allow_fresh_finetune: false,
        }
    }
}

impl PPOConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.batch_episodes == 0 {
            return bad("batch_episodes must be >= 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.clip_ratio > 0.0 && self.clip_ratio < 1.0) {
            return bad(format!("clip_ratio must be in (0, 1), got {}", self.clip_ratio));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return bad(format!("discount must be in (0, 1], got {}", self.discount));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad(format!("gae_lambda must be in [0, 1], got {}", self.gae_lambda));
        }
        if self.epochs_per_update == 0 || self.eval_every == 0 {
            return bad("epochs_per_update and eval_every must be >= 1".into());
        }
        if !(self.entropy_coeff.is_finite() && self.value_coeff.is_finite() && self.max_grad_norm.is_finite()) {
            return Err(Error::NonFinite("PPO coefficient"));
        }
        if self.plateau.window == 0 {
            return bad("plateau window must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: RLState,
    pub raw_action: f64,
    pub action: f64,
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub index: u64,
    pub transitions: Vec<Transition>,
    pub final_population: f64,
}

impl Episode {
    pub fn total_reward(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }
}

/// One stochastic episode; its random streams depend only on (seed, index).
pub fn rollout(net: &PolicyNetwork, cfg: &EnvConfig, seed: u64, index: u64) -> Result<Episode> {
    let (mut env_rng, mut policy_rng) = episode_rngs(seed, index);
    let mut env = QubitEnv::new(cfg.clone())?;
    let mut state = env.reset(&mut env_rng);
    let mut transitions = Vec::with_capacity(cfg.n_steps);
    loop {
        let out = net.forward(&state, Some(&mut policy_rng));
        let step = env.step(out.action)?;
        transitions.push(Transition {
            state,
            raw_action: out.raw_action,
            action: out.action,
            log_prob: out.log_prob,
            value: out.value,
            reward: step.reward,
        });
        state = step.state;
        if step.done {
            break;
        }
    }
    Ok(Episode { index, transitions, final_population: env.population() })
}

/// Advantages and value targets; the value after the last step is zero.
pub fn gae(episode: &Episode, discount: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = episode.transitions.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for k in (0..n).rev() {
        let t = &episode.transitions[k];
        let next_value = if k + 1 < n { episode.transitions[k + 1].value } else { 0.0 };
        let delta = t.reward + discount * next_value - t.value;
        running = delta + discount * lambda * running;
        adv[k] = running;
    }
    let returns = adv.iter().zip(&episode.transitions).map(|(a, t)| a + t.value).collect();
    (adv, returns)
}

/// One training sample for the surrogate objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub state: RLState,
    pub raw_action: f64,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub target: f64,
}

pub fn build_samples(episodes: &[Episode], cfg: &PPOConfig) -> Vec<Sample> {
    let mut samples = Vec::new();
    for ep in episodes {
        let (adv, ret) = gae(ep, cfg.discount, cfg.gae_lambda);
        for ((t, a), r) in ep.transitions.iter().zip(adv).zip(ret) {
            samples.push(Sample {
                state: t.state,
                raw_action: t.raw_action,
                old_log_prob: t.log_prob,
                advantage: a,
                target: r,
            });
        }
    }
    if cfg.normalize_advantages && samples.len() > 1 {
        let n = samples.len() as f64;
        let mean = samples.iter().map(|s| s.advantage).sum::<f64>() / n;
        let var = samples.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        for s in &mut samples {
            s.advantage = if std > 1e-12 { (s.advantage - mean) / (std + 1e-8) } else { 0.0 };
        }
    }
    samples
}

/// min(r A, clip(r, 1 - eps, 1 + eps) A) and its derivative in r.
pub fn clipped_surrogate(ratio: f64, advantage: f64, eps: f64) -> (f64, f64) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * advantage;
    if unclipped <= clipped {
        (unclipped, advantage)
    } else {
        (clipped, 0.0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Negative mean clipped surrogate.
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub total: f64,
    pub clip_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub actor: Vec<f64>,
    pub critic: Vec<f64>,
    pub log_std: f64,
}

/// Total loss -surrogate + c_v (V - target)^2 - c_e H and its exact gradient.
pub fn ppo_loss_and_grad(net: &PolicyNetwork, samples: &[Sample], cfg: &PPOConfig) -> (LossBreakdown, Gradients) {
    let mut grads = Gradients {
        actor: vec![0.0; net.actor.params().len()],
        critic: vec![0.0; net.critic.params().len()],
        log_std: 0.0,
    };
    let n = samples.len().max(1) as f64;
    let inv_var = (-2.0 * net.log_std).exp();
    let mut policy = 0.0;
    let mut value = 0.0;
    let mut clipped = 0usize;
    for s in samples {
        let input = s.state.to_array();
        let (z, actor_cache) = net.actor.forward(&input);
        let (mu, slope) = sigmoid_and_slope(z);
        let log_prob = gaussian_log_prob(s.raw_action, mu, net.log_std);
        let ratio = (log_prob - s.old_log_prob).exp();
        let (surr, d_ratio) = clipped_surrogate(ratio, s.advantage, cfg.clip_ratio);
        if (ratio - 1.0).abs() > cfg.clip_ratio {
            clipped += 1;
        }
        policy -= surr / n;
        // d(-surr/n)/d(log_prob) = -ratio * d_ratio / n
        let d_logp = -ratio * d_ratio / n;
        let diff = s.raw_action - mu;
        let d_mu = d_logp * diff * inv_var;
        net.actor.backward(&actor_cache, d_mu * slope, &mut grads.actor);
        grads.log_std += d_logp * (diff * diff * inv_var - 1.0);

        let (v, critic_cache) = net.critic.forward(&input);
        let err = v - s.target;
        value += err * err / n;
        net.critic.backward(&critic_cache, cfg.value_coeff * 2.0 * err / n, &mut grads.critic);
    }
    let entropy = net.log_std + 0.5 * (1.0 + (2.0 * std::f64::consts::PI).ln());
    grads.log_std -= cfg.entropy_coeff;
    let total = policy + cfg.value_coeff * value - cfg.entropy_coeff * entropy;
    let breakdown = LossBreakdown { policy, value, entropy, total, clip_fraction: clipped as f64 / n };
    (breakdown, grads)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    /// Descend along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

/// Optimizer state for the actor, the critic and the log-spread.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoOptimizer {
    actor: Adam,
    critic: Adam,
    log_std: Adam,
    updates: u64,
}

impl PpoOptimizer {
    pub fn new(net: &PolicyNetwork, lr: f64) -> Self {
        Self {
            actor: Adam::new(net.actor.params().len(), lr),
            critic: Adam::new(net.critic.params().len(), lr),
            log_std: Adam::new(1, lr),
            updates: 0,
        }
    }
}

pub const LOG_STD_BOUNDS: (f64, f64) = (-5.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    /// Loss of the first minibatch pass, before any parameter change.
    pub initial: LossBreakdown,
    pub last: LossBreakdown,
    pub log_std: f64,
}

/// Several epochs of minibatch Adam steps on the clipped objective.
/// A non-finite loss or gradient aborts without touching `net`.
pub fn ppo_update(
    net: &mut PolicyNetwork,
    opt: &mut PpoOptimizer,
    episodes: &[Episode],
    cfg: &PPOConfig,
) -> Result<UpdateStats> {
    let samples = build_samples(episodes, cfg);
    if samples.is_empty() {
        return Err(Error::InvalidParameter("PPO update needs at least one transition".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0000_0000);
    rng.set_stream(opt.updates);
    opt.updates += 1;
    let mb = if cfg.minibatch_size == 0 { samples.len() } else { cfg.minibatch_size.min(samples.len()) };
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut candidate = net.clone();
    let mut initial = None;
    let mut last = LossBreakdown::default();
    for _ in 0..cfg.epochs_per_update {
        order.shuffle(&mut rng);
        for chunk in order.chunks(mb) {
            let batch: Vec<Sample> = chunk.iter().map(|&i| samples[i]).collect();
            let (loss, mut g) = ppo_loss_and_grad(&candidate, &batch, cfg);
            let norm = (g.actor.iter().chain(&g.critic).map(|x| x * x).sum::<f64>() + g.log_std * g.log_std).sqrt();
            if !loss.total.is_finite() || !norm.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite PPO loss (policy {}, value {}, gradient norm {norm})",
                    loss.policy, loss.value
                )));
            }
            if cfg.max_grad_norm > 0.0 && norm > cfg.max_grad_norm {
                let scale = cfg.max_grad_norm / norm;
                g.actor.iter_mut().chain(g.critic.iter_mut()).for_each(|x| *x *= scale);
                g.log_std *= scale;
            }
            initial.get_or_insert(loss);
            last = loss;
            opt.actor.step(candidate.actor.params_mut(), &g.actor);
            opt.critic.step(candidate.critic.params_mut(), &g.critic);
            let mut ls = [candidate.log_std];
            opt.log_std.step(&mut ls, &[g.log_std]);
            candidate.log_std = ls[0].clamp(LOG_STD_BOUNDS.0, LOG_STD_BOUNDS.1);
        }
    }
    if !candidate.is_finite() {
        return Err(Error::Diverged("non-finite parameters after PPO update".into()));
    }
    *net = candidate;
    Ok(UpdateStats { initial: initial.expect("at least one minibatch"), last, log_std: net.log_std })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drl::env::{ErrorSampling, RewardSchedule};
    use crate::qubit::ControlField;
    use rand::Rng;
    use std::f64::consts::PI;

    fn env_cfg(schedule: RewardSchedule) -> EnvConfig {
        let field = ControlField::from_mhz(20.0, 1.5).unwrap();
        EnvConfig {
            field,
            n_steps: 20,
            total_time: PI / field.omega(),
            error_sampling: ErrorSampling::None,
            reward_schedule: schedule,
            seed: 0,
        }
    }

    #[test]
    fn clipping_arithmetic() {
        assert_eq!(clipped_surrogate(1.5, 2.0, 0.2), (1.2 * 2.0, 0.0));
        assert_eq!(clipped_surrogate(0.5, 2.0, 0.2), (1.0, 2.0));
        assert_eq!(clipped_surrogate(0.5, -1.0, 0.2), (-0.8, 0.0));
        assert_eq!(clipped_surrogate(1.1, -1.0, 0.2), (-1.1, -1.0));
    }

    #[test]
    fn gae_with_unit_discount_and_lambda_is_return_to_go() {
        let cfg = env_cfg(RewardSchedule::Pretrain);
        let net = PolicyNetwork::new(&mut ChaCha8Rng::seed_from_u64(0));
        let ep = rollout(&net, &cfg, 1, 0).unwrap();
        let (adv, ret) = gae(&ep, 1.0, 1.0);
        let mut to_go = 0.0;
        for k in (0..ep.transitions.len()).rev() {
            to_go += ep.transitions[k].reward;
            assert!((ret[k] - to_go).abs() < 1e-12);
            assert!((adv[k] - (to_go - ep.transitions[k].value)).abs() < 1e-12);
        }
    }

    #[test]
    fn rollouts_are_seeded() {
        let mut cfg = env_cfg(RewardSchedule::Trivial);
        cfg.error_sampling = ErrorSampling::Hybrid { range: 0.1 };
        let net = PolicyNetwork::new(&mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(rollout(&net, &cfg, 5, 3).unwrap(), rollout(&net, &cfg, 5, 3).unwrap());
        assert_ne!(rollout(&net, &cfg, 5, 3).unwrap(), rollout(&net, &cfg, 5, 4).unwrap());
        assert_eq!(rollout(&net, &cfg, 5, 3).unwrap().transitions.len(), 20);
    }

    fn random_samples(net: &PolicyNetwork, rng: &mut ChaCha8Rng, n: usize) -> Vec<Sample> {
        (0..n)
            .map(|_| {
                let state = RLState { p: rng.gen(), d_prev: rng.gen(), tau: rng.gen() };
                let mu = net.mean(&state);
                let raw = mu + 0.3 * rng.gen_range(-1.0..1.0);
                // old policy slightly different so ratios differ from 1 but stay unclipped
                let old = gaussian_log_prob(raw, mu + 0.01 * rng.gen_range(-1.0..1.0), net.log_std);
                Sample { state, raw_action: raw, old_log_prob: old, advantage: rng.gen_range(-1.0..1.0), target: rng.gen_range(-1.0..0.0) }
            })
            .collect()
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut net = PolicyNetwork::new(&mut rng);
        // larger output weights so the actor gradient is not tiny
        net.actor.params_mut().iter_mut().for_each(|p| *p *= 3.0);
        let cfg = PPOConfig::default();
        let samples = random_samples(&net, &mut rng, 12);
        let (_, g) = ppo_loss_and_grad(&net, &samples, &cfg);
        let loss = |n: &PolicyNetwork| ppo_loss_and_grad(n, &samples, &cfg).0.total;
        let h = 1e-6;
        let check = |fd: f64, an: f64, what: String| {
            assert!((fd - an).abs() <= 1e-4 * an.abs().max(1e-6), "{what}: fd {fd} vs {an}");
        };
        for k in (0..net.actor.params().len()).step_by(37) {
            let mut up = net.clone();
            up.actor.params_mut()[k] += h;
            let mut dn = net.clone();
            dn.actor.params_mut()[k] -= h;
            check((loss(&up) - loss(&dn)) / (2.0 * h), g.actor[k], format!("actor {k}"));
        }
        for k in (0..net.critic.params().len()).step_by(41) {
            let mut up = net.clone();
            up.critic.params_mut()[k] += h;
            let mut dn = net.clone();
            dn.critic.params_mut()[k] -= h;
            check((loss(&up) - loss(&dn)) / (2.0 * h), g.critic[k], format!("critic {k}"));
        }
        let mut up = net.clone();
        up.log_std += h;
        let mut dn = net.clone();
        dn.log_std -= h;
        check((loss(&up) - loss(&dn)) / (2.0 * h), g.log_std, "log_std".into());
    }

    #[test]
    fn zero_advantages_leave_actor_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = PolicyNetwork::new(&mut rng);
        let mut samples = random_samples(&net, &mut rng, 10);
        samples.iter_mut().for_each(|s| s.advantage = 0.0);
        let (_, g) = ppo_loss_and_grad(&net, &samples, &PPOConfig::default());
        assert!(g.actor.iter().all(|&x| x == 0.0));
        assert_eq!(g.log_std, -PPOConfig::default().entropy_coeff);
    }

    #[test]
    fn one_step_bandit_learns_optimum() {
        // N = 2 with a pretrain reward: the best first action is 0, the best second is 1.
        let mut cfg = env_cfg(RewardSchedule::Pretrain);
        cfg.n_steps = 2;
        let ppo = PPOConfig { learning_rate: 3e-3, ..PPOConfig::default() };
        let mut net = PolicyNetwork::new(&mut ChaCha8Rng::seed_from_u64(1));
        let mut opt = PpoOptimizer::new(&net, ppo.learning_rate);
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        // exhaustive search over the first action for the best immediate reward
        let best_first = grid
            .iter()
            .copied()
            .max_by(|a, b| (-(a - 0.0f64).abs()).total_cmp(&(-(b - 0.0f64).abs())))
            .unwrap();
        for u in 0..150u64 {
            let eps: Vec<Episode> =
                (0..ppo.batch_episodes as u64).map(|e| rollout(&net, &cfg, 2, u * 100 + e).unwrap()).collect();
            ppo_update(&mut net, &mut opt, &eps, &ppo).unwrap();
        }
        let first = net.act_deterministic(&RLState::RESET).action;
        assert!((first - best_first).abs() < 0.05, "first action {first}");
    }
}
