//! Training loop, evaluation of the open-loop pulse, checkpoints and records.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::env::{EnvConfig, ErrorSampling, QubitEnv};
use super::network::PolicyNetwork;
use super::ppo::{ppo_update, rollout, Episode, PPOConfig, PpoOptimizer, UpdateStats};
use crate::error::{Error, Result};
use crate::qubit::scan::fmt_f64;
use crate::qubit::{final_population, ErrorPair, PulseSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Pretrain,
    Finetune,
}

/// Deterministic pulse read off the policy in the error-free environment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedPulse {
    pub pulse: PulseSequence,
    /// Renormalized detunings in [0, 1].
    pub actions: Vec<f64>,
    /// Final |1> population seen during the rollout.
    pub rollout_population: f64,
}

pub fn extract_pulse(net: &PolicyNetwork, cfg: &EnvConfig) -> Result<ExtractedPulse> {
    let mut env = QubitEnv::new(cfg.clone())?;
    let mut state = env.reset_with_error(ErrorPair::NONE);
    let mut actions = Vec::with_capacity(cfg.n_steps);
    while !env.is_done() {
        let a = net.act_deterministic(&state).action;
        actions.push(a);
        state = env.step(a)?.state;
    }
    let deltas = actions.iter().map(|&a| cfg.detuning(a).clamp(-cfg.field.delta_max(), cfg.field.delta_max())).collect();
    let pulse = PulseSequence::new(cfg.dt(), deltas, cfg.field)?;
    Ok(ExtractedPulse { pulse, actions, rollout_population: env.population() })
}

/// Error points used to score a pulse: an even grid over the sampling range.
pub fn evaluation_errors(cfg: &EnvConfig) -> Vec<ErrorPair> {
    let axis = |r: f64, n: usize| (0..n).map(move |i| -r + 2.0 * r * i as f64 / (n - 1) as f64);
    let f = &cfg.field;
    match cfg.error_sampling {
        ErrorSampling::None => vec![ErrorPair::NONE],
        ErrorSampling::SingleDelta { range } => axis(range, 9).map(|d| ErrorPair::relative(f, d, 0.0)).collect(),
        ErrorSampling::SingleOmega { range } => axis(range, 9).map(|w| ErrorPair::relative(f, 0.0, w)).collect(),
        ErrorSampling::Hybrid { range } => axis(range, 5)
            .flat_map(|d| axis(range, 5).map(move |w| ErrorPair::relative(f, d, w)))
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// Mean episode return of the fixed action sequence over the evaluation errors.
    pub score: f64,
    pub mean_population: f64,
    pub min_population: f64,
    pub nominal_population: f64,
}

impl EvalResult {
    fn better_than(&self, other: &EvalResult) -> bool {
        (self.score, self.mean_population) > (other.score, other.mean_population)
    }
}

/// Replay a fixed action sequence (no feedback) under `err`; returns the
/// episode return and the final population.
fn open_loop_return(actions: &[f64], cfg: &EnvConfig, err: ErrorPair) -> Result<(f64, f64)> {
    let mut env = QubitEnv::new(cfg.clone())?;
    env.reset_with_error(err);
    let mut total = 0.0;
    for &a in actions {
        total += env.step(a)?.reward;
    }
    Ok((total, env.population()))
}

pub fn evaluate(net: &PolicyNetwork, cfg: &EnvConfig) -> Result<EvalResult> {
    let extracted = extract_pulse(net, cfg)?;
    let errors = evaluation_errors(cfg);
    let runs = errors
        .iter()
        .map(|e| open_loop_return(&extracted.actions, cfg, *e))
        .collect::<Result<Vec<_>>>()?;
    let n = runs.len() as f64;
    Ok(EvalResult {
        score: runs.iter().map(|r| r.0).sum::<f64>() / n,
        mean_population: runs.iter().map(|r| r.1).sum::<f64>() / n,
        min_population: runs.iter().map(|r| r.1).fold(f64::INFINITY, f64::min),
        nominal_population: final_population(&extracted.pulse, &ErrorPair::NONE)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub episode: usize,
    pub result: EvalResult,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub episode_rewards: Vec<f64>,
    pub updates: Vec<UpdateStats>,
    pub evaluations: Vec<Evaluation>,
}

impl TrainRecord {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "episode,total_reward")?;
        for (i, r) in self.episode_rewards.iter().enumerate() {
            writeln!(out, "{i},{}", fmt_f64(*r))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum StopReason {
    MaxEpisodes,
    Plateau { episode: usize },
    Diverged { message: String },
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters after the last successful update.
    pub last: PolicyNetwork,
    /// Parameters with the best evaluation seen.
    pub best: PolicyNetwork,
    pub best_eval: EvalResult,
    pub record: TrainRecord,
    pub stop: StopReason,
}

/// Moving-average plateau detector over whole windows of episodes.
struct Plateau {
    last_mean: Option<f64>,
    stale: usize,
}

impl Plateau {
    fn check(&mut self, rewards: &[f64], cfg: &PPOConfig, checked_until: &mut usize) -> bool {
        let p = cfg.plateau;
        if !p.enabled {
            return false;
        }
        let mut stop = false;
        while *checked_until + p.window <= rewards.len() {
            let window = &rewards[*checked_until..*checked_until + p.window];
            *checked_until += p.window;
            let mean = window.iter().sum::<f64>() / p.window as f64;
            if let Some(prev) = self.last_mean {
                if mean - prev < p.tolerance {
                    self.stale += 1;
                } else {
                    self.stale = 0;
                }
            }
            self.last_mean = Some(mean);
            if self.stale >= p.patience && *checked_until >= p.min_episodes {
                stop = true;
            }
        }
        stop
    }
}

/// Run PPO on `env_cfg`. Fine-tuning needs an initial network unless the
/// config allows a fresh start.
pub fn train(env_cfg: &EnvConfig, ppo_cfg: &PPOConfig, phase: Phase, init: Option<PolicyNetwork>) -> Result<TrainOutcome> {
    env_cfg.validate()?;
    ppo_cfg.validate()?;
    let mut net = match (init, phase) {
        (Some(net), _) => net,
        (None, Phase::Finetune) if !ppo_cfg.allow_fresh_finetune => {
            return Err(Error::InvalidParameter("fine-tuning requires a pre-trained checkpoint".into()))
        }
        (None, _) => PolicyNetwork::new(&mut ChaCha8Rng::seed_from_u64(ppo_cfg.seed)),
    };
    if !net.is_finite() {
        return Err(Error::NonFinite("initial network parameter"));
    }
    let mut opt = PpoOptimizer::new(&net, ppo_cfg.learning_rate);
    let mut record = TrainRecord::default();
    let mut best = net.clone();
    let mut best_eval = evaluate(&net, env_cfg)?;
    record.evaluations.push(Evaluation { episode: 0, result: best_eval });
    let mut plateau = Plateau { last_mean: None, stale: 0 };
    let mut checked = 0;
    let mut stop = StopReason::MaxEpisodes;
    let mut episode = 0usize;
    let mut updates = 0usize;

    while episode < ppo_cfg.max_episodes {
        let count = ppo_cfg.batch_episodes.min(ppo_cfg.max_episodes - episode);
        let batch: Vec<Episode> = (episode..episode + count)
            .into_par_iter()
            .map(|e| rollout(&net, env_cfg, ppo_cfg.seed, e as u64))
            .collect::<Result<_>>()?;
        record.episode_rewards.extend(batch.iter().map(Episode::total_reward));
        episode += count;
        match ppo_update(&mut net, &mut opt, &batch, ppo_cfg) {
            Ok(stats) => record.updates.push(stats),
            Err(Error::Diverged(message)) => {
                stop = StopReason::Diverged { message };
                break;
            }
            Err(e) => return Err(e),
        }
        updates += 1;
        if updates % ppo_cfg.eval_every == 0 || episode >= ppo_cfg.max_episodes {
            let result = evaluate(&net, env_cfg)?;
            record.evaluations.push(Evaluation { episode, result });
            if result.better_than(&best_eval) {
                best_eval = result;
                best = net.clone();
            }
        }
        if plateau.check(&record.episode_rewards, ppo_cfg, &mut checked) {
            stop = StopReason::Plateau { episode };
            break;
        }
    }
    Ok(TrainOutcome { last: net, best, best_eval, record, stop })
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub network: PolicyNetwork,
}

impl Checkpoint {
    pub fn new(network: PolicyNetwork) -> Self {
        Self { version: CHECKPOINT_VERSION, network }
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, self).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_reader(input).map_err(|e| Error::Schema(format!("checkpoint: {e}")))?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Schema(format!("unsupported checkpoint version {}", ckpt.version)));
        }
        // re-validate shapes and finiteness
        let n = &ckpt.network;
        super::network::Mlp::from_parts(n.actor.sizes().to_vec(), n.actor.params().to_vec())?;
        super::network::Mlp::from_parts(n.critic.sizes().to_vec(), n.critic.params().to_vec())?;
        if !n.log_std.is_finite() {
            return Err(Error::NonFinite("checkpoint log_std"));
        }
        Ok(ckpt)
    }
}
