//! Learning agents: DFTD3 (TD3 with a diffusion actor) and the MDDPG and
//! DDQN baselines, plus the fixed equal-split heuristic.

mod critic;
pub mod ddqn;
pub mod dftd3;
pub mod diffusion;
pub mod mddpg;
pub mod replay;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::env::{Action, Env, RawAction};
use crate::neural::Checkpoint;
use crate::rng::{derive_seed, SimRng};
use crate::{Error, Result};

pub use critic::Critic;
pub use ddqn::{ddqn_train, Ddqn};
pub use dftd3::{dftd3_train, Dftd3};
pub use diffusion::{BetaSchedule, SampleMode};
pub use mddpg::{mddpg_train, Mddpg};
pub use replay::{Batch, FlatAction, ReplayBuffer, Transition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparams {
    pub batch: usize,
    pub tau: f64,
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub exploration_sd: f64,
    /// Post-squash exploration sd for the diffusion agent. The chain's own
    /// sampling already explores; clipped noise on top pins shares at
    /// exactly 0, which starves a group.
    pub diffusion_exploration_sd: f64,
    /// Multiplier applied to the exploration sd after every episode.
    pub exploration_decay: f64,
    pub smoothing_sd: f64,
    pub smoothing_clip: f64,
    pub actor_delay: usize,
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub denoise_steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    /// Multiplies rewards before they enter the replay buffer.
    pub reward_scale: f64,
    /// Weight of the mean squared pre-squash actor output in the actor
    /// loss (continuous agents). Keeps the tanh squash out of saturation.
    pub action_l2: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            batch: 128,
            tau: 0.005,
            gamma: 0.95,
            actor_lr: 1e-4,
            critic_lr: 3e-4,
            exploration_sd: 0.1,
            diffusion_exploration_sd: 0.0,
            exploration_decay: 0.999,
            smoothing_sd: 0.2,
            smoothing_clip: 0.5,
            actor_delay: 10,
            episodes: 500,
            steps_per_episode: 100,
            denoise_steps: 5,
            beta_min: 1e-4,
            beta_max: 0.05,
            buffer_capacity: 100_000,
            hidden: vec![128, 128],
            reward_scale: 1.0,
            action_l2: 0.01,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay: 0.99,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau", self.tau),
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("beta_min", self.beta_min),
            ("beta_max", self.beta_max),
            ("reward_scale", self.reward_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("agent.{name} must be > 0, got {v}")));
            }
        }
        let unit = [
            ("tau", self.tau),
            ("gamma", self.gamma),
            ("exploration_decay", self.exploration_decay),
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
            ("epsilon_decay", self.epsilon_decay),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("agent.{name} must lie in [0, 1], got {v}")));
            }
        }
        for (name, v) in [
            ("exploration_sd", self.exploration_sd),
            ("diffusion_exploration_sd", self.diffusion_exploration_sd),
            ("smoothing_sd", self.smoothing_sd),
            ("smoothing_clip", self.smoothing_clip),
            ("action_l2", self.action_l2),
        ] {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("agent.{name} must be ≥ 0, got {v}")));
            }
        }
        if self.batch == 0 || self.actor_delay == 0 || self.steps_per_episode == 0 || self.denoise_steps == 0 {
            return Err(Error::Config(
                "agent.batch, actor_delay, steps_per_episode and denoise_steps must be ≥ 1".into(),
            ));
        }
        if self.buffer_capacity < self.batch {
            return Err(Error::Config("agent.buffer_capacity must be ≥ batch".into()));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config("agent.hidden needs ≥ 1 non-zero width".into()));
        }
        BetaSchedule::linear(self.denoise_steps, self.beta_min, self.beta_max)?;
        Ok(())
    }

    pub fn schedule(&self) -> Result<BetaSchedule> {
        BetaSchedule::linear(self.denoise_steps, self.beta_min, self.beta_max)
    }
}

/// A trained (or fixed) decision rule evaluated greedily.
pub trait Policy {
    fn name(&self) -> &'static str;

    /// Greedy action for the normalized state features.
    fn greedy(&self, features: &[f64], env: &Env) -> Result<Action>;

    fn checkpoint(&self) -> Option<Checkpoint> {
        None
    }
}

/// Fixed model, bandwidth split evenly over the groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EqualSplit {
    pub model: usize,
}

impl Policy for EqualSplit {
    fn name(&self) -> &'static str {
        "equal-split"
    }

    fn greedy(&self, _features: &[f64], env: &Env) -> Result<Action> {
        let s = env.scenario();
        Ok(Action::equal_split(s.model_count(), self.model, s.group_count(), s.net.bandwidth_mhz))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub mean_reward: f64,
    pub mean_latency_s: f64,
    pub critic_loss: f64,
    pub actor_grad_norm: f64,
    pub epsilon_or_noise: f64,
}

pub type TrainLog = Vec<EpisodeLog>;

pub fn write_train_log<W: Write>(log: &[EpisodeLog], out: W) -> Result<()> {
    use crate::harness::fmt_num;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "episode",
        "mean_reward",
        "mean_latency_s",
        "critic_loss",
        "actor_grad_norm",
        "epsilon_or_noise",
    ])?;
    for e in log {
        w.write_record([
            e.episode.to_string(),
            fmt_num(e.mean_reward),
            fmt_num(e.mean_latency_s),
            fmt_num(e.critic_loss),
            fmt_num(e.actor_grad_norm),
            fmt_num(e.epsilon_or_noise),
        ])?;
    }
    w.flush().map_err(|e| Error::io("train log", e))?;
    Ok(())
}

/// Seed of the environment at the start of `episode`.
pub fn episode_seed(seed: u64, episode: usize) -> u64 {
    derive_seed(derive_seed(seed, 0xE815_0DE5), episode as u64)
}

pub(crate) fn agent_rng(seed: u64) -> SimRng {
    crate::rng::seeded(derive_seed(seed, 0xA6E7))
}

/// Per-update diagnostics.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct UpdateStats {
    pub critic_loss: Option<f64>,
    pub actor_grad_norm: Option<f64>,
}

/// The pieces of an off-policy learner the shared loop needs.
pub(crate) trait Learner {
    type A: FlatAction;

    fn act(&mut self, features: &[f64], env: &Env) -> Result<(Self::A, Action)>;
    fn buffer(&mut self) -> &mut ReplayBuffer<Self::A>;
    fn update(&mut self) -> Result<UpdateStats>;
    fn end_episode(&mut self);
    fn exploration(&self) -> f64;
}

pub(crate) fn train_loop<L: Learner>(learner: &mut L, env: &mut Env, hp: &Hyperparams, seed: u64) -> Result<TrainLog> {
    let net = env.scenario().net.clone();
    let mut log = Vec::with_capacity(hp.episodes);
    for episode in 0..hp.episodes {
        let mut features = env.reset(episode_seed(seed, episode)).features(&net);
        let mut reward_sum = 0.0;
        let mut latency_sum = 0.0;
        let (mut loss_sum, mut loss_n, mut grad_sum, mut grad_n) = (0.0, 0, 0.0, 0);
        let mut picks = vec![0usize; env.model_count()];
        let mut penalized = 0;
        for _ in 0..hp.steps_per_episode {
            let (stored, action) = learner.act(&features, env)?;
            let step = env.step(&action)?;
            picks[step.info.model] += 1;
            penalized += usize::from(step.info.penalized);
            let next = step.next_state.features(&net);
            reward_sum += step.reward;
            latency_sum += step.info.latency_s;
            learner.buffer().push(Transition {
                state: features,
                action: stored,
                reward: step.reward * hp.reward_scale,
                next_state: next.clone(),
            });
            features = next;
            if learner.buffer().len() >= hp.batch {
                let s = learner.update()?;
                if let Some(l) = s.critic_loss {
                    loss_sum += l;
                    loss_n += 1;
                }
                if let Some(g) = s.actor_grad_norm {
                    grad_sum += g;
                    grad_n += 1;
                }
            }
        }
        let steps = hp.steps_per_episode as f64;
        let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
        log.push(EpisodeLog {
            episode,
            mean_reward: reward_sum / steps,
            mean_latency_s: latency_sum / steps,
            critic_loss: mean(loss_sum, loss_n),
            actor_grad_norm: mean(grad_sum, grad_n),
            epsilon_or_noise: learner.exploration(),
        });
        log::debug!("episode {episode}: model picks {picks:?}, {penalized} penalized");
        if (episode + 1) % 50 == 0 {
            log::info!(
                "episode {} mean reward {:.4} loss {:.4}",
                episode + 1,
                reward_sum / steps,
                mean(loss_sum, loss_n)
            );
        }
        learner.end_episode();
    }
    Ok(log)
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn raw_to_action(raw: &[f64], env: &Env) -> Action {
    env.decode(&RawAction(raw.to_vec()))
}
