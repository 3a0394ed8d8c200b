//! TD3 whose actor is a conditional denoising chain.

use rand::Rng;
use rand_distr::StandardNormal;

use super::critic::Critic;
use super::diffusion::{chain_backward_with_pre, diffuse_sample_batch, reverse_chain, BetaSchedule, ChainNoise, SampleMode};
use super::replay::{Batch, ReplayBuffer};
use super::{agent_rng, l2, raw_to_action, train_loop, Hyperparams, Learner, Policy, TrainLog, UpdateStats};
use crate::env::{Action, Env};
use crate::neural::{Adam, Checkpoint, Head, Mlp};
use crate::rng::{seeded, SimRng};
use crate::Result;

#[derive(Debug, Clone)]
pub struct Dftd3 {
    hp: Hyperparams,
    schedule: BetaSchedule,
    state_dim: usize,
    action_dim: usize,
    pub actor: Mlp,
    pub actor_target: Mlp,
    actor_opt: Adam,
    pub critics: [Critic; 2],
    buffer: ReplayBuffer<Vec<f64>>,
    rng: SimRng,
    noise_sd: f64,
    updates: u64,
}

impl Dftd3 {
    pub fn new(state_dim: usize, action_dim: usize, hp: &Hyperparams, seed: u64) -> Result<Self> {
        hp.validate()?;
        let mut rng = agent_rng(seed);
        let mut sizes = vec![action_dim + state_dim + 1];
        sizes.extend_from_slice(&hp.hidden);
        sizes.push(action_dim);
        let actor = Mlp::new(&sizes, Head::Identity, &mut rng)?;
        let c1 = Critic::new(state_dim, action_dim, &hp.hidden, hp.critic_lr, &mut rng)?;
        let c2 = Critic::new(state_dim, action_dim, &hp.hidden, hp.critic_lr, &mut rng)?;
        Ok(Dftd3 {
            schedule: hp.schedule()?,
            state_dim,
            action_dim,
            actor_target: actor.clone(),
            actor_opt: Adam::new(actor.param_count(), hp.actor_lr),
            actor,
            critics: [c1, c2],
            buffer: ReplayBuffer::new(hp.buffer_capacity),
            rng,
            noise_sd: hp.diffusion_exploration_sd,
            updates: 0,
            hp: hp.clone(),
        })
    }

    pub fn for_env(env: &Env, hp: &Hyperparams, seed: u64) -> Result<Self> {
        Self::new(env.state_dim(), env.action_dim(), hp, seed)
    }

    pub fn schedule(&self) -> &BetaSchedule {
        &self.schedule
    }

    pub fn exploration_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn replay(&mut self) -> &mut ReplayBuffer<Vec<f64>> {
        &mut self.buffer
    }

    pub fn sample(&mut self, features: &[f64], mode: SampleMode) -> Result<Vec<f64>> {
        diffuse_sample_batch(&self.actor, &self.schedule, features, 1, &mut self.rng, mode)
    }

    /// Twin-critic regression toward the clipped double-Q target.
    pub fn critic_update(&mut self, batch: &Batch<Vec<f64>>) -> Result<f64> {
        let n = batch.size;
        let mut next_a = diffuse_sample_batch(
            &self.actor_target,
            &self.schedule,
            &batch.next_states,
            n,
            &mut self.rng,
            SampleMode::Stochastic,
        )?;
        for a in &mut next_a {
            let e: f64 = self.rng.sample(StandardNormal);
            let e = (self.hp.smoothing_sd * e).clamp(-self.hp.smoothing_clip, self.hp.smoothing_clip);
            *a = (*a + e).clamp(0.0, 1.0);
        }
        let q1 = self.critics[0].q_target(&batch.next_states, &next_a, n)?;
        let q2 = self.critics[1].q_target(&batch.next_states, &next_a, n)?;
        let y: Vec<f64> = (0..n)
            .map(|i| batch.rewards[i] + self.hp.gamma * q1[i].min(q2[i]))
            .collect();
        let actions: Vec<f64> = batch.actions.concat();
        let l1 = self.critics[0].fit(&batch.states, &actions, &y)?;
        let l2 = self.critics[1].fit(&batch.states, &actions, &y)?;
        Ok((l1 + l2) / 2.0)
    }

    /// `−mean Q(S, π(S)) + λ·mean ‖A⁰‖²` and its gradient w.r.t. the actor parameters,
    /// pathwise through the chain with `noise` held fixed. `critic` returns
    /// Q and ∂Q/∂A per row.
    pub fn actor_objective<F>(&self, states: &[f64], batch: usize, noise: &ChainNoise, critic: F) -> Result<(f64, Vec<f64>)>
    where
        F: Fn(&[f64], &[f64], usize) -> Result<(Vec<f64>, Vec<f64>)>,
    {
        let trace = reverse_chain(&self.actor, &self.schedule, states, noise, batch)?;
        let (q, dq) = critic(states, &trace.output, batch)?;
        let nb = batch as f64;
        let l2 = self.hp.action_l2;
        let loss = -q.iter().sum::<f64>() / nb + l2 * trace.pre_squash.iter().map(|x| x * x).sum::<f64>() / nb;
        let seed: Vec<f64> = dq.iter().map(|g| -g / nb).collect();
        let d_pre: Vec<f64> = trace.pre_squash.iter().map(|x| 2.0 * l2 * x / nb).collect();
        let mut grads = self.actor.zero_grads();
        chain_backward_with_pre(&self.actor, &self.schedule, &trace, &seed, Some(&d_pre), &mut grads)?;
        Ok((loss, grads))
    }

    /// One actor step against an arbitrary critic; returns the gradient norm.
    pub fn actor_step_with<F>(&mut self, states: &[f64], batch: usize, noise: &ChainNoise, critic: F) -> Result<f64>
    where
        F: Fn(&[f64], &[f64], usize) -> Result<(Vec<f64>, Vec<f64>)>,
    {
        let (_, grads) = self.actor_objective(states, batch, noise, critic)?;
        self.actor_opt.step(self.actor.params_mut(), &grads)?;
        Ok(l2(&grads))
    }

    pub fn actor_update(&mut self, batch: &Batch<Vec<f64>>) -> Result<f64> {
        let noise = ChainNoise::sample(&self.schedule, batch.size, self.action_dim, &mut self.rng);
        let (_, grads) = {
            let c = &self.critics[0];
            self.actor_objective(&batch.states, batch.size, &noise, |s, a, n| c.action_grad(s, a, n))?
        };
        self.actor_opt.step(self.actor.params_mut(), &grads)?;
        Ok(l2(&grads))
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        self.actor_target.soft_update(&self.actor, self.hp.tau)?;
        for c in &mut self.critics {
            c.soft_update(self.hp.tau)?;
        }
        Ok(())
    }

    pub fn from_checkpoint(c: &Checkpoint, hp: &Hyperparams, seed: u64) -> Result<Self> {
        let a = c.net("actor")?;
        let state_dim = a.input_dim() - a.output_dim() - 1;
        let mut agent = Self::new(state_dim, a.output_dim(), hp, seed)?;
        agent.actor.copy_from(a)?;
        agent.actor_target.copy_from(c.net("actor_target")?)?;
        for (k, cr) in agent.critics.iter_mut().enumerate() {
            cr.net.copy_from(c.net(&format!("critic{}", k + 1))?)?;
            cr.target.copy_from(c.net(&format!("critic{}_target", k + 1))?)?;
            cr.opt = Adam::from_state(c.optimizer(&format!("critic{}", k + 1))?.clone());
        }
        agent.actor_opt = Adam::from_state(c.optimizer("actor")?.clone());
        agent.noise_sd = c.scalar("exploration_sd")?;
        Ok(agent)
    }
}

impl Learner for Dftd3 {
    type A = Vec<f64>;

    fn act(&mut self, features: &[f64], env: &Env) -> Result<(Vec<f64>, Action)> {
        let raw = self.sample(features, SampleMode::Explore(self.noise_sd))?;
        let action = raw_to_action(&raw, env);
        Ok((raw, action))
    }

    fn buffer(&mut self) -> &mut ReplayBuffer<Vec<f64>> {
        &mut self.buffer
    }

    fn update(&mut self) -> Result<UpdateStats> {
        let batch = self.buffer.sample(self.hp.batch, &mut self.rng)?;
        let loss = self.critic_update(&batch)?;
        self.updates += 1;
        let mut stats = UpdateStats {
            critic_loss: Some(loss),
            actor_grad_norm: None,
        };
        if self.updates.is_multiple_of(self.hp.actor_delay as u64) {
            stats.actor_grad_norm = Some(self.actor_update(&batch)?);
            self.soft_update_targets()?;
        }
        Ok(stats)
    }

    fn end_episode(&mut self) {
        self.noise_sd *= self.hp.exploration_decay;
    }

    fn exploration(&self) -> f64 {
        self.noise_sd
    }
}

impl Policy for Dftd3 {
    fn name(&self) -> &'static str {
        "dftd3"
    }

    fn greedy(&self, features: &[f64], env: &Env) -> Result<Action> {
        debug_assert_eq!(features.len(), self.state_dim);
        // Deterministic mode draws nothing from the generator.
        let mut unused = seeded(0);
        let raw = diffuse_sample_batch(&self.actor, &self.schedule, features, 1, &mut unused, SampleMode::Deterministic)?;
        Ok(raw_to_action(&raw, env))
    }

    fn checkpoint(&self) -> Option<Checkpoint> {
        let mut c = Checkpoint::new("dftd3");
        c.nets.push(("actor".into(), self.actor.clone()));
        c.nets.push(("actor_target".into(), self.actor_target.clone()));
        c.optimizers.push(("actor".into(), self.actor_opt.state().clone()));
        for (k, cr) in self.critics.iter().enumerate() {
            c.nets.push((format!("critic{}", k + 1), cr.net.clone()));
            c.nets.push((format!("critic{}_target", k + 1), cr.target.clone()));
            c.optimizers.push((format!("critic{}", k + 1), cr.opt.state().clone()));
        }
        c.scalars.push(("exploration_sd".into(), self.noise_sd));
        Some(c)
    }
}

/// Train DFTD3 on `env`; returns the agent and one log row per episode.
pub fn dftd3_train(env: &mut Env, hp: &Hyperparams, seed: u64) -> Result<(Dftd3, TrainLog)> {
    let mut agent = Dftd3::for_env(env, hp, seed)?;
    let log = train_loop(&mut agent, env, hp, seed)?;
    Ok((agent, log))
}
