//! DDPG baseline: tanh actor mapped to [0, 1], single critic. The network
//! head is linear and the tanh is applied here so the pre-squash output
//! can be regularized.

use rand::Rng;
use rand_distr::StandardNormal;

use super::critic::Critic;
use super::replay::{Batch, ReplayBuffer};
use super::{agent_rng, l2, raw_to_action, train_loop, Hyperparams, Learner, Policy, TrainLog, UpdateStats};
use crate::env::{Action, Env};
use crate::neural::{Adam, Checkpoint, Head, Mlp};
use crate::rng::SimRng;
use crate::Result;

#[derive(Debug, Clone)]
pub struct Mddpg {
    hp: Hyperparams,
    pub actor: Mlp,
    pub actor_target: Mlp,
    actor_opt: Adam,
    pub critic: Critic,
    buffer: ReplayBuffer<Vec<f64>>,
    rng: SimRng,
    noise_sd: f64,
}

/// `(x + 1) / 2`, elementwise.
pub fn to_unit(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| (v + 1.0) / 2.0).collect()
}

fn squash(z: &[f64]) -> Vec<f64> {
    z.iter().map(|v| (v.tanh() + 1.0) / 2.0).collect()
}

impl Mddpg {
    pub fn new(state_dim: usize, action_dim: usize, hp: &Hyperparams, seed: u64) -> Result<Self> {
        hp.validate()?;
        let mut rng = agent_rng(seed);
        let mut sizes = vec![state_dim];
        sizes.extend_from_slice(&hp.hidden);
        sizes.push(action_dim);
        let actor = Mlp::new(&sizes, Head::Identity, &mut rng)?;
        let critic = Critic::new(state_dim, action_dim, &hp.hidden, hp.critic_lr, &mut rng)?;
        Ok(Mddpg {
            actor_target: actor.clone(),
            actor_opt: Adam::new(actor.param_count(), hp.actor_lr),
            actor,
            critic,
            buffer: ReplayBuffer::new(hp.buffer_capacity),
            rng,
            noise_sd: hp.exploration_sd,
            hp: hp.clone(),
        })
    }

    pub fn for_env(env: &Env, hp: &Hyperparams, seed: u64) -> Result<Self> {
        Self::new(env.state_dim(), env.action_dim(), hp, seed)
    }

    pub fn from_checkpoint(c: &Checkpoint, hp: &Hyperparams, seed: u64) -> Result<Self> {
        let a = c.net("actor")?;
        let mut agent = Self::new(a.input_dim(), a.output_dim(), hp, seed)?;
        agent.actor.copy_from(a)?;
        agent.actor_target.copy_from(c.net("actor_target")?)?;
        agent.critic.net.copy_from(c.net("critic")?)?;
        agent.critic.target.copy_from(c.net("critic_target")?)?;
        agent.actor_opt = Adam::from_state(c.optimizer("actor")?.clone());
        agent.critic.opt = Adam::from_state(c.optimizer("critic")?.clone());
        agent.noise_sd = c.scalar("exploration_sd")?;
        Ok(agent)
    }

    /// Raw action in [0, 1] for one state, without exploration.
    pub fn raw(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(squash(&self.actor.forward(features)?))
    }

    pub fn critic_update(&mut self, batch: &Batch<Vec<f64>>) -> Result<f64> {
        let n = batch.size;
        let next_a = squash(self.actor_target.forward_batch(&batch.next_states, n)?.output());
        let q = self.critic.q_target(&batch.next_states, &next_a, n)?;
        let y: Vec<f64> = (0..n).map(|i| batch.rewards[i] + self.hp.gamma * q[i]).collect();
        self.critic.fit(&batch.states, &batch.actions.concat(), &y)
    }

    pub fn actor_update(&mut self, batch: &Batch<Vec<f64>>) -> Result<f64> {
        let n = batch.size;
        let (_, grads) = self.actor_objective(&batch.states, n)?;
        self.actor_opt.step(self.actor.params_mut(), &grads)?;
        Ok(l2(&grads))
    }

    /// `−mean Q(S, μ(S)) + λ·mean ‖z‖²` over pre-squash outputs `z`, and its
    /// gradient w.r.t. the actor parameters.
    pub fn actor_objective(&self, states: &[f64], n: usize) -> Result<(f64, Vec<f64>)> {
        let tape = self.actor.forward_batch(states, n)?;
        let z = tape.output();
        let a = squash(z);
        let (q, dq) = self.critic.action_grad(states, &a, n)?;
        let nb = n as f64;
        let lambda = self.hp.action_l2;
        let loss = -q.iter().sum::<f64>() / nb + lambda * z.iter().map(|x| x * x).sum::<f64>() / nb;
        let seed: Vec<f64> = dq
            .iter()
            .zip(z)
            .map(|(g, x)| {
                let t = x.tanh();
                (-0.5 * (1.0 - t * t) * g + 2.0 * lambda * x) / nb
            })
            .collect();
        let mut grads = self.actor.zero_grads();
        self.actor.backward(&tape, &seed, &mut grads)?;
        Ok((loss, grads))
    }
}

impl Learner for Mddpg {
    type A = Vec<f64>;

    fn act(&mut self, features: &[f64], env: &Env) -> Result<(Vec<f64>, Action)> {
        let mut raw = self.raw(features)?;
        for v in &mut raw {
            let e: f64 = self.rng.sample(StandardNormal);
            *v = (*v + self.noise_sd * e).clamp(0.0, 1.0);
        }
        let action = raw_to_action(&raw, env);
        Ok((raw, action))
    }

    fn buffer(&mut self) -> &mut ReplayBuffer<Vec<f64>> {
        &mut self.buffer
    }

    fn update(&mut self) -> Result<UpdateStats> {
        let batch = self.buffer.sample(self.hp.batch, &mut self.rng)?;
        let loss = self.critic_update(&batch)?;
        let norm = self.actor_update(&batch)?;
        self.actor_target.soft_update(&self.actor, self.hp.tau)?;
        self.critic.soft_update(self.hp.tau)?;
        Ok(UpdateStats {
            critic_loss: Some(loss),
            actor_grad_norm: Some(norm),
        })
    }

    fn end_episode(&mut self) {
        self.noise_sd *= self.hp.exploration_decay;
    }

    fn exploration(&self) -> f64 {
        self.noise_sd
    }
}

impl Policy for Mddpg {
    fn name(&self) -> &'static str {
        "mddpg"
    }

    fn greedy(&self, features: &[f64], env: &Env) -> Result<Action> {
        Ok(raw_to_action(&self.raw(features)?, env))
    }

    fn checkpoint(&self) -> Option<Checkpoint> {
        let mut c = Checkpoint::new("mddpg");
        c.nets.push(("actor".into(), self.actor.clone()));
        c.nets.push(("actor_target".into(), self.actor_target.clone()));
        c.nets.push(("critic".into(), self.critic.net.clone()));
        c.nets.push(("critic_target".into(), self.critic.target.clone()));
        c.optimizers.push(("actor".into(), self.actor_opt.state().clone()));
        c.optimizers.push(("critic".into(), self.critic.opt.state().clone()));
        c.scalars.push(("exploration_sd".into(), self.noise_sd));
        Some(c)
    }
}

pub fn mddpg_train(env: &mut Env, hp: &Hyperparams, seed: u64) -> Result<(Mddpg, TrainLog)> {
    let mut agent = Mddpg::for_env(env, hp, seed)?;
    let log = train_loop(&mut agent, env, hp, seed)?;
    Ok((agent, log))
}
