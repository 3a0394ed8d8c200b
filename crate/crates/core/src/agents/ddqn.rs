//! Dueling double-DQN over a discrete joint action set: every model choice
//! paired with one of ten fixed bandwidth-split templates.

use rand::Rng;

use super::replay::{Batch, ReplayBuffer};
use super::{agent_rng, l2, train_loop, Hyperparams, Learner, Policy, TrainLog, UpdateStats};
use crate::env::{Action, Env};
use crate::neural::{Adam, Checkpoint, Head, Mlp};
use crate::rng::SimRng;
use crate::Result;

pub const TEMPLATES: usize = 10;

/// Template 0 is the equal split. Templates 1..9 favour group
/// `(k − 1) mod G` with a share that grows with `(k − 1) / G`; the other
/// groups split the rest evenly.
pub fn split_templates(groups: usize, bandwidth_mhz: f64) -> Vec<Vec<f64>> {
    let g = groups as f64;
    let levels = (TEMPLATES - 1).div_ceil(groups);
    let mut out = vec![vec![bandwidth_mhz / g; groups]];
    for k in 1..TEMPLATES {
        if groups == 1 {
            out.push(vec![bandwidth_mhz]);
            continue;
        }
        let fav = (k - 1) % groups;
        let level = (k - 1) / groups;
        let share = 1.0 / g + (1.0 - 1.0 / g) * (level + 1) as f64 / (levels + 1) as f64;
        let rest = (1.0 - share) / (g - 1.0);
        out.push(
            (0..groups)
                .map(|i| bandwidth_mhz * if i == fav { share } else { rest })
                .collect(),
        );
    }
    out
}

#[derive(Debug, Clone)]
pub struct Ddqn {
    hp: Hyperparams,
    models: usize,
    templates: Vec<Vec<f64>>,
    /// Output 0 is the state value; 1.. the advantages.
    pub net: Mlp,
    pub target: Mlp,
    opt: Adam,
    buffer: ReplayBuffer<usize>,
    rng: SimRng,
    epsilon: f64,
}

impl Ddqn {
    pub fn new(state_dim: usize, models: usize, groups: usize, bandwidth_mhz: f64, hp: &Hyperparams, seed: u64) -> Result<Self> {
        hp.validate()?;
        let mut rng = agent_rng(seed);
        let mut sizes = vec![state_dim];
        sizes.extend_from_slice(&hp.hidden);
        sizes.push(1 + models * TEMPLATES);
        let net = Mlp::new(&sizes, Head::Identity, &mut rng)?;
        Ok(Ddqn {
            models,
            templates: split_templates(groups, bandwidth_mhz),
            target: net.clone(),
            opt: Adam::new(net.param_count(), hp.critic_lr),
            net,
            buffer: ReplayBuffer::new(hp.buffer_capacity),
            rng,
            epsilon: hp.epsilon_start,
            hp: hp.clone(),
        })
    }

    pub fn for_env(env: &Env, hp: &Hyperparams, seed: u64) -> Result<Self> {
        let s = env.scenario();
        Self::new(env.state_dim(), s.model_count(), s.group_count(), s.net.bandwidth_mhz, hp, seed)
    }

    pub fn from_checkpoint(c: &Checkpoint, env: &Env, hp: &Hyperparams, seed: u64) -> Result<Self> {
        let mut agent = Self::for_env(env, hp, seed)?;
        agent.net.copy_from(c.net("q")?)?;
        agent.target.copy_from(c.net("q_target")?)?;
        agent.opt = Adam::from_state(c.optimizer("q")?.clone());
        agent.epsilon = c.scalar("epsilon")?;
        Ok(agent)
    }

    pub fn action_count(&self) -> usize {
        self.models * TEMPLATES
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn set_epsilon(&mut self, eps: f64) {
        self.epsilon = eps;
    }

    /// Joint index → action, scaling the templates to the env's budget.
    pub fn joint_action(&self, k: usize, env: &Env) -> Action {
        let (model, t) = (k / TEMPLATES, k % TEMPLATES);
        let s = env.scenario();
        let scale = s.net.bandwidth_mhz / self.templates[t].iter().sum::<f64>();
        Action {
            model_choice: Action::one_hot(self.models, model),
            bandwidth_mhz: self.templates[t].iter().map(|b| b * scale).collect(),
        }
    }

    /// Dueling aggregation `Q = V + A − mean A`, one row per sample.
    pub fn q_values(&self, out: &[f64], batch: usize) -> Vec<f64> {
        aggregate(out, batch, self.action_count())
    }

    pub fn greedy_index(&self, features: &[f64]) -> Result<usize> {
        let out = self.net.forward(features)?;
        Ok(argmax(&self.q_values(&out, 1)))
    }

    pub fn explore_index(&mut self, features: &[f64]) -> Result<usize> {
        if self.rng.random::<f64>() < self.epsilon {
            Ok(self.rng.random_range(0..self.action_count()))
        } else {
            self.greedy_index(features)
        }
    }

    pub fn td_update(&mut self, batch: &Batch<usize>) -> Result<(f64, f64)> {
        let n = batch.size;
        let k = self.action_count();
        let online_next = self.q_values(self.net.forward_batch(&batch.next_states, n)?.output(), n);
        let target_next = self.q_values(self.target.forward_batch(&batch.next_states, n)?.output(), n);
        let tape = self.net.forward_batch(&batch.states, n)?;
        let q = self.q_values(tape.output(), n);
        let mut seed = vec![0.0; n * (k + 1)];
        let mut loss = 0.0;
        for i in 0..n {
            let best = argmax(&online_next[i * k..(i + 1) * k]);
            let y = batch.rewards[i] + self.hp.gamma * target_next[i * k + best];
            let a = batch.actions[i];
            let err = q[i * k + a] - y;
            loss += err * err;
            let d = 2.0 * err / n as f64;
            let row = &mut seed[i * (k + 1)..(i + 1) * (k + 1)];
            row[0] = d;
            for (j, s) in row[1..].iter_mut().enumerate() {
                *s = d * (f64::from(j == a) - 1.0 / k as f64);
            }
        }
        let mut grads = self.net.zero_grads();
        self.net.backward(&tape, &seed, &mut grads)?;
        self.opt.step(self.net.params_mut(), &grads)?;
        self.target.soft_update(&self.net, self.hp.tau)?;
        Ok((loss / n as f64, l2(&grads)))
    }
}

fn aggregate(out: &[f64], batch: usize, k: usize) -> Vec<f64> {
    let mut q = Vec::with_capacity(batch * k);
    for row in out.chunks_exact(k + 1) {
        let mean = row[1..].iter().sum::<f64>() / k as f64;
        q.extend(row[1..].iter().map(|a| row[0] + a - mean));
    }
    q
}

/// Index of the maximum, lowest index on ties.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

impl Learner for Ddqn {
    type A = usize;

    fn act(&mut self, features: &[f64], env: &Env) -> Result<(usize, Action)> {
        let k = self.explore_index(features)?;
        Ok((k, self.joint_action(k, env)))
    }

    fn buffer(&mut self) -> &mut ReplayBuffer<usize> {
        &mut self.buffer
    }

    fn update(&mut self) -> Result<UpdateStats> {
        let batch = self.buffer.sample(self.hp.batch, &mut self.rng)?;
        let (loss, norm) = self.td_update(&batch)?;
        Ok(UpdateStats {
            critic_loss: Some(loss),
            actor_grad_norm: Some(norm),
        })
    }

    fn end_episode(&mut self) {
        self.epsilon = (self.epsilon * self.hp.epsilon_decay).max(self.hp.epsilon_end);
    }

    fn exploration(&self) -> f64 {
        self.epsilon
    }
}

impl Policy for Ddqn {
    fn name(&self) -> &'static str {
        "ddqn"
    }

    fn greedy(&self, features: &[f64], env: &Env) -> Result<Action> {
        Ok(self.joint_action(self.greedy_index(features)?, env))
    }

    fn checkpoint(&self) -> Option<Checkpoint> {
        let mut c = Checkpoint::new("ddqn");
        c.nets.push(("q".into(), self.net.clone()));
        c.nets.push(("q_target".into(), self.target.clone()));
        c.optimizers.push(("q".into(), self.opt.state().clone()));
        c.scalars.push(("epsilon".into(), self.epsilon));
        Some(c)
    }
}

pub fn ddqn_train(env: &mut Env, hp: &Hyperparams, seed: u64) -> Result<(Ddqn, TrainLog)> {
    let mut agent = Ddqn::for_env(env, hp, seed)?;
    let log = train_loop(&mut agent, env, hp, seed)?;
    Ok((agent, log))
}
