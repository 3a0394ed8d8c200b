use rand::Rng;

use crate::neural::{Adam, Head, Mlp};
use crate::Result;

/// Q(S, A) network with its target copy and optimizer.
#[derive(Debug, Clone)]
pub struct Critic {
    pub net: Mlp,
    pub target: Mlp,
    pub opt: Adam,
}

pub(crate) fn concat_rows(a: &[f64], b: &[f64], batch: usize) -> Vec<f64> {
    let da = a.len() / batch;
    let db = b.len() / batch;
    let mut out = Vec::with_capacity(a.len() + b.len());
    for i in 0..batch {
        out.extend_from_slice(&a[i * da..(i + 1) * da]);
        out.extend_from_slice(&b[i * db..(i + 1) * db]);
    }
    out
}

impl Critic {
    pub fn new(state_dim: usize, action_dim: usize, hidden: &[usize], lr: f64, rng: &mut impl Rng) -> Result<Self> {
        let mut sizes = vec![state_dim + action_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let net = Mlp::new(&sizes, Head::Identity, rng)?;
        Ok(Critic {
            target: net.clone(),
            opt: Adam::new(net.param_count(), lr),
            net,
        })
    }

    pub fn q(&self, states: &[f64], actions: &[f64], batch: usize) -> Result<Vec<f64>> {
        Ok(self.net.forward_batch(&concat_rows(states, actions, batch), batch)?.output().to_vec())
    }

    pub fn q_target(&self, states: &[f64], actions: &[f64], batch: usize) -> Result<Vec<f64>> {
        Ok(self.target.forward_batch(&concat_rows(states, actions, batch), batch)?.output().to_vec())
    }

    /// Q and ∂Q/∂A for each row.
    pub fn action_grad(&self, states: &[f64], actions: &[f64], batch: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let ds = states.len() / batch;
        let da = actions.len() / batch;
        let tape = self.net.forward_batch(&concat_rows(states, actions, batch), batch)?;
        let mut scratch = self.net.zero_grads();
        let dx = self.net.backward(&tape, &vec![1.0; batch], &mut scratch)?;
        let mut da_out = Vec::with_capacity(batch * da);
        for row in dx.chunks_exact(ds + da) {
            da_out.extend_from_slice(&row[ds..]);
        }
        Ok((tape.output().to_vec(), da_out))
    }

    /// One optimizer step on `mean (Q − y)²`; returns the loss before the step.
    pub fn fit(&mut self, states: &[f64], actions: &[f64], targets: &[f64]) -> Result<f64> {
        let batch = targets.len();
        let tape = self.net.forward_batch(&concat_rows(states, actions, batch), batch)?;
        let q = tape.output();
        let mut loss = 0.0;
        let seed: Vec<f64> = q
            .iter()
            .zip(targets)
            .map(|(q, y)| {
                loss += (q - y) * (q - y);
                2.0 * (q - y) / batch as f64
            })
            .collect();
        let mut grads = self.net.zero_grads();
        self.net.backward(&tape, &seed, &mut grads)?;
        self.opt.step(self.net.params_mut(), &grads)?;
        Ok(loss / batch as f64)
    }

    pub fn soft_update(&mut self, tau: f64) -> Result<()> {
        self.target.soft_update(&self.net, tau)
    }
}
