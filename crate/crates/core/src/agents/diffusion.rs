//! Variance schedule and the conditional reverse (denoising) chain used as
//! the DFTD3 actor.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::RawAction;
use crate::neural::{Mlp, Tape};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSchedule {
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl BetaSchedule {
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        if beta.is_empty() || beta.iter().any(|b| !(*b > 0.0 && *b < 1.0)) {
            return Err(Error::Config(format!("beta schedule {beta:?} must lie in (0, 1)")));
        }
        let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bar = Vec::with_capacity(alpha.len());
        let mut prod = 1.0;
        for a in &alpha {
            prod *= a;
            alpha_bar.push(prod);
        }
        Ok(BetaSchedule { beta, alpha, alpha_bar })
    }

    /// `n` evenly spaced variances from `lo` to `hi`.
    pub fn linear(n: usize, lo: f64, hi: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("denoising steps must be ≥ 1".into()));
        }
        if n == 1 {
            return Self::new(vec![lo]);
        }
        Self::new(
            (0..n)
                .map(|j| lo + (hi - lo) * j as f64 / (n - 1) as f64)
                .collect(),
        )
    }

    pub fn steps(&self) -> usize {
        self.beta.len()
    }

    /// Accessors take the 1-based step index `j`.
    pub fn beta(&self, j: usize) -> f64 {
        self.beta[j - 1]
    }

    pub fn alpha(&self, j: usize) -> f64 {
        self.alpha[j - 1]
    }

    pub fn alpha_bar(&self, j: usize) -> f64 {
        self.alpha_bar[j - 1]
    }

    /// Coefficient on ε_θ in the reverse update: `β_j / √(α_j (1 − ᾱ_j))`.
    pub fn eps_coef(&self, j: usize) -> f64 {
        self.beta(j) / (self.alpha(j) * (1.0 - self.alpha_bar(j))).sqrt()
    }
}

/// One forward noising step `√(1−β)·x + √β·ε`.
pub fn forward_step(x: &[f64], beta: f64, eps: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(eps)
        .map(|(x, e)| (1.0 - beta).sqrt() * x + beta.sqrt() * e)
        .collect()
}

/// Noise `x0` forward through steps `1..=j`.
pub fn forward_diffuse(schedule: &BetaSchedule, x0: &[f64], j: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if !(1..=schedule.steps()).contains(&j) {
        return Err(Error::OutOfRange {
            what: "diffusion step",
            value: j as f64,
            range: format!("[1, {}]", schedule.steps()),
        });
    }
    let mut x = x0.to_vec();
    for k in 1..=j {
        let eps: Vec<f64> = (0..x.len()).map(|_| rng.sample(StandardNormal)).collect();
        x = forward_step(&x, schedule.beta(k), &eps);
    }
    Ok(x)
}

/// All random draws of one batched reverse chain, fixed up front so the
/// chain is a deterministic function of the actor parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainNoise {
    /// `A^N`, `batch × dim`.
    pub init: Vec<f64>,
    /// `steps[j-1]` is the additive ε of step `j`.
    pub steps: Vec<Vec<f64>>,
}

impl ChainNoise {
    pub fn sample(schedule: &BetaSchedule, batch: usize, dim: usize, rng: &mut impl Rng) -> Self {
        let mut draw = || (0..batch * dim).map(|_| rng.sample(StandardNormal)).collect::<Vec<f64>>();
        let init = draw();
        let steps = (0..schedule.steps()).map(|_| draw()).collect();
        ChainNoise { init, steps }
    }

    pub fn zeros(schedule: &BetaSchedule, batch: usize, dim: usize) -> Self {
        ChainNoise {
            init: vec![0.0; batch * dim],
            steps: vec![vec![0.0; batch * dim]; schedule.steps()],
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChainTrace {
    batch: usize,
    /// Tapes in execution order (`j = N, …, 1`).
    tapes: Vec<Tape>,
    pub pre_squash: Vec<f64>,
    /// `(tanh(A⁰) + 1) / 2`.
    pub output: Vec<f64>,
}

/// Denoiser input rows `[A^j, S, j/N]`.
fn denoiser_input(a: &[f64], states: &[f64], batch: usize, j: usize, n: usize) -> Vec<f64> {
    let da = a.len() / batch;
    let ds = states.len() / batch;
    let mut x = Vec::with_capacity(batch * (da + ds + 1));
    for b in 0..batch {
        x.extend_from_slice(&a[b * da..(b + 1) * da]);
        x.extend_from_slice(&states[b * ds..(b + 1) * ds]);
        x.push(j as f64 / n as f64);
    }
    x
}

/// Run `A^{j−1} = A^j/√α_j − c_j·ε_θ(A^j, S, j/N) + √β_j·ε` for
/// `j = N, …, 1` and squash the result into [0, 1].
pub fn reverse_chain(
    actor: &Mlp,
    schedule: &BetaSchedule,
    states: &[f64],
    noise: &ChainNoise,
    batch: usize,
) -> Result<ChainTrace> {
    let n = schedule.steps();
    let da = actor.output_dim();
    if noise.init.len() != batch * da || noise.steps.len() != n {
        return Err(Error::Dimension {
            expected: batch * da,
            got: noise.init.len(),
        });
    }
    if actor.input_dim() * batch != states.len() + batch * (da + 1) {
        return Err(Error::Dimension {
            expected: actor.input_dim() - da - 1,
            got: states.len() / batch.max(1),
        });
    }
    let mut a = noise.init.clone();
    let mut tapes = Vec::with_capacity(n);
    for j in (1..=n).rev() {
        let tape = actor.forward_batch(&denoiser_input(&a, states, batch, j, n), batch)?;
        let inv = 1.0 / schedule.alpha(j).sqrt();
        let c = schedule.eps_coef(j);
        let sb = schedule.beta(j).sqrt();
        let eps = &noise.steps[j - 1];
        for i in 0..a.len() {
            a[i] = a[i] * inv - c * tape.output()[i] + sb * eps[i];
        }
        tapes.push(tape);
    }
    let output = a.iter().map(|x| (x.tanh() + 1.0) / 2.0).collect();
    Ok(ChainTrace {
        batch,
        tapes,
        pre_squash: a,
        output,
    })
}

/// Back-propagate `d_output` (gradient w.r.t. the squashed output) through
/// the whole chain into the denoiser parameters.
pub fn chain_backward(
    actor: &Mlp,
    schedule: &BetaSchedule,
    trace: &ChainTrace,
    d_output: &[f64],
    grads: &mut [f64],
) -> Result<()> {
    chain_backward_with_pre(actor, schedule, trace, d_output, None, grads)
}

/// [`chain_backward`] with an extra gradient w.r.t. the pre-squash `A⁰`.
pub fn chain_backward_with_pre(
    actor: &Mlp,
    schedule: &BetaSchedule,
    trace: &ChainTrace,
    d_output: &[f64],
    d_pre_squash: Option<&[f64]>,
    grads: &mut [f64],
) -> Result<()> {
    let n = schedule.steps();
    let da = actor.output_dim();
    let din = actor.input_dim();
    let mut d: Vec<f64> = d_output
        .iter()
        .zip(&trace.pre_squash)
        .map(|(g, x)| {
            let t = x.tanh();
            g * 0.5 * (1.0 - t * t)
        })
        .collect();
    if let Some(extra) = d_pre_squash {
        for (a, b) in d.iter_mut().zip(extra) {
            *a += b;
        }
    }
    // tapes[k] ran step j = N − k; walk them back from j = 1 up to N.
    for (k, tape) in trace.tapes.iter().enumerate().rev() {
        let j = n - k;
        let c = schedule.eps_coef(j);
        let seed: Vec<f64> = d.iter().map(|g| -c * g).collect();
        let dx = actor.backward(tape, &seed, grads)?;
        let inv = 1.0 / schedule.alpha(j).sqrt();
        for b in 0..trace.batch {
            for i in 0..da {
                let idx = b * da + i;
                d[idx] = d[idx] * inv + dx[b * din + i];
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleMode {
    /// Chain noise plus clipped Gaussian exploration of this sd.
    Explore(f64),
    /// Chain noise only.
    Stochastic,
    /// `A^N = 0` and no additive noise.
    Deterministic,
}

/// Batched sampling from the actor for `batch` states.
pub fn diffuse_sample_batch(
    actor: &Mlp,
    schedule: &BetaSchedule,
    states: &[f64],
    batch: usize,
    rng: &mut impl Rng,
    mode: SampleMode,
) -> Result<Vec<f64>> {
    let da = actor.output_dim();
    let noise = match mode {
        SampleMode::Deterministic => ChainNoise::zeros(schedule, batch, da),
        _ => ChainNoise::sample(schedule, batch, da, rng),
    };
    let mut out = reverse_chain(actor, schedule, states, &noise, batch)?.output;
    if let SampleMode::Explore(sd) = mode {
        for v in &mut out {
            let e: f64 = rng.sample(StandardNormal);
            *v = (*v + sd * e).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

pub fn diffuse_sample(
    actor: &Mlp,
    state: &[f64],
    schedule: &BetaSchedule,
    rng: &mut impl Rng,
    mode: SampleMode,
) -> Result<RawAction> {
    diffuse_sample_batch(actor, schedule, state, 1, rng, mode).map(RawAction)
}

/// Var(A⁰) of the reverse chain with ε_θ ≡ 0 and `Var(A^N) = 1`:
/// `v_{j−1} = v_j / α_j + β_j`.
pub fn zero_denoiser_variance(schedule: &BetaSchedule) -> f64 {
    (1..=schedule.steps())
        .rev()
        .fold(1.0, |v, j| v / schedule.alpha(j) + schedule.beta(j))
}
