//! Sequential decision environment over reservation windows.
//!
//! Each step emulates the next window's user status, evaluates the service
//! latency for the chosen (model, bandwidth split), and returns −latency as
//! the reward. The observed state is the previous window's workloads and
//! delays.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{NetworkConfig, Scenario};
use crate::latency::{
    dt_processing_delay, effective_playlist_len, expected_segments, group_latency, min_snr, service_latency,
    LatencyBreakdown, WindowContext,
};
use crate::mobility::{emulate_window, UserStatusWindow};
use crate::rng::{seeded, SimRng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    /// Per-group transcoding workload Υ (Gcycles).
    pub workloads: Vec<f64>,
    /// DT processing delay Ξ (s).
    pub dt_delay: f64,
    pub transcode_delays: Vec<f64>,
    pub tx_delays: Vec<f64>,
}

impl State {
    pub fn dim(groups: usize) -> usize {
        3 * groups + 1
    }

    pub fn from_breakdown(b: &LatencyBreakdown) -> Self {
        State {
            workloads: b.groups.iter().map(|g| g.upsilon_gcycles).collect(),
            dt_delay: b.xi_s,
            transcode_delays: b.groups.iter().map(|g| g.transcode_s).collect(),
            tx_delays: b.groups.iter().map(|g| g.transmit_s).collect(),
        }
    }

    /// Flat vector `[Υ_1..Υ_G, Ξ, Ψ_1..Ψ_G, Γ_1..Γ_G]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.workloads.clone();
        v.push(self.dt_delay);
        v.extend(&self.transcode_delays);
        v.extend(&self.tx_delays);
        v
    }

    /// Network input: workloads scaled by μ·V, delays by V.
    pub fn features(&self, net: &NetworkConfig) -> Vec<f64> {
        let w = net.mu_gcycles_per_mb * net.window_s;
        let mut v: Vec<f64> = self.workloads.iter().map(|x| x / w).collect();
        v.push(self.dt_delay / net.window_s);
        v.extend(self.transcode_delays.iter().map(|x| x / net.window_s));
        v.extend(self.tx_delays.iter().map(|x| x / net.window_s));
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    /// One-hot DT model selection.
    pub model_choice: Vec<f64>,
    pub bandwidth_mhz: Vec<f64>,
}

impl Action {
    pub fn one_hot(models: usize, model: usize) -> Vec<f64> {
        let mut v = vec![0.0; models];
        v[model] = 1.0;
        v
    }

    pub fn equal_split(models: usize, model: usize, groups: usize, bandwidth_mhz: f64) -> Self {
        Action {
            model_choice: Self::one_hot(models, model),
            bandwidth_mhz: vec![bandwidth_mhz / groups as f64; groups],
        }
    }

    pub fn model(&self) -> usize {
        self.model_choice
            .iter()
            .position(|&a| a == 1.0)
            .unwrap_or(0)
    }

    /// Check single-model selection and the bandwidth budget.
    pub fn validate(&self, net: &NetworkConfig) -> Result<()> {
        let ones = self.model_choice.iter().filter(|&&a| a == 1.0).count();
        let binary = self.model_choice.iter().all(|&a| a == 0.0 || a == 1.0);
        if ones != 1 || !binary {
            return Err(Error::Selection(self.model_choice.clone()));
        }
        let total: f64 = self.bandwidth_mhz.iter().sum();
        let in_range = self
            .bandwidth_mhz
            .iter()
            .all(|&b| (0.0..=net.bandwidth_mhz).contains(&b));
        if !in_range || total > net.bandwidth_mhz * (1.0 + 1e-12) {
            return Err(Error::OutOfRange {
                what: "total bandwidth",
                value: total,
                range: format!("[0, {}]", net.bandwidth_mhz),
            });
        }
        Ok(())
    }
}

/// Continuous agent output: `models + groups` values in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawAction(pub Vec<f64>);

/// Model = argmax of the first `models` components (lowest index wins
/// ties); bandwidth split proportional to the remaining components, equal
/// when they are all zero. Always uses the whole budget.
pub fn decode_action(raw: &RawAction, models: usize, net: &NetworkConfig) -> Action {
    let (sel, bw) = raw.0.split_at(models);
    let mut best = 0;
    for (i, &v) in sel.iter().enumerate() {
        if v > sel[best] {
            best = i;
        }
    }
    let groups = bw.len();
    let total: f64 = bw.iter().map(|v| v.max(0.0)).sum();
    let bandwidth_mhz = if total > 0.0 && total.is_finite() {
        let mut b: Vec<f64> = bw
            .iter()
            .map(|v| net.bandwidth_mhz * v.max(0.0) / total)
            .collect();
        // Put the rounding residue on the largest share so Σ B = ℬ.
        let residue = net.bandwidth_mhz - b.iter().sum::<f64>();
        let k = (0..groups)
            .max_by(|&i, &j| b[i].total_cmp(&b[j]))
            .unwrap_or(0);
        b[k] = (b[k] + residue).clamp(0.0, net.bandwidth_mhz);
        b
    } else {
        vec![net.bandwidth_mhz / groups as f64; groups]
    };
    Action {
        model_choice: Action::one_hot(models, best),
        bandwidth_mhz,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub window: usize,
    pub psi: f64,
    pub acc: f64,
    pub model: usize,
    pub bandwidth_mhz: Vec<f64>,
    pub xi_s: f64,
    pub mean_transcode_s: f64,
    pub mean_transmit_s: f64,
    pub latency_s: f64,
    pub reward: f64,
    /// Latency was an infeasible corner and replaced by the penalty.
    pub penalized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub next_state: State,
    pub reward: f64,
    pub info: StepInfo,
    pub done: bool,
}

pub const DEFAULT_EPISODE_LEN: usize = 100;

/// Latency reported for infeasible windows, as a multiple of V.
pub const PENALTY_WINDOWS: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct Env {
    scenario: Arc<Scenario>,
    episode_len: usize,
    rng: SimRng,
    window: usize,
    prev_status: Option<Vec<UserStatusWindow>>,
    state: Option<State>,
}

impl Env {
    pub fn new(scenario: Arc<Scenario>) -> Self {
        Env {
            scenario,
            episode_len: DEFAULT_EPISODE_LEN,
            rng: seeded(0),
            window: 0,
            prev_status: None,
            state: None,
        }
    }

    pub fn with_episode_len(mut self, len: usize) -> Self {
        self.episode_len = len.max(1);
        self
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn episode_len(&self) -> usize {
        self.episode_len
    }

    pub fn state_dim(&self) -> usize {
        State::dim(self.scenario.group_count())
    }

    pub fn action_dim(&self) -> usize {
        self.scenario.model_count() + self.scenario.group_count()
    }

    pub fn model_count(&self) -> usize {
        self.scenario.model_count()
    }

    pub fn max_latency(&self) -> f64 {
        PENALTY_WINDOWS * self.scenario.net.window_s
    }

    pub fn state(&self) -> Option<&State> {
        self.state.as_ref()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// User status of the most recently emulated window.
    pub fn last_status(&self) -> Option<&[UserStatusWindow]> {
        self.prev_status.as_deref()
    }

    pub fn decode(&self, raw: &RawAction) -> Action {
        decode_action(raw, self.model_count(), &self.scenario.net)
    }

    pub fn default_action(&self) -> Action {
        Action::equal_split(
            self.model_count(),
            0,
            self.scenario.group_count(),
            self.scenario.net.bandwidth_mhz,
        )
    }

    /// Start an episode: window 0 under the default action.
    pub fn reset(&mut self, seed: u64) -> State {
        self.rng = seeded(seed);
        self.window = 0;
        self.prev_status = None;
        self.state = None;
        let ctx = self.next_context();
        let action = self.default_action();
        let (state, _) = self.evaluate(&ctx, &action);
        self.window = 1;
        self.state = Some(state.clone());
        state
    }

    /// Emulate the upcoming window and freeze its latency context.
    pub fn next_context(&mut self) -> WindowContext {
        let status = emulate_window(
            &self.scenario,
            &mut self.rng,
            self.window,
            self.prev_status.as_deref(),
        );
        let ctx = WindowContext::build(&self.scenario, &status)
            .expect("scenario validated and windows have ≥ 2 samples");
        self.prev_status = Some(status);
        ctx
    }

    /// Latency for `action` on `ctx`, falling back to the penalty on
    /// infeasible corners (overrun, zero rate).
    pub fn evaluate(&self, ctx: &WindowContext, action: &Action) -> (State, StepInfo) {
        let max = self.max_latency();
        let (state, info) = match service_latency(action, ctx) {
            Ok(b) => {
                let latency = b.total_s.min(max);
                (
                    State::from_breakdown(&b),
                    StepInfo {
                        window: self.window,
                        psi: b.psi,
                        acc: b.acc,
                        model: b.model,
                        bandwidth_mhz: action.bandwidth_mhz.clone(),
                        xi_s: b.xi_s,
                        mean_transcode_s: b.mean_transcode_s(),
                        mean_transmit_s: b.mean_transmit_s(),
                        latency_s: latency,
                        reward: -latency,
                        penalized: latency < b.total_s,
                    },
                )
            }
            Err(_) => penalty_outcome(ctx, action, max, self.window),
        };
        (state, info)
    }

    /// Apply `action` to a context obtained from [`Env::next_context`].
    pub fn apply(&mut self, ctx: &WindowContext, action: &Action) -> Result<Step> {
        action.validate(&self.scenario.net)?;
        if action.model_choice.len() != self.model_count()
            || action.bandwidth_mhz.len() != self.scenario.group_count()
        {
            return Err(Error::Dimension {
                expected: self.action_dim(),
                got: action.model_choice.len() + action.bandwidth_mhz.len(),
            });
        }
        let (state, info) = self.evaluate(ctx, action);
        self.window += 1;
        self.state = Some(state.clone());
        Ok(Step {
            next_state: state,
            reward: info.reward,
            done: self.window > self.episode_len,
            info,
        })
    }

    pub fn step(&mut self, action: &Action) -> Result<Step> {
        let ctx = self.next_context();
        self.apply(&ctx, action)
    }
}

fn penalty_outcome(ctx: &WindowContext, action: &Action, max: f64, window: usize) -> (State, StepInfo) {
    let xi_s = dt_processing_delay(
        &action.model_choice,
        &ctx.model_sizes,
        ctx.net.kappa_mcycles_per_mb,
        ctx.net.compute_gcps,
    )
    .unwrap_or(max);
    let model = action.model();
    let acc = ctx.surface.accuracy_checked(ctx.model_sizes[model], ctx.psi).0;
    let mut state = State {
        workloads: Vec::new(),
        dt_delay: xi_s.min(max),
        transcode_delays: Vec::new(),
        tx_delays: Vec::new(),
    };
    for g in 0..ctx.group_count() {
        match group_latency(ctx, g, xi_s.min(ctx.net.window_s), acc, action.bandwidth_mhz[g]) {
            Ok(gl) => {
                state.workloads.push(gl.upsilon_gcycles);
                state.transcode_delays.push(gl.transcode_s);
                state.tx_delays.push(gl.transmit_s.min(max));
            }
            Err(_) => {
                state.workloads.push(0.0);
                state.transcode_delays.push(0.0);
                state.tx_delays.push(max);
            }
        }
    }
    let n = ctx.group_count() as f64;
    let info = StepInfo {
        window,
        psi: ctx.psi,
        acc,
        model,
        bandwidth_mhz: action.bandwidth_mhz.clone(),
        xi_s: state.dt_delay,
        mean_transcode_s: state.transcode_delays.iter().sum::<f64>() / n,
        mean_transmit_s: state.tx_delays.iter().sum::<f64>() / n,
        latency_s: max,
        reward: -max,
        penalized: true,
    };
    (state, info)
}

/// Writes the per-window step log.
pub struct StepLogWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> StepLogWriter<W> {
    pub fn new(out: W, groups: usize) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        let mut header = vec!["window".to_string(), "psi".into(), "acc".into(), "model_choice".into()];
        header.extend((1..=groups).map(|g| format!("B_{g}")));
        header.extend(
            ["xi_s", "mean_psi_delay_s", "mean_gamma_s", "latency_s", "reward"].map(String::from),
        );
        inner.write_record(&header)?;
        Ok(StepLogWriter { inner })
    }

    pub fn write(&mut self, info: &StepInfo) -> Result<()> {
        use crate::harness::fmt_num;
        let mut row = vec![
            info.window.to_string(),
            fmt_num(info.psi),
            fmt_num(info.acc),
            (info.model + 1).to_string(),
        ];
        row.extend(info.bandwidth_mhz.iter().map(|&b| fmt_num(b)));
        row.extend(
            [
                info.xi_s,
                info.mean_transcode_s,
                info.mean_transmit_s,
                info.latency_s,
                info.reward,
            ]
            .map(fmt_num),
        );
        self.inner.write_record(&row)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush().map_err(|e| Error::io("step log", e))?;
        self.inner
            .into_inner()
            .map_err(|e| Error::io("step log", e.into_error()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub action: Action,
    pub latency_s: f64,
    /// Grid-optimal model with the [`sqrt_rule_split`] allocation.
    pub sqrt_rule: Action,
    pub sqrt_rule_latency_s: f64,
    /// Grid-optimal model with the [`kkt_split`] allocation.
    pub kkt: Action,
    pub kkt_latency_s: f64,
    pub evaluated: usize,
}

fn compositions(total: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if parts == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for k in 0..=total {
        prefix.push(k);
        compositions(total - k, parts - 1, prefix, out);
        prefix.pop();
    }
}

/// Bandwidth grid: every split whose shares are multiples of
/// `ℬ / (grid_points − 1)`.
pub fn simplex_grid(groups: usize, grid_points: usize, bandwidth_mhz: f64) -> Vec<Vec<f64>> {
    let steps = grid_points.saturating_sub(1).max(1);
    let mut out = Vec::new();
    compositions(steps, groups, &mut Vec::new(), &mut out);
    out.into_iter()
        .map(|c| {
            c.into_iter()
                .map(|k| bandwidth_mhz * k as f64 / steps as f64)
                .collect()
        })
        .collect()
}

/// Per-group bit load `w_g` (Mb per expected second) and `K_g`, the SNR
/// at 1 MHz, for `model`.
fn group_loads(ctx: &WindowContext, model: usize) -> Option<(f64, Vec<f64>, Vec<f64>)> {
    let net = &ctx.net;
    let xi = dt_processing_delay(
        &Action::one_hot(ctx.model_count(), model),
        &ctx.model_sizes,
        net.kappa_mcycles_per_mb,
        net.compute_gcps,
    )
    .ok()?;
    let acc = ctx.surface.accuracy_checked(ctx.model_sizes[model], ctx.psi).0;
    let mut w = Vec::new();
    let mut k = Vec::new();
    for grp in &ctx.groups {
        let n = effective_playlist_len(grp.loads.len(), xi, net.window_s).ok()?;
        let pl = &grp.loads[..n];
        let tx: f64 = pl.iter().map(|l| l.transmitted_mb).sum();
        let segs = expected_segments(pl);
        w.push(if segs > 0.0 { tx / segs } else { 0.0 });
        k.push(min_snr(grp.min_gain, 1.0, net));
    }
    Some((acc, w, k))
}

/// `B_g ∝ √(w_g / c_g)` with the spectral efficiency `c_g` re-evaluated at
/// the current split until it settles. Exact only while `c_g` barely
/// depends on `B_g` (bandwidth-limited groups).
pub fn sqrt_rule_split(ctx: &WindowContext, model: usize) -> Vec<f64> {
    let total = ctx.net.bandwidth_mhz;
    let n = ctx.group_count();
    let mut b = vec![total / n as f64; n];
    let Some((acc, w, k)) = group_loads(ctx, model) else {
        return b;
    };
    if w.iter().all(|&x| x == 0.0) {
        return b;
    }
    for _ in 0..50 {
        let weights: Vec<f64> = (0..n)
            .map(|g| (w[g] / (acc * (1.0 + k[g] / b[g].max(1e-9)).log2())).sqrt())
            .collect();
        let sum: f64 = weights.iter().sum();
        b = weights.iter().map(|x| total * x / sum).collect();
    }
    b
}

/// Exact minimizer of `Σ_g w_g / r_g(B_g)` subject to `Σ B_g = ℬ`, with
/// `r(B) = f·B·log₂(1 + K/B)`: equalize the marginal gains `−dΓ_g/dB_g`.
pub fn kkt_split(ctx: &WindowContext, model: usize) -> Vec<f64> {
    let total = ctx.net.bandwidth_mhz;
    let n = ctx.group_count();
    let Some((acc, w, k)) = group_loads(ctx, model) else {
        return vec![total / n as f64; n];
    };
    if w.iter().all(|&x| x == 0.0) {
        return vec![total / n as f64; n];
    }
    // −dΓ/dB = w·r'(B)/r(B)², strictly decreasing in B.
    let marginal = |g: usize, b: f64| {
        let x = k[g] / b;
        let r = acc * b * (1.0 + x).log2();
        let dr = acc * ((1.0 + x).log2() - x / ((1.0 + x) * std::f64::consts::LN_2));
        w[g] * dr / (r * r)
    };
    let bisect = |lo: f64, hi: f64, above: &dyn Fn(f64) -> bool| {
        let (mut lo, mut hi) = (lo, hi);
        for _ in 0..200 {
            let mid = if lo > 0.0 { (lo * hi).sqrt() } else { hi / 2.0 };
            if above(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo * hi).sqrt()
    };
    // Bandwidth group g takes at marginal price λ.
    let demand = |g: usize, lambda: f64| {
        if w[g] == 0.0 {
            return 0.0;
        }
        if marginal(g, total) >= lambda {
            return total;
        }
        bisect(total * 1e-12, total, &|b| marginal(g, b) > lambda)
    };
    let lo_price = (0..n).map(|g| marginal(g, total)).fold(f64::INFINITY, f64::min).max(1e-300);
    let hi_price = (0..n)
        .filter(|&g| w[g] > 0.0)
        .map(|g| marginal(g, total / n as f64 * 1e-6))
        .fold(0.0, f64::max);
    let lambda = bisect(lo_price * 1e-3, hi_price * 1e3, &|l| {
        (0..n).map(|g| demand(g, l)).sum::<f64>() > total
    });
    let b: Vec<f64> = (0..n).map(|g| demand(g, lambda)).collect();
    let sum: f64 = b.iter().sum();
    b.iter().map(|x| total * x / sum).collect()
}

/// Exhaustive search over every model × simplex bandwidth grid point.
pub fn brute_force_optimum(ctx: &WindowContext, grid_points: usize) -> Result<OracleResult> {
    let groups = ctx.group_count();
    if groups > 3 {
        return Err(Error::Guard(format!("G = {groups} exceeds 3")));
    }
    if !(2..=50).contains(&grid_points) {
        return Err(Error::Guard(format!("grid_points = {grid_points} not in [2, 50]")));
    }
    let grid = simplex_grid(groups, grid_points, ctx.net.bandwidth_mhz);
    let mut best: Option<(Action, f64)> = None;
    let mut evaluated = 0;
    for model in 0..ctx.model_count() {
        for split in &grid {
            let a = Action {
                model_choice: Action::one_hot(ctx.model_count(), model),
                bandwidth_mhz: split.clone(),
            };
            evaluated += 1;
            let Ok(b) = service_latency(&a, ctx) else {
                continue;
            };
            if best.as_ref().is_none_or(|(_, l)| b.total_s < *l) {
                best = Some((a, b.total_s));
            }
        }
    }
    let (action, latency_s) =
        best.ok_or_else(|| Error::Guard("no feasible grid point".into()))?;

    let model = action.model();
    let with_split = |split: Vec<f64>| {
        let a = Action {
            model_choice: Action::one_hot(ctx.model_count(), model),
            bandwidth_mhz: split,
        };
        let l = service_latency(&a, ctx).map_or(f64::INFINITY, |b| b.total_s);
        (a, l)
    };
    let (sqrt_rule, sqrt_rule_latency_s) = with_split(sqrt_rule_split(ctx, model));
    let (kkt, kkt_latency_s) = with_split(kkt_split(ctx, model));
    if kkt_latency_s > latency_s * (1.0 + 1e-9) {
        log::warn!("marginal allocation {kkt_latency_s} s worse than grid {latency_s} s");
    }
    Ok(OracleResult {
        action,
        latency_s,
        sqrt_rule,
        sqrt_rule_latency_s,
        kkt,
        kkt_latency_s,
        evaluated,
    })
}
