//! Synthetic user status: Lévy-flight mobility, path-loss plus Rayleigh
//! channel gains, swipe intervals and preference drift, and the
//! user-dynamics metric ψ built from their variances.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::Scenario;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityParams {
    pub pareto_alpha: f64,
    pub min_step_m: f64,
    pub max_step_m: f64,
    /// Displacement per sample is capped at `speed_mps · sample_period_s`.
    pub speed_mps: f64,
    pub sample_period_s: f64,
    pub area_m: f64,
    /// Standard deviation of the per-sample preference random walk.
    pub pref_step_sd: f64,
}

impl MobilityParams {
    /// Mean of the Pareto(α) law truncated to `[min_step, max_step]`.
    pub fn truncated_pareto_mean(&self) -> f64 {
        let (a, l, h) = (self.pareto_alpha, self.min_step_m, self.max_step_m);
        if l == h {
            return l;
        }
        let norm = 1.0 - (l / h).powf(a);
        if (a - 1.0).abs() < 1e-12 {
            l * (h / l).ln() / norm
        } else {
            a * l.powf(a) * (h.powf(1.0 - a) - l.powf(1.0 - a)) / ((1.0 - a) * norm)
        }
    }

    fn sample_step(&self, rng: &mut impl Rng) -> f64 {
        let (a, l, h) = (self.pareto_alpha, self.min_step_m, self.max_step_m);
        if l == h {
            return l;
        }
        let u: f64 = rng.random();
        let tail = 1.0 - (l / h).powf(a);
        l * (1.0 - u * tail).powf(-1.0 / a)
    }
}

/// Fold `x` back into `[0, area]` by mirror reflection at both walls.
fn reflect(x: f64, area: f64) -> f64 {
    let period = 2.0 * area;
    let r = x.rem_euclid(period);
    if r > area {
        period - r
    } else {
        r
    }
}

/// Draw the raw (pre-cap, pre-reflection) Lévy displacement vector.
pub fn levy_displacement(rng: &mut impl Rng, params: &MobilityParams) -> [f64; 2] {
    let step = params.sample_step(rng);
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    [step * theta.cos(), step * theta.sin()]
}

/// One mobility sample: truncated-Pareto step in a uniform direction,
/// capped by the speed limit and reflected into the area.
pub fn levy_step(rng: &mut impl Rng, pos: [f64; 2], params: &MobilityParams) -> [f64; 2] {
    let [mut dx, mut dy] = levy_displacement(rng, params);
    let cap = params.speed_mps * params.sample_period_s;
    let len = dx.hypot(dy);
    if len > cap {
        let k = if len > 0.0 { cap / len } else { 0.0 };
        dx *= k;
        dy *= k;
    }
    [
        reflect(pos[0] + dx, params.area_m),
        reflect(pos[1] + dy, params.area_m),
    ]
}

/// Urban macro path loss in dB, `128.1 + 37.6·log10(d / 1 km)`.
pub fn path_loss_db(distance_m: f64) -> f64 {
    128.1 + 37.6 * (distance_m / 1000.0).log10()
}

/// Linear power gain `10^(−PL/10) × fading`.
pub fn channel_gain_with_fading(distance_m: f64, fading: f64) -> Result<f64> {
    if distance_m < 1.0 || distance_m.is_nan() {
        return Err(Error::OutOfRange {
            what: "distance_m",
            value: distance_m,
            range: "[1, ∞)".into(),
        });
    }
    Ok(10f64.powf(-path_loss_db(distance_m) / 10.0) * fading)
}

/// Path loss with unit-mean exponential (Rayleigh power) fading.
pub fn channel_gain(distance_m: f64, rng: &mut impl Rng) -> Result<f64> {
    let fading: f64 = Exp1.sample(rng);
    // Exp1 can return exactly 0; keep gains strictly positive.
    channel_gain_with_fading(distance_m, fading.max(f64::MIN_POSITIVE))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSeries {
    pub user_id: u32,
    pub locations_m: Vec<[f64; 2]>,
    /// Linear channel power gains |h|².
    pub gains: Vec<f64>,
    /// Inter-swipe intervals (seconds).
    pub swipe_intervals_s: Vec<f64>,
    /// Category preference score in [0, 1].
    pub prefs: Vec<f64>,
}

impl UserSeries {
    pub fn mean_gain(&self) -> f64 {
        self.gains.iter().sum::<f64>() / self.gains.len() as f64
    }
}

/// User status of one multicast group over one reservation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserStatusWindow {
    pub group: usize,
    pub sample_period_s: f64,
    pub users: Vec<UserSeries>,
}

impl UserStatusWindow {
    pub fn len(&self) -> usize {
        self.users.first().map_or(0, |u| u.gains.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Worst user's window-average channel gain.
    pub fn min_mean_gain(&self) -> f64 {
        self.users
            .iter()
            .map(UserSeries::mean_gain)
            .fold(f64::INFINITY, f64::min)
    }
}

fn bs_distance(pos: [f64; 2], area: f64) -> f64 {
    let c = area / 2.0;
    (pos[0] - c).hypot(pos[1] - c).max(1.0)
}

/// Emulate every group's user status for one window. Positions and
/// preferences continue from `prev` when supplied; otherwise users start
/// uniformly in the area with uniform preferences.
pub fn emulate_window(
    scenario: &Scenario,
    rng: &mut impl Rng,
    window_index: usize,
    prev: Option<&[UserStatusWindow]>,
) -> Vec<UserStatusWindow> {
    let mp = &scenario.mobility;
    let samples = (scenario.net.window_s / mp.sample_period_s).floor() as usize;
    let pref_noise = Normal::new(0.0, mp.pref_step_sd).expect("finite sd");
    let area = scenario.area_m;

    scenario
        .groups
        .iter()
        .enumerate()
        .map(|(gi, group)| {
            let users = group
                .users
                .iter()
                .enumerate()
                .map(|(ui, &user_id)| {
                    let last = prev
                        .and_then(|p| p.get(gi))
                        .and_then(|w| w.users.get(ui))
                        .filter(|u| u.user_id == user_id);
                    let (mut pos, mut pref) = match last {
                        Some(u) => (
                            *u.locations_m.last().expect("non-empty series"),
                            *u.prefs.last().expect("non-empty series"),
                        ),
                        None => (
                            [rng.random_range(0.0..=area), rng.random_range(0.0..=area)],
                            rng.random::<f64>(),
                        ),
                    };
                    let list = &group.recommended_list;
                    let mut s = UserSeries {
                        user_id,
                        locations_m: Vec::with_capacity(samples),
                        gains: Vec::with_capacity(samples),
                        swipe_intervals_s: Vec::with_capacity(samples),
                        prefs: Vec::with_capacity(samples),
                    };
                    for k in 0..samples {
                        pos = levy_step(rng, pos, mp);
                        let gain = channel_gain(bs_distance(pos, area), rng)
                            .expect("distance floored at 1 m");
                        let vid = list[(window_index * samples + k + ui) % list.len()];
                        let video = scenario.video(vid).expect("validated id");
                        let watch = scenario
                            .swipe
                            .params(gi, video.category)
                            .quantile(rng.random::<f64>())
                            .min(video.duration_s);
                        if mp.pref_step_sd > 0.0 {
                            pref = (pref + pref_noise.sample(rng)).clamp(0.0, 1.0);
                        }
                        s.locations_m.push(pos);
                        s.gains.push(gain);
                        s.swipe_intervals_s.push(watch);
                        s.prefs.push(pref);
                    }
                    s
                })
                .collect();
            UserStatusWindow {
                group: gi,
                sample_period_s: mp.sample_period_s,
                users,
            }
        })
        .collect()
}

/// Population variances of the four status components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsVariances {
    pub gains: f64,
    pub locations: f64,
    pub swipes: f64,
    pub prefs: f64,
}

/// Weighted sum `δ₁·var(H) + δ₂·var(Y) + δ₃·var(W) + δ₄·var(E)`.
pub fn combine_dynamics(v: &DynamicsVariances, weights: &[f64; 4]) -> f64 {
    weights[0] * v.gains + weights[1] * v.locations + weights[2] * v.swipes + weights[3] * v.prefs
}

fn normalized_variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (lo, hi) = values
        .clone()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    if !(span > 0.0) {
        return 0.0;
    }
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for v in values {
        let x = (v - lo) / span;
        n += 1.0;
        let d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    (m2 / n).max(0.0)
}

/// Min-max-normalized pooled variances over every user of `windows`.
/// Locations contribute the sum of their two per-coordinate variances.
pub fn dynamics_variances(windows: &[UserStatusWindow]) -> Result<DynamicsVariances> {
    let users = || windows.iter().flat_map(|w| w.users.iter());
    let shortest = users()
        .map(|u| {
            u.gains
                .len()
                .min(u.locations_m.len())
                .min(u.swipe_intervals_s.len())
                .min(u.prefs.len())
        })
        .min()
        .unwrap_or(0);
    if shortest < 2 {
        return Err(Error::SeriesTooShort(shortest));
    }
    let gains = users().flat_map(|u| u.gains.iter().copied());
    let xs = users().flat_map(|u| u.locations_m.iter().map(|p| p[0]));
    let ys = users().flat_map(|u| u.locations_m.iter().map(|p| p[1]));
    let swipes = users().flat_map(|u| u.swipe_intervals_s.iter().copied());
    let prefs = users().flat_map(|u| u.prefs.iter().copied());
    Ok(DynamicsVariances {
        gains: normalized_variance(gains),
        locations: normalized_variance(xs) + normalized_variance(ys),
        swipes: normalized_variance(swipes),
        prefs: normalized_variance(prefs),
    })
}

/// System-wide user dynamics ψ (pool every group of the window).
pub fn user_dynamics(windows: &[UserStatusWindow], weights: &[f64; 4]) -> Result<f64> {
    Ok(combine_dynamics(&dynamics_variances(windows)?, weights))
}

/// Per-group variant of [`user_dynamics`].
pub fn group_dynamics(windows: &[UserStatusWindow], weights: &[f64; 4]) -> Result<Vec<f64>> {
    windows
        .iter()
        .map(|w| user_dynamics(std::slice::from_ref(w), weights))
        .collect()
}

/// Trace export, one row per (user, sample). `windows[k]` is reservation
/// window `first_window + k`.
pub fn write_trace_csv<W: Write>(
    windows: &[Vec<UserStatusWindow>],
    window_s: f64,
    first_window: usize,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["window", "group", "user_id", "t_s", "x_m", "y_m", "gain", "swipe_interval_s", "pref"])?;
    for (i, groups) in windows.iter().enumerate() {
    let t0 = (first_window + i) as f64 * window_s;
    for win in groups {
        for u in &win.users {
            for k in 0..u.gains.len() {
                let t = t0 + k as f64 * win.sample_period_s;
                w.write_record([
                    (first_window + i).to_string(),
                    win.group.to_string(),
                    u.user_id.to_string(),
                    crate::harness::fmt_num(t),
                    crate::harness::fmt_num(u.locations_m[k][0]),
                    crate::harness::fmt_num(u.locations_m[k][1]),
                    crate::harness::fmt_num(u.gains[k]),
                    crate::harness::fmt_num(u.swipe_intervals_s[k]),
                    crate::harness::fmt_num(u.prefs[k]),
                ])?;
            }
        }
    }
    }
    w.flush().map_err(|e| Error::io("trace csv", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_scenario, ScenarioConfig};
    use crate::rng::seeded;
    use proptest::prelude::*;

    fn params() -> MobilityParams {
        MobilityParams {
            pareto_alpha: 1.5,
            min_step_m: 1.0,
            max_step_m: 500.0,
            speed_mps: 1e9,
            sample_period_s: 10.0,
            area_m: 1000.0,
            pref_step_sd: 0.05,
        }
    }

    /// Mean of the truncated Pareto by midpoint quadrature of x·pdf(x).
    fn pareto_mean_quadrature(a: f64, l: f64, h: f64) -> f64 {
        let norm = 1.0 - (l / h).powf(a);
        let pdf = |x: f64| a * l.powf(a) * x.powf(-a - 1.0) / norm;
        // Log-spaced midpoint rule.
        let n = 200_000;
        let (ll, lh) = (l.ln(), h.ln());
        let dt = (lh - ll) / n as f64;
        (0..n)
            .map(|i| {
                let x = (ll + (i as f64 + 0.5) * dt).exp();
                x * pdf(x) * x * dt
            })
            .sum()
    }

    #[test]
    fn degenerate_pareto_step_is_exact() {
        let p = MobilityParams {
            min_step_m: 5.0,
            max_step_m: 5.0,
            ..params()
        };
        let mut rng = seeded(1);
        for _ in 0..100 {
            let [dx, dy] = levy_displacement(&mut rng, &p);
            assert!((dx.hypot(dy) - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pareto_mean_matches_closed_form_and_quadrature() {
        let p = params();
        let closed = p.truncated_pareto_mean();
        let quad = pareto_mean_quadrature(1.5, 1.0, 500.0);
        assert!((closed - quad).abs() / quad < 1e-6, "{closed} vs {quad}");

        let mut rng = seeded(2024);
        let n = 100_000;
        let mean = (0..n).map(|_| p.sample_step(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - quad).abs() / quad < 0.02, "{mean} vs {quad}");
    }

    #[test]
    fn corner_stays_inside() {
        let p = params();
        let mut rng = seeded(5);
        for _ in 0..10_000 {
            let q = levy_step(&mut rng, [0.0, 0.0], &p);
            assert!((0.0..=p.area_m).contains(&q[0]) && (0.0..=p.area_m).contains(&q[1]));
        }
    }

    #[test]
    fn reflection_handles_long_steps() {
        assert_eq!(reflect(-3.0, 10.0), 3.0);
        assert_eq!(reflect(13.0, 10.0), 7.0);
        assert_eq!(reflect(27.0, 10.0), 7.0);
        assert_eq!(reflect(5.0, 10.0), 5.0);
    }

    #[test]
    fn path_loss_points() {
        let g = channel_gain_with_fading(1000.0, 1.0).unwrap();
        assert!((g - 10f64.powf(-12.81)).abs() / g < 1e-12);
        assert!((g - 1.55e-13).abs() / 1.55e-13 < 0.01);
        let g = channel_gain_with_fading(100.0, 1.0).unwrap();
        assert!((g - 10f64.powf(-9.05)).abs() / g < 1e-12);
        assert!((g - 8.91e-10).abs() / 8.91e-10 < 0.01);
        assert!(channel_gain_with_fading(0.5, 1.0).is_err());
    }

    #[test]
    fn fading_is_unit_mean() {
        let mut rng = seeded(77);
        let d = 250.0;
        let det = channel_gain_with_fading(d, 1.0).unwrap();
        let n = 100_000;
        let mean = (0..n).map(|_| channel_gain(d, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - det).abs() / det < 0.02);
    }

    proptest! {
        #[test]
        fn gain_decreasing_in_distance(a in 1.0f64..5000.0, b in 1.0f64..5000.0) {
            prop_assume!((a - b).abs() > 1e-6);
            let (near, far) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(channel_gain_with_fading(near, 1.0).unwrap()
                > channel_gain_with_fading(far, 1.0).unwrap());
        }

        #[test]
        fn dynamics_order_free(seed in 0u64..1000) {
            let s = build_scenario(&ScenarioConfig::desk(2, 3)).unwrap();
            let mut w = emulate_window(&s, &mut seeded(seed), 0, None);
            let w_ref = w.clone();
            for win in &mut w {
                for u in &mut win.users {
                    u.gains.reverse();
                    u.locations_m.rotate_left(3);
                    u.swipe_intervals_s.reverse();
                    u.prefs.rotate_right(5);
                }
            }
            let weights = [0.125, 0.25, 0.8, 0.1];
            let a = user_dynamics(&w_ref, &weights).unwrap();
            let b = user_dynamics(&w, &weights).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(a >= 0.0 && a <= weights.iter().sum::<f64>());
        }
    }

    #[test]
    fn window_lengths_and_determinism() {
        let s = build_scenario(&ScenarioConfig::desk(3, 5)).unwrap();
        let a = emulate_window(&s, &mut seeded(1), 0, None);
        assert_eq!(a.len(), 3);
        for w in &a {
            assert_eq!(w.users.len(), 5);
            for u in &w.users {
                assert_eq!(u.gains.len(), 30);
                assert_eq!(u.locations_m.len(), 30);
                assert_eq!(u.swipe_intervals_s.len(), 30);
                assert_eq!(u.prefs.len(), 30);
                assert!(u.gains.iter().all(|&g| g > 0.0));
                assert!(u.prefs.iter().all(|p| (0.0..=1.0).contains(p)));
            }
        }
        let b = emulate_window(&s, &mut seeded(1), 0, None);
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());

        let next1 = emulate_window(&s, &mut seeded(2), 1, Some(&a));
        let next2 = emulate_window(&s, &mut seeded(2), 1, Some(&a));
        assert_eq!(next1, next2);
    }

    #[test]
    fn positions_continue_from_prev() {
        let mut cfg = ScenarioConfig::desk(1, 2);
        cfg.mobility.speed_mps = 0.0;
        let s = build_scenario(&cfg).unwrap();
        let a = emulate_window(&s, &mut seeded(3), 0, None);
        let b = emulate_window(&s, &mut seeded(4), 1, Some(&a));
        for (ua, ub) in a[0].users.iter().zip(&b[0].users) {
            assert_eq!(ua.locations_m.last(), ub.locations_m.first());
        }
    }

    #[test]
    fn stationary_users_have_zero_location_variance() {
        let mut cfg = ScenarioConfig::desk(2, 4);
        cfg.mobility.speed_mps = 0.0;
        let s = build_scenario(&cfg).unwrap();
        let w = emulate_window(&s, &mut seeded(8), 0, None);
        for u in w.iter().flat_map(|w| &w.users) {
            assert!(u.locations_m.iter().all(|p| *p == u.locations_m[0]));
        }
        for u in w.iter().flat_map(|w| &w.users) {
            let one = UserStatusWindow {
                group: 0,
                sample_period_s: 10.0,
                users: vec![u.clone()],
            };
            assert_eq!(dynamics_variances(&[one]).unwrap().locations, 0.0);
        }
    }

    #[test]
    fn hand_weighted_dynamics() {
        let v = DynamicsVariances {
            gains: 0.4,
            locations: 0.2,
            swipes: 0.1,
            prefs: 0.5,
        };
        let d = [0.125, 0.25, 0.8, 0.1];
        assert!((combine_dynamics(&v, &d) - 0.23).abs() < 1e-12);
        let d2 = d.map(|x| 2.0 * x);
        assert!((combine_dynamics(&v, &d2) - 0.46).abs() < 1e-12);
    }

    #[test]
    fn constant_series_give_zero() {
        let u = UserSeries {
            user_id: 0,
            locations_m: vec![[1.0, 2.0]; 5],
            gains: vec![1e-9; 5],
            swipe_intervals_s: vec![4.0; 5],
            prefs: vec![0.3; 5],
        };
        let w = UserStatusWindow {
            group: 0,
            sample_period_s: 10.0,
            users: vec![u.clone(), u],
        };
        assert_eq!(user_dynamics(&[w.clone()], &[0.125, 0.25, 0.8, 0.1]).unwrap(), 0.0);

        let mut short = w;
        for u in &mut short.users {
            u.gains.truncate(1);
        }
        assert!(matches!(
            user_dynamics(&[short], &[1.0; 4]),
            Err(Error::SeriesTooShort(1))
        ));
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let s = build_scenario(&ScenarioConfig::desk(1, 2)).unwrap();
        let w = emulate_window(&s, &mut seeded(1), 0, None);
        let mut buf = Vec::new();
        let w2 = emulate_window(&s, &mut seeded(1), 1, Some(&w));
        write_trace_csv(&[w, w2], 300.0, 0, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "window,group,user_id,t_s,x_m,y_m,gain,swipe_interval_s,pref"
        );
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 2 * 2 * 30);
        assert!(rows[60].starts_with("1,0,"));
    }
}
