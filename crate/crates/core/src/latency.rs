//! Service latency of one reservation window: DT processing, per-group
//! transcoding and per-group multicast transmission.
//!
//! Units: sizes in megabits, workloads in gigacycles, compute in
//! gigacycles per second, bandwidth in MHz (so rates come out in Mb/s).

use serde::{Deserialize, Serialize};

use crate::domain::{layer_size, NetworkConfig, Scenario, Video, WeibullParams};
use crate::dt::{model_size, AccuracySurface};
use crate::env::Action;
use crate::mobility::{user_dynamics, UserStatusWindow};
use crate::{Error, Result};

/// Below this many expected seconds of playback a group is treated as
/// fully swiped.
pub const SEGMENT_FLOOR: f64 = 1e-6;

/// Swipe-weighted per-video sums, evaluated at segment starts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VideoLoad {
    /// `Σ_s (1 − p(x_s))·segment_len`.
    pub play_s: f64,
    /// `Σ_s (1 − p(x_s))·Σ_{l=2}^{l̄} z^l(x_s)`.
    pub enhancement_mb: f64,
    /// `Σ_s (1 − p(x_s))·Σ_{l=1}^{l̄} z^l(x_s)`.
    pub transmitted_mb: f64,
}

pub fn video_load(video: &Video, swipe: &WeibullParams, avg_version: usize) -> Result<VideoLoad> {
    if avg_version < 1 || avg_version > video.layer_count() {
        return Err(Error::OutOfRange {
            what: "avg_version",
            value: avg_version as f64,
            range: format!("[1, {}]", video.layer_count()),
        });
    }
    let mut load = VideoLoad::default();
    for x in video.segment_starts() {
        let keep = 1.0 - swipe.cdf(x);
        let mut enh = 0.0;
        for l in 2..=avg_version {
            enh += layer_size(video, l, x)?;
        }
        let base = layer_size(video, 1, x)?;
        load.play_s += keep * video.segment_len_s;
        load.enhancement_mb += keep * enh;
        load.transmitted_mb += keep * (base + enh);
    }
    Ok(load)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupContext {
    /// Loads of the full recommended list, in list order.
    pub loads: Vec<VideoLoad>,
    pub avg_version: usize,
    /// Worst user's window-average linear channel gain.
    pub min_gain: f64,
}

/// Everything the latency model needs for one window, frozen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowContext {
    pub groups: Vec<GroupContext>,
    pub psi: f64,
    pub model_sizes: Vec<f64>,
    pub surface: AccuracySurface,
    pub net: NetworkConfig,
}

impl WindowContext {
    /// Context for a window whose user status has been emulated.
    pub fn build(scenario: &Scenario, status: &[UserStatusWindow]) -> Result<Self> {
        let psi = user_dynamics(status, &scenario.net.dynamics_weights)?;
        let groups = scenario
            .groups
            .iter()
            .zip(status)
            .map(|(g, w)| {
                let row = scenario.swipe.group_row(g.id);
                let loads = g
                    .recommended_list
                    .iter()
                    .map(|&id| {
                        let v = scenario
                            .video(id)
                            .ok_or_else(|| Error::DanglingVideo {
                                what: format!("group {}", g.id),
                                id,
                            })?;
                        video_load(v, &row[v.category.index()], g.avg_version)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(GroupContext {
                    loads,
                    avg_version: g.avg_version,
                    min_gain: w.min_mean_gain(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(WindowContext {
            groups,
            psi,
            model_sizes: scenario.dt_catalog.iter().map(model_size).collect(),
            surface: scenario.surface,
            net: scenario.net.clone(),
        })
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn model_count(&self) -> usize {
        self.model_sizes.len()
    }
}

fn one_hot_index(choice: &[f64]) -> Result<usize> {
    let mut idx = None;
    for (i, &a) in choice.iter().enumerate() {
        if a == 1.0 {
            if idx.is_some() {
                return Err(Error::Selection(choice.to_vec()));
            }
            idx = Some(i);
        } else if a != 0.0 {
            return Err(Error::Selection(choice.to_vec()));
        }
    }
    idx.ok_or_else(|| Error::Selection(choice.to_vec()))
}

/// `Ξ = κ·m / 𝒞`, with κ in Mcycles/Mb and 𝒞 in Gcycles/s.
pub fn dt_processing_delay(choice: &[f64], model_sizes: &[f64], kappa: f64, compute_gcps: f64) -> Result<f64> {
    if choice.len() != model_sizes.len() {
        return Err(Error::Dimension {
            expected: model_sizes.len(),
            got: choice.len(),
        });
    }
    let i = one_hot_index(choice)?;
    Ok(kappa * model_sizes[i] / (compute_gcps * 1000.0))
}

/// Number of recommended videos that fit in the rest of the window,
/// `⌈|Δ|·(V − Ξ)/V⌉`, never below one.
pub fn effective_playlist_len(list_len: usize, xi_s: f64, window_s: f64) -> Result<usize> {
    if xi_s > window_s {
        return Err(Error::Overrun { xi_s, window_s });
    }
    let exact = list_len as f64 * (window_s - xi_s.max(0.0)) / window_s;
    // Guard against 36.000000001 rounding up.
    let n = (exact - 1e-9).ceil().max(0.0) as usize;
    Ok(n.clamp(1, list_len.max(1)))
}

pub fn effective_playlist(list: &[u32], xi_s: f64, window_s: f64) -> Result<&[u32]> {
    Ok(&list[..effective_playlist_len(list.len(), xi_s, window_s)?])
}

/// `Υ = μ Σ_v Σ_s (1 − p)·Σ_{l≥2} z^l`, gigacycles.
pub fn transcoding_workload(playlist: &[VideoLoad], mu_gcycles_per_mb: f64) -> f64 {
    mu_gcycles_per_mb * playlist.iter().map(|l| l.enhancement_mb).sum::<f64>()
}

/// Expected seconds of playback over the playlist.
pub fn expected_segments(playlist: &[VideoLoad]) -> f64 {
    playlist.iter().map(|l| l.play_s).sum()
}

fn guarded_ratio(numerator: f64, denominator: f64, on_zero: Error) -> Result<f64> {
    if numerator == 0.0 {
        return Ok(0.0);
    }
    if !(denominator > 0.0) {
        return Err(on_zero);
    }
    Ok(numerator / denominator)
}

/// `Ψ = Υ / (𝒞̄ · segments)` with `𝒞̄ = 𝒞 / G`.
pub fn transcoding_delay(upsilon: f64, compute_gcps: f64, groups: usize, segments: f64) -> Result<f64> {
    if segments < SEGMENT_FLOOR && upsilon > 0.0 {
        return Err(Error::ZeroSegments);
    }
    let per_group = compute_gcps / groups as f64;
    guarded_ratio(upsilon, per_group * segments.max(SEGMENT_FLOOR), Error::ZeroSegments)
}

/// Linear SNR of the worst user with noise power `N₀·B`.
pub fn min_snr(min_gain: f64, bandwidth_mhz: f64, net: &NetworkConfig) -> f64 {
    let noise_mw = net.noise_psd_mw_hz() * bandwidth_mhz * 1e6;
    min_gain * net.tx_power_mw() / noise_mw
}

/// `r = f · B · log₂(1 + SNR_min)`, Mb/s.
pub fn multicast_rate(acc: f64, bandwidth_mhz: f64, min_snr_linear: f64) -> f64 {
    if bandwidth_mhz <= 0.0 {
        return 0.0;
    }
    acc * bandwidth_mhz * (1.0 + min_snr_linear).log2()
}

/// `Γ = bits / (r · segments)`.
pub fn transmission_delay(transmitted_mb: f64, rate_mbps: f64, segments: f64, group: usize) -> Result<f64> {
    if transmitted_mb == 0.0 {
        return Ok(0.0);
    }
    if !(rate_mbps > 0.0) {
        return Err(Error::ZeroRate { group });
    }
    if segments < SEGMENT_FLOOR {
        return Err(Error::ZeroSegments);
    }
    Ok(transmitted_mb / (rate_mbps * segments))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupLatency {
    pub playlist_len: usize,
    pub upsilon_gcycles: f64,
    pub segments: f64,
    pub transcode_s: f64,
    pub rate_mbps: f64,
    pub transmit_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub model: usize,
    pub psi: f64,
    pub acc: f64,
    pub xi_s: f64,
    pub groups: Vec<GroupLatency>,
    pub total_s: f64,
}

impl LatencyBreakdown {
    pub fn mean_transcode_s(&self) -> f64 {
        self.groups.iter().map(|g| g.transcode_s).sum::<f64>() / self.groups.len() as f64
    }

    pub fn mean_transmit_s(&self) -> f64 {
        self.groups.iter().map(|g| g.transmit_s).sum::<f64>() / self.groups.len() as f64
    }

    /// One-line structured record for verbose logging.
    pub fn debug_record(&self) -> String {
        serde_json::to_string(self).expect("breakdown serializes")
    }
}

/// Per-group transcoding + transmission for an already chosen model.
pub fn group_latency(
    ctx: &WindowContext,
    group: usize,
    xi_s: f64,
    acc: f64,
    bandwidth_mhz: f64,
) -> Result<GroupLatency> {
    let g = &ctx.groups[group];
    let n = effective_playlist_len(g.loads.len(), xi_s, ctx.net.window_s)?;
    let playlist = &g.loads[..n];
    let upsilon = transcoding_workload(playlist, ctx.net.mu_gcycles_per_mb);
    let segments = expected_segments(playlist);
    let transcode_s = transcoding_delay(upsilon, ctx.net.compute_gcps, ctx.group_count(), segments)?;
    let snr = min_snr(g.min_gain, bandwidth_mhz, &ctx.net);
    let rate_mbps = multicast_rate(acc, bandwidth_mhz, snr);
    let tx: f64 = playlist.iter().map(|l| l.transmitted_mb).sum();
    let transmit_s = transmission_delay(tx, rate_mbps, segments, group)?;
    Ok(GroupLatency {
        playlist_len: n,
        upsilon_gcycles: upsilon,
        segments,
        transcode_s,
        rate_mbps,
        transmit_s,
    })
}

/// `𝒯 = Ξ + (1/G) Σ_g (Ψ_g + Γ_g)`.
pub fn service_latency(action: &Action, ctx: &WindowContext) -> Result<LatencyBreakdown> {
    if action.bandwidth_mhz.len() != ctx.group_count() {
        return Err(Error::Dimension {
            expected: ctx.group_count(),
            got: action.bandwidth_mhz.len(),
        });
    }
    let xi_s = dt_processing_delay(
        &action.model_choice,
        &ctx.model_sizes,
        ctx.net.kappa_mcycles_per_mb,
        ctx.net.compute_gcps,
    )?;
    let model = one_hot_index(&action.model_choice)?;
    let acc = ctx.surface.accuracy_checked(ctx.model_sizes[model], ctx.psi).0;
    let groups = (0..ctx.group_count())
        .map(|g| group_latency(ctx, g, xi_s, acc, action.bandwidth_mhz[g]))
        .collect::<Result<Vec<_>>>()?;
    let per_group: f64 = groups.iter().map(|g| g.transcode_s + g.transmit_s).sum();
    Ok(LatencyBreakdown {
        model,
        psi: ctx.psi,
        acc,
        xi_s,
        total_s: xi_s + per_group / ctx.group_count() as f64,
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_scenario, Category, ScenarioConfig};
    use crate::mobility::emulate_window;
    use crate::rng::seeded;
    use proptest::prelude::*;

    fn video() -> Video {
        Video {
            id: 0,
            category: Category::Food,
            duration_s: 15.0,
            segment_len_s: 1.0,
            layer_rates: vec![1.0, 0.5, 0.5, 1.0],
        }
    }

    const NEVER: WeibullParams = WeibullParams {
        shape: 1.0,
        scale: 1e300,
    };

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn dt_delay() {
        let sizes = [2000.0, 5000.0, 9000.0];
        let xi = dt_processing_delay(&[0.0, 1.0, 0.0], &sizes, 16.0, 8.0).unwrap();
        assert!(rel(xi, 10.0) < 1e-12);
        assert_eq!(dt_processing_delay(&[1.0], &[0.0], 16.0, 8.0).unwrap(), 0.0);
        assert!(matches!(
            dt_processing_delay(&[0.0, 0.0, 0.0], &sizes, 16.0, 8.0),
            Err(Error::Selection(_))
        ));
        assert!(dt_processing_delay(&[1.0, 1.0, 0.0], &sizes, 16.0, 8.0).is_err());
        assert!(dt_processing_delay(&[0.5, 0.5, 0.0], &sizes, 16.0, 8.0).is_err());
    }

    #[test]
    fn playlist_truncation() {
        assert_eq!(effective_playlist_len(40, 0.0, 300.0).unwrap(), 40);
        assert_eq!(effective_playlist_len(40, 10.0, 300.0).unwrap(), 39);
        assert_eq!(effective_playlist_len(40, 300.0, 300.0).unwrap(), 1);
        assert_eq!(effective_playlist_len(40, 30.0, 300.0).unwrap(), 36);
        assert!(matches!(
            effective_playlist_len(40, 301.0, 300.0),
            Err(Error::Overrun { .. })
        ));
        let list: Vec<u32> = (0..40).collect();
        assert_eq!(effective_playlist(&list, 10.0, 300.0).unwrap().len(), 39);
    }

    #[test]
    fn workload_hand_sum() {
        let v = Video {
            layer_rates: vec![1.0, 0.5],
            ..video()
        };
        let load = video_load(&v, &NEVER, 2).unwrap();
        assert!(rel(transcoding_workload(&[load], 6.0), 45.0) < 1e-12);
        let base_only = video_load(&v, &NEVER, 1).unwrap();
        assert_eq!(transcoding_workload(&[base_only], 6.0), 0.0);
        assert!(rel(base_only.transmitted_mb, 15.0) < 1e-12);

        let always = WeibullParams {
            shape: 1.0,
            scale: 1e-300,
        };
        // p(0) = 0 by definition, so only the first segment survives.
        let mostly_gone = video_load(&v, &always, 2).unwrap();
        assert!(rel(mostly_gone.enhancement_mb, 0.5) < 1e-12);
        assert!(video_load(&v, &NEVER, 0).is_err());
        assert!(video_load(&v, &NEVER, 3).is_err());
    }

    #[test]
    fn fully_swiped_workload_is_zero() {
        let fully = VideoLoad::default();
        assert_eq!(transcoding_workload(&[fully], 6.0), 0.0);
        assert_eq!(expected_segments(&[fully]), 0.0);
        assert_eq!(transcoding_delay(0.0, 8.0, 2, 0.0).unwrap(), 0.0);
        assert_eq!(transmission_delay(0.0, 10.0, 0.0, 0).unwrap(), 0.0);
    }

    #[test]
    fn segment_counts() {
        let v = video();
        assert!(rel(expected_segments(&[video_load(&v, &NEVER, 1).unwrap()]), 15.0) < 1e-12);
        let half = VideoLoad {
            play_s: 15.0 * 0.5,
            ..Default::default()
        };
        assert_eq!(expected_segments(&[half]), 7.5);

        let exp = WeibullParams {
            shape: 1.0,
            scale: 10.0,
        };
        let got = expected_segments(&[video_load(&v, &exp, 1).unwrap()]);
        let oracle: f64 = (0..15).map(|s| (-(s as f64) / 10.0).exp()).sum();
        assert!(rel(got, oracle) < 1e-12);
        // Geometric series (1 − q¹⁵)/(1 − q), q = e^{-0.1}.
        let q = (-0.1f64).exp();
        assert!(rel(oracle, (1.0 - q.powi(15)) / (1.0 - q)) < 1e-12);
        assert!((got - 8.1636).abs() < 1e-4);
    }

    #[test]
    fn transcode_delay_hand() {
        assert!(rel(transcoding_delay(200.0, 8.0, 4, 100.0).unwrap(), 1.0) < 1e-12);
        assert_eq!(transcoding_delay(0.0, 8.0, 4, 100.0).unwrap(), 0.0);
        assert!(matches!(
            transcoding_delay(5.0, 8.0, 4, 0.0),
            Err(Error::ZeroSegments)
        ));
    }

    #[test]
    fn rate_hand() {
        assert!(rel(multicast_rate(1.0, 10.0, 3.0), 20.0) < 1e-12);
        assert!(rel(multicast_rate(0.5, 10.0, 3.0), 10.0) < 1e-12);
        assert_eq!(multicast_rate(1.0, 0.0, 3.0), 0.0);
    }

    #[test]
    fn transmit_delay_hand() {
        assert!(rel(transmission_delay(400.0, 20.0, 100.0, 0).unwrap(), 0.2) < 1e-12);
        let a = transmission_delay(400.0, 20.0, 100.0, 0).unwrap();
        let b = transmission_delay(400.0, 40.0, 100.0, 0).unwrap();
        assert!(rel(b, a / 2.0) < 1e-12);
        assert!(matches!(
            transmission_delay(400.0, 0.0, 100.0, 3),
            Err(Error::ZeroRate { group: 3 })
        ));
    }

    fn ctx_with(groups: Vec<GroupContext>) -> WindowContext {
        let s = build_scenario(&ScenarioConfig::desk(groups.len(), 1)).unwrap();
        WindowContext {
            groups,
            psi: 0.1,
            model_sizes: vec![2000.0, 5000.0, 9000.0],
            surface: AccuracySurface::paper(),
            net: s.net,
        }
    }

    #[test]
    fn aggregation_hand() {
        // Zero workloads leave only Ξ.
        let empty = GroupContext {
            loads: vec![VideoLoad::default(); 4],
            avg_version: 1,
            min_gain: 1e-10,
        };
        let ctx = ctx_with(vec![empty.clone(), empty]);
        let a = Action {
            model_choice: vec![0.0, 1.0, 0.0],
            bandwidth_mhz: vec![5.0, 5.0],
        };
        let b = service_latency(&a, &ctx).unwrap();
        assert!(rel(b.total_s, 16.0 * 5000.0 / 8000.0) < 1e-12);
        assert_eq!(b.total_s, b.xi_s);

        // Ξ + mean over groups of (Ψ + Γ).
        let per_group = [1.0, 1.4];
        let xi = 10.0;
        let agg = xi + per_group.iter().sum::<f64>() / 2.0;
        assert!((agg - 11.2).abs() < 1e-12);
    }

    fn desk_ctx(seed: u64, groups: usize) -> WindowContext {
        let s = build_scenario(&ScenarioConfig::desk(groups, 5)).unwrap();
        let w = emulate_window(&s, &mut seeded(seed), 0, None);
        WindowContext::build(&s, &w).unwrap()
    }

    #[test]
    fn single_group_total() {
        let ctx = desk_ctx(3, 1);
        let a = Action {
            model_choice: vec![1.0, 0.0, 0.0],
            bandwidth_mhz: vec![10.0],
        };
        let b = service_latency(&a, &ctx).unwrap();
        let g = &b.groups[0];
        assert!(rel(b.total_s, b.xi_s + g.transcode_s + g.transmit_s) < 1e-12);
    }

    #[test]
    fn base_layer_only_group() {
        let mut ctx = desk_ctx(4, 1);
        let s = build_scenario(&ScenarioConfig::desk(1, 5)).unwrap();
        let g = &s.groups[0];
        let row = s.swipe.group_row(0);
        ctx.groups[0].loads = g
            .recommended_list
            .iter()
            .map(|&id| {
                let v = s.video(id).unwrap();
                video_load(v, &row[v.category.index()], 1).unwrap()
            })
            .collect();
        let a = Action {
            model_choice: vec![1.0, 0.0, 0.0],
            bandwidth_mhz: vec![10.0],
        };
        let b = service_latency(&a, &ctx).unwrap();
        assert_eq!(b.groups[0].upsilon_gcycles, 0.0);
        let n = b.groups[0].playlist_len;
        let base: f64 = ctx.groups[0].loads[..n].iter().map(|l| l.play_s * 1.0).sum();
        let tx: f64 = ctx.groups[0].loads[..n].iter().map(|l| l.transmitted_mb).sum();
        assert!(rel(tx, base) < 1e-12);
    }

    /// Recompute every delay in SI units (bits, Hz, cycles) from scratch.
    fn latency_si(a: &Action, ctx: &WindowContext) -> f64 {
        let model = a.model_choice.iter().position(|&x| x == 1.0).unwrap();
        let m_bits = ctx.model_sizes[model] * 1e6;
        let kappa = ctx.net.kappa_mcycles_per_mb * 1e6 / 1e6; // cycles per bit
        let c_hz = ctx.net.compute_gcps * 1e9;
        let xi = kappa * m_bits / c_hz;
        let acc = ctx.surface.accuracy_checked(ctx.model_sizes[model], ctx.psi).0;
        let mu = ctx.net.mu_gcycles_per_mb * 1e9 / 1e6;
        let p_w = 10f64.powf((ctx.net.tx_power_dbm - 30.0) / 10.0);
        let n0_w = 10f64.powf((ctx.net.noise_psd_dbm_hz - 30.0) / 10.0);
        let g_count = ctx.group_count() as f64;
        let mut sum = 0.0;
        for (g, grp) in ctx.groups.iter().enumerate() {
            let exact = grp.loads.len() as f64 * (ctx.net.window_s - xi) / ctx.net.window_s;
            let n = ((exact - 1e-9).ceil() as usize).max(1);
            let pl = &grp.loads[..n];
            let cycles: f64 = pl.iter().map(|l| mu * l.enhancement_mb * 1e6).sum();
            let segs: f64 = pl.iter().map(|l| l.play_s).sum();
            let psi_g = cycles / (c_hz / g_count * segs);
            let b_hz = a.bandwidth_mhz[g] * 1e6;
            let snr = grp.min_gain * p_w / (n0_w * b_hz);
            let rate_bps = acc * b_hz * (1.0 + snr).log2();
            let bits: f64 = pl.iter().map(|l| l.transmitted_mb * 1e6).sum();
            sum += psi_g + bits / (rate_bps * segs);
        }
        xi + sum / g_count
    }

    #[test]
    fn dimensional_audit() {
        for seed in 0..10 {
            let ctx = desk_ctx(seed, 3);
            for model in 0..3 {
                let mut choice = vec![0.0; 3];
                choice[model] = 1.0;
                let a = Action {
                    model_choice: choice,
                    bandwidth_mhz: vec![2.0, 3.0, 5.0],
                };
                let ours = service_latency(&a, &ctx).unwrap().total_s;
                let si = latency_si(&a, &ctx);
                assert!(rel(ours, si) < 1e-9, "{ours} vs {si}");
            }
        }
    }

    proptest! {
        #[test]
        fn latency_non_increasing_in_bandwidth(seed in 0u64..200, g in 0usize..3,
                                               b0 in 0.5f64..6.0, extra in 0.0f64..4.0, model in 0usize..3) {
            let ctx = desk_ctx(seed, 3);
            let mut choice = vec![0.0; 3];
            choice[model] = 1.0;
            let mut bw = vec![b0, b0 + 0.5, b0 + 1.0];
            let lo = service_latency(&Action { model_choice: choice.clone(), bandwidth_mhz: bw.clone() }, &ctx).unwrap();
            bw[g] += extra;
            let hi = service_latency(&Action { model_choice: choice, bandwidth_mhz: bw }, &ctx).unwrap();
            prop_assert!(hi.total_s <= lo.total_s + 1e-12);
        }

        #[test]
        fn latency_non_increasing_in_compute(seed in 0u64..200, c in 6.0f64..10.0, extra in 0.0f64..4.0, model in 0usize..3) {
            let mut ctx = desk_ctx(seed, 3);
            let mut choice = vec![0.0; 3];
            choice[model] = 1.0;
            let a = Action { model_choice: choice, bandwidth_mhz: vec![10.0 / 3.0; 3] };
            ctx.net.compute_gcps = c;
            let slow = service_latency(&a, &ctx).unwrap().total_s;
            ctx.net.compute_gcps = c + extra;
            let fast = service_latency(&a, &ctx).unwrap().total_s;
            prop_assert!(fast <= slow + 1e-12);
        }
    }
}
