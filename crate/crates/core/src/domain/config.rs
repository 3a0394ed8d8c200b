//! Configuration schema (TOML, strict) and scenario construction.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    Category, MulticastGroup, NetworkConfig, Scenario, SwipeModel, Video, WeibullParams,
};
use crate::agents::Hyperparams;
use crate::dt::{default_catalog, AccuracySurface, DtModelSpec};
use crate::harness::ExperimentSection;
use crate::mobility::MobilityParams;
use crate::rng::{derive_seed, seeded};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Seed for catalog and group generation.
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub network: NetworkSection,
    pub groups: GroupsSection,
    #[serde(default)]
    pub catalog: CatalogSection,
    #[serde(default)]
    pub swipe: SwipeSection,
    #[serde(default)]
    pub mobility: MobilitySection,
    #[serde(default)]
    pub dt: DtSection,
    #[serde(default)]
    pub agent: Hyperparams,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub bandwidth_mhz: f64,
    pub compute_gcps: f64,
    #[serde(default = "d_window")]
    pub window_s: f64,
    #[serde(default = "d_power")]
    pub tx_power_dbm: f64,
    #[serde(default = "d_noise")]
    pub noise_psd_dbm_hz: f64,
    #[serde(default = "d_kappa")]
    pub kappa_mcycles_per_mb: f64,
    #[serde(default = "d_mu")]
    pub mu_gcycles_per_mb: f64,
    #[serde(default = "d_weights")]
    pub dynamics_weights: [f64; 4],
}

fn d_window() -> f64 {
    300.0
}
fn d_power() -> f64 {
    27.0
}
fn d_noise() -> f64 {
    -174.0
}
fn d_kappa() -> f64 {
    16.0
}
fn d_mu() -> f64 {
    6.0
}
fn d_weights() -> [f64; 4] {
    [0.125, 0.25, 0.8, 0.1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupsSection {
    pub count: usize,
    pub users_per_group: usize,
    /// Average SVC version per group; defaults cycle through 2, 3, 4.
    #[serde(default)]
    pub avg_versions: Option<Vec<usize>>,
    /// Explicit recommended lists (video ids), one per group.
    #[serde(default)]
    pub recommended: Option<Vec<Vec<u32>>>,
    /// Override for the generated list length.
    #[serde(default)]
    pub list_len: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CatalogSection {
    pub videos: usize,
    pub duration_s: f64,
    pub segment_len_s: f64,
    pub layer_rates_mbps: Vec<f64>,
}

impl Default for CatalogSection {
    fn default() -> Self {
        CatalogSection {
            videos: 1000,
            duration_s: 15.0,
            segment_len_s: 1.0,
            layer_rates_mbps: vec![1.0, 0.5, 0.5, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwipeOverride {
    /// Applies to every group when absent.
    #[serde(default)]
    pub group: Option<usize>,
    /// Applies to every category when absent.
    #[serde(default)]
    pub category: Option<Category>,
    pub shape: f64,
    pub scale_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SwipeSection {
    pub shape: f64,
    pub scale_s: f64,
    pub overrides: Vec<SwipeOverride>,
}

impl Default for SwipeSection {
    fn default() -> Self {
        SwipeSection {
            shape: 1.2,
            scale_s: 8.0,
            overrides: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MobilitySection {
    pub area_m: f64,
    pub pareto_alpha: f64,
    pub min_step_m: f64,
    pub max_step_m: f64,
    pub speed_mps: f64,
    pub sample_period_s: f64,
    pub pref_step_sd: f64,
}

impl Default for MobilitySection {
    fn default() -> Self {
        MobilitySection {
            area_m: 1000.0,
            pareto_alpha: 1.5,
            min_step_m: 1.0,
            max_step_m: 500.0,
            speed_mps: 5.0,
            sample_period_s: 10.0,
            pref_step_sd: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSection {
    pub coefficients: [f64; 6],
    #[serde(default = "d_m_max")]
    pub m_max: f64,
    #[serde(default = "d_psi_max")]
    pub psi_max: f64,
}

fn d_m_max() -> f64 {
    AccuracySurface::paper().m_range.1
}
fn d_psi_max() -> f64 {
    AccuracySurface::paper().psi_range.1
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DtSection {
    pub models: Option<Vec<DtModelSpec>>,
    pub surface: Option<SurfaceSection>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The default desk scenario: `groups` groups of `users` users each.
    pub fn desk(groups: usize, users: usize) -> Self {
        ScenarioConfig {
            seed: default_seed(),
            network: NetworkSection {
                bandwidth_mhz: 10.0,
                compute_gcps: 8.0,
                window_s: d_window(),
                tx_power_dbm: d_power(),
                noise_psd_dbm_hz: d_noise(),
                kappa_mcycles_per_mb: d_kappa(),
                mu_gcycles_per_mb: d_mu(),
                dynamics_weights: d_weights(),
            },
            groups: GroupsSection {
                count: groups,
                users_per_group: users,
                avg_versions: None,
                recommended: None,
                list_len: None,
            },
            catalog: CatalogSection::default(),
            swipe: SwipeSection::default(),
            mobility: MobilitySection::default(),
            dt: DtSection::default(),
            agent: Hyperparams::default(),
            experiment: ExperimentSection::default(),
        }
    }
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} must be positive, got {v}")))
    }
}

fn validate(cfg: &ScenarioConfig) -> Result<()> {
    let n = &cfg.network;
    positive("network.bandwidth_mhz", n.bandwidth_mhz)?;
    positive("network.compute_gcps", n.compute_gcps)?;
    positive("network.window_s", n.window_s)?;
    positive("network.kappa_mcycles_per_mb", n.kappa_mcycles_per_mb)?;
    positive("network.mu_gcycles_per_mb", n.mu_gcycles_per_mb)?;
    if !n.tx_power_dbm.is_finite() || !n.noise_psd_dbm_hz.is_finite() {
        return Err(Error::Config("power levels must be finite".into()));
    }
    if n.dynamics_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::Config(format!(
            "network.dynamics_weights must be non-negative, got {:?}",
            n.dynamics_weights
        )));
    }

    let g = &cfg.groups;
    if g.count < 1 {
        return Err(Error::Config("group_count must be ≥ 1".into()));
    }
    if g.users_per_group < 1 {
        return Err(Error::Config("users_per_group must be ≥ 1".into()));
    }

    let c = &cfg.catalog;
    if c.videos < 1 {
        return Err(Error::Config("catalog.videos must be ≥ 1".into()));
    }
    positive("catalog.duration_s", c.duration_s)?;
    positive("catalog.segment_len_s", c.segment_len_s)?;
    let segs = c.duration_s / c.segment_len_s;
    if (segs - segs.round()).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "catalog.segment_len_s ({}) must divide duration_s ({})",
            c.segment_len_s, c.duration_s
        )));
    }
    if c.layer_rates_mbps.is_empty() {
        return Err(Error::Config("catalog.layer_rates_mbps is empty".into()));
    }
    for r in &c.layer_rates_mbps {
        positive("catalog.layer_rates_mbps entry", *r)?;
    }
    let layers = c.layer_rates_mbps.len();

    if let Some(v) = &g.avg_versions {
        if v.len() != g.count {
            return Err(Error::Config(format!(
                "groups.avg_versions has {} entries for {} groups",
                v.len(),
                g.count
            )));
        }
        if let Some(bad) = v.iter().find(|&&l| l < 1 || l > layers) {
            return Err(Error::Config(format!(
                "avg_version {bad} outside [1, {layers}]"
            )));
        }
    }
    if let Some(lists) = &g.recommended {
        if lists.len() != g.count {
            return Err(Error::Config(format!(
                "groups.recommended has {} lists for {} groups",
                lists.len(),
                g.count
            )));
        }
        for (i, list) in lists.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::Config(format!("recommended list of group {i} is empty")));
            }
            if let Some(&id) = list.iter().find(|&&id| id as usize >= c.videos) {
                return Err(Error::DanglingVideo {
                    what: format!("recommended list of group {i}"),
                    id,
                });
            }
        }
    }
    if g.list_len == Some(0) {
        return Err(Error::Config("groups.list_len must be ≥ 1".into()));
    }

    positive("swipe.shape", cfg.swipe.shape)?;
    positive("swipe.scale_s", cfg.swipe.scale_s)?;
    for o in &cfg.swipe.overrides {
        positive("swipe override shape", o.shape)?;
        positive("swipe override scale_s", o.scale_s)?;
        if let Some(gi) = o.group {
            if gi >= g.count {
                return Err(Error::Config(format!("swipe override for unknown group {gi}")));
            }
        }
    }

    let m = &cfg.mobility;
    positive("mobility.area_m", m.area_m)?;
    positive("mobility.pareto_alpha", m.pareto_alpha)?;
    positive("mobility.min_step_m", m.min_step_m)?;
    positive("mobility.sample_period_s", m.sample_period_s)?;
    if m.max_step_m < m.min_step_m {
        return Err(Error::Config("mobility.max_step_m < min_step_m".into()));
    }
    if m.speed_mps < 0.0 || m.pref_step_sd < 0.0 {
        return Err(Error::Config("mobility speed and pref_step_sd must be ≥ 0".into()));
    }
    if m.sample_period_s * 2.0 > n.window_s {
        return Err(Error::Config(
            "mobility.sample_period_s leaves fewer than 2 samples per window".into(),
        ));
    }

    if let Some(models) = &cfg.dt.models {
        if models.is_empty() {
            return Err(Error::Config("dt.models is empty".into()));
        }
        for (i, a) in models.iter().enumerate() {
            a.validate()?;
            if models[..i].iter().any(|b| b.version == a.version) {
                return Err(Error::Config(format!("duplicate DT model version {}", a.version)));
            }
        }
    }
    if let Some(s) = &cfg.dt.surface {
        if s.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("dt.surface coefficients must be finite".into()));
        }
        positive("dt.surface.m_max", s.m_max)?;
        positive("dt.surface.psi_max", s.psi_max)?;
    }
    Ok(())
}

fn swipe_model(cfg: &ScenarioConfig) -> SwipeModel {
    let mut model = SwipeModel::uniform(
        cfg.groups.count,
        WeibullParams {
            shape: cfg.swipe.shape,
            scale: cfg.swipe.scale_s,
        },
    );
    for o in &cfg.swipe.overrides {
        let params = WeibullParams {
            shape: o.shape,
            scale: o.scale_s,
        };
        for g in 0..cfg.groups.count {
            if o.group.is_some_and(|x| x != g) {
                continue;
            }
            for cat in Category::ALL {
                if o.category.is_some_and(|x| x != cat) {
                    continue;
                }
                model.set(g, cat, params);
            }
        }
    }
    model
}

/// Expected watch time (seconds) of one video under `params`, at segment
/// resolution: the same discretization the latency model uses.
fn expected_watch_s(params: &WeibullParams, duration_s: f64, segment_len_s: f64) -> f64 {
    let segs = (duration_s / segment_len_s).round() as usize;
    (0..segs)
        .map(|s| (1.0 - params.cdf(s as f64 * segment_len_s)) * segment_len_s)
        .sum()
}

fn recommended_list(
    rng: &mut impl Rng,
    catalog: &[Video],
    preferred: Category,
    len: usize,
) -> Vec<u32> {
    let mut own: Vec<u32> = catalog
        .iter()
        .filter(|v| v.category == preferred)
        .map(|v| v.id)
        .collect();
    let mut rest: Vec<u32> = catalog
        .iter()
        .filter(|v| v.category != preferred)
        .map(|v| v.id)
        .collect();
    own.shuffle(rng);
    rest.shuffle(rng);
    let (mut own, mut rest) = (own.into_iter(), rest.into_iter());
    let mut list = Vec::with_capacity(len);
    while list.len() < len {
        let next = if rng.random_bool(0.5) {
            own.next().or_else(|| rest.next())
        } else {
            rest.next().or_else(|| own.next())
        };
        match next {
            Some(id) => list.push(id),
            // Catalog exhausted: repeat from the top.
            None => list.push(list[list.len() - catalog.len()]),
        }
    }
    list
}

/// Build a fully cross-linked scenario. Pure: identical configs produce
/// identical scenarios.
pub fn build_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    validate(cfg)?;
    let c = &cfg.catalog;
    let g = &cfg.groups;

    let mut rng = seeded(derive_seed(cfg.seed, 0xCA7A_1060));
    let catalog: Vec<Video> = (0..c.videos)
        .map(|i| Video {
            id: i as u32,
            category: Category::from_index(rng.random_range(0..Category::ALL.len())),
            duration_s: c.duration_s,
            segment_len_s: c.segment_len_s,
            layer_rates: c.layer_rates_mbps.clone(),
        })
        .collect();

    let swipe = swipe_model(cfg);
    let layers = c.layer_rates_mbps.len();
    let window_s = cfg.network.window_s;

    let groups = (0..g.count)
        .map(|gi| {
            let users = (0..g.users_per_group)
                .map(|k| (gi * g.users_per_group + k) as u32)
                .collect();
            let avg_version = match &g.avg_versions {
                Some(v) => v[gi],
                None => (2 + gi % 3).min(layers),
            };
            let recommended_list = match &g.recommended {
                Some(lists) => lists[gi].clone(),
                None => {
                    let len = g.list_len.unwrap_or_else(|| {
                        let row = swipe.group_row(gi);
                        let mean = row
                            .iter()
                            .map(|p| expected_watch_s(p, c.duration_s, c.segment_len_s))
                            .sum::<f64>()
                            / row.len() as f64;
                        2 * (window_s / mean).ceil() as usize
                    });
                    recommended_list(&mut rng, &catalog, Category::from_index(gi), len)
                }
            };
            MulticastGroup {
                id: gi,
                users,
                recommended_list,
                avg_version,
            }
        })
        .collect();

    let dt_catalog = cfg.dt.models.clone().unwrap_or_else(default_catalog);
    let surface = match &cfg.dt.surface {
        Some(s) => AccuracySurface {
            coefficients: s.coefficients,
            m_range: (0.0, s.m_max),
            psi_range: (0.0, s.psi_max),
        },
        None => AccuracySurface::paper(),
    };

    let m = &cfg.mobility;
    let mobility = MobilityParams {
        pareto_alpha: m.pareto_alpha,
        min_step_m: m.min_step_m,
        max_step_m: m.max_step_m,
        speed_mps: m.speed_mps,
        sample_period_s: m.sample_period_s,
        area_m: m.area_m,
        pref_step_sd: m.pref_step_sd,
    };

    let n = &cfg.network;
    Ok(Scenario {
        catalog,
        groups,
        net: NetworkConfig {
            bandwidth_mhz: n.bandwidth_mhz,
            compute_gcps: n.compute_gcps,
            window_s: n.window_s,
            tx_power_dbm: n.tx_power_dbm,
            noise_psd_dbm_hz: n.noise_psd_dbm_hz,
            kappa_mcycles_per_mb: n.kappa_mcycles_per_mb,
            mu_gcycles_per_mb: n.mu_gcycles_per_mb,
            dynamics_weights: n.dynamics_weights,
            group_count: g.count,
        },
        dt_catalog,
        surface,
        swipe,
        mobility,
        area_m: m.area_m,
    })
}
