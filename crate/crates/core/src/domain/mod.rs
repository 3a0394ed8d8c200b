//! Immutable scenario data: the video catalog, swipe behaviour, multicast
//! groups and network constants shared by every other module.

mod config;

use serde::{Deserialize, Serialize};

use crate::dt::{AccuracySurface, DtModelSpec};
use crate::mobility::MobilityParams;
use crate::{Error, Result};

pub use config::{
    build_scenario, CatalogSection, DtSection, GroupsSection, MobilitySection, NetworkSection,
    ScenarioConfig, SurfaceSection, SwipeOverride, SwipeSection,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Entertainment,
    Games,
    Food,
    Sports,
    Science,
    Dance,
    Travel,
    News,
}

impl Category {
    pub const ALL: [Category; 8] = [
        Category::Entertainment,
        Category::Games,
        Category::Food,
        Category::Sports,
        Category::Science,
        Category::Dance,
        Category::Travel,
        Category::News,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Category {
        Self::ALL[i % Self::ALL.len()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Video {
    pub id: u32,
    pub category: Category,
    pub duration_s: f64,
    pub segment_len_s: f64,
    /// Per-layer bitrates in Mb/s; index 0 is the base layer (layer 1).
    pub layer_rates: Vec<f64>,
}

impl Video {
    pub fn layer_count(&self) -> usize {
        self.layer_rates.len()
    }

    pub fn segment_count(&self) -> usize {
        (self.duration_s / self.segment_len_s).round() as usize
    }

    /// Start time of every segment.
    pub fn segment_starts(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.segment_count()).map(move |s| s as f64 * self.segment_len_s)
    }
}

/// Size in megabits of `layer` (1-based) for the segment containing
/// `position_s`. Piecewise constant in the position.
pub fn layer_size(video: &Video, layer: usize, position_s: f64) -> Result<f64> {
    if layer < 1 || layer > video.layer_count() {
        return Err(Error::OutOfRange {
            what: "layer",
            value: layer as f64,
            range: format!("[1, {}]", video.layer_count()),
        });
    }
    if !(0.0..video.duration_s).contains(&position_s) {
        return Err(Error::OutOfRange {
            what: "position_s",
            value: position_s,
            range: format!("[0, {})", video.duration_s),
        });
    }
    // Layer rates are constant across segments in this catalog, so the
    // segment index only matters for the range check above.
    Ok(video.layer_rates[layer - 1] * video.segment_len_s)
}

/// Weibull watch-time distribution parameters (seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    pub shape: f64,
    pub scale: f64,
}

impl WeibullParams {
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        1.0 - (-(x / self.scale).powf(self.shape)).exp()
    }

    /// Inverse-CDF draw for a uniform `u` in [0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        self.scale * (-(1.0 - u).ln()).powf(1.0 / self.shape)
    }
}

/// Swipe (abandonment) distributions per (group, category).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwipeModel {
    groups: usize,
    params: Vec<WeibullParams>,
}

impl SwipeModel {
    pub fn uniform(groups: usize, params: WeibullParams) -> Self {
        SwipeModel {
            groups,
            params: vec![params; groups * Category::ALL.len()],
        }
    }

    pub fn params(&self, group: usize, category: Category) -> WeibullParams {
        self.params[group * Category::ALL.len() + category.index()]
    }

    pub fn set(&mut self, group: usize, category: Category, params: WeibullParams) {
        self.params[group * Category::ALL.len() + category.index()] = params;
    }

    /// All category distributions of one group, indexed by [`Category::index`].
    pub fn group_row(&self, group: usize) -> &[WeibullParams] {
        let n = Category::ALL.len();
        &self.params[group * n..(group + 1) * n]
    }

    pub fn group_count(&self) -> usize {
        self.groups
    }
}

/// Probability that `group` has swiped away from `video` by `position_s`.
pub fn swipe_cdf(model: &SwipeModel, group: usize, video: &Video, position_s: f64) -> Result<f64> {
    if position_s < 0.0 || position_s.is_nan() {
        return Err(Error::OutOfRange {
            what: "position_s",
            value: position_s,
            range: format!("[0, {}]", video.duration_s),
        });
    }
    Ok(model.params(group, video.category).cdf(position_s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticastGroup {
    pub id: usize,
    pub users: Vec<u32>,
    pub recommended_list: Vec<u32>,
    /// Average number of SVC layers delivered in the previous window.
    pub avg_version: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub bandwidth_mhz: f64,
    pub compute_gcps: f64,
    pub window_s: f64,
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub kappa_mcycles_per_mb: f64,
    pub mu_gcycles_per_mb: f64,
    pub dynamics_weights: [f64; 4],
    pub group_count: usize,
}

impl NetworkConfig {
    pub fn tx_power_mw(&self) -> f64 {
        10f64.powf(self.tx_power_dbm / 10.0)
    }

    pub fn noise_psd_mw_hz(&self) -> f64 {
        10f64.powf(self.noise_psd_dbm_hz / 10.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub catalog: Vec<Video>,
    pub groups: Vec<MulticastGroup>,
    pub net: NetworkConfig,
    pub dt_catalog: Vec<DtModelSpec>,
    pub surface: AccuracySurface,
    pub swipe: SwipeModel,
    pub mobility: MobilityParams,
    pub area_m: f64,
}

impl Scenario {
    pub fn video(&self, id: u32) -> Option<&Video> {
        // Catalog ids are dense and equal to their index.
        self.catalog.get(id as usize).filter(|v| v.id == id)
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn model_count(&self) -> usize {
        self.dt_catalog.len()
    }

    pub fn user_count(&self) -> usize {
        self.groups.iter().map(|g| g.users.len()).sum()
    }

    pub fn max_layers(&self) -> usize {
        self.catalog.iter().map(Video::layer_count).max().unwrap_or(1)
    }

    /// Copy of this scenario with different bandwidth and/or compute capacity.
    pub fn with_capacity(&self, bandwidth_mhz: Option<f64>, compute_gcps: Option<f64>) -> Scenario {
        let mut s = self.clone();
        if let Some(b) = bandwidth_mhz {
            s.net.bandwidth_mhz = b;
        }
        if let Some(c) = compute_gcps {
            s.net.compute_gcps = c;
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn video() -> Video {
        Video {
            id: 0,
            category: Category::Games,
            duration_s: 15.0,
            segment_len_s: 1.0,
            layer_rates: vec![1.0, 0.5, 0.5, 1.0],
        }
    }

    #[test]
    fn layer_size_is_rate_times_segment() {
        let v = video();
        assert_eq!(layer_size(&v, 1, 3.2).unwrap(), 1.0);
        assert_eq!(layer_size(&v, 2, 3.2).unwrap(), 0.5);
        assert!(layer_size(&v, 5, 3.2).is_err());
        assert!(layer_size(&v, 0, 3.2).is_err());
        assert!(layer_size(&v, 1, 15.0).is_err());
        assert!(layer_size(&v, 1, -0.1).is_err());
    }

    #[test]
    fn layer_size_telescopes_to_rate_times_duration() {
        let v = Video {
            segment_len_s: 2.5,
            ..video()
        };
        for layer in 1..=v.layer_count() {
            let total: f64 = v
                .segment_starts()
                .map(|x| layer_size(&v, layer, x).unwrap())
                .sum();
            let expect = v.layer_rates[layer - 1] * v.duration_s;
            assert!((total - expect).abs() < 1e-12, "layer {layer}: {total} vs {expect}");
        }
    }

    #[test]
    fn swipe_cdf_values() {
        let mut m = SwipeModel::uniform(
            1,
            WeibullParams {
                shape: 1.0,
                scale: 10.0,
            },
        );
        let v = video();
        assert_eq!(swipe_cdf(&m, 0, &v, 0.0).unwrap(), 0.0);
        let p = swipe_cdf(&m, 0, &v, 10.0).unwrap();
        assert!((p - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert!((p - 0.6321).abs() < 1e-4);

        m.set(
            0,
            Category::Games,
            WeibullParams {
                shape: 1.2,
                scale: v.duration_s / 100.0,
            },
        );
        assert!(swipe_cdf(&m, 0, &v, v.duration_s).unwrap() > 0.999);
        assert!(swipe_cdf(&m, 0, &v, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn swipe_cdf_is_monotone(shape in 0.05f64..8.0, scale in 0.01f64..100.0,
                                 a in 0.0f64..30.0, b in 0.0f64..30.0) {
            let w = WeibullParams { shape, scale };
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (pl, ph) = (w.cdf(lo), w.cdf(hi));
            prop_assert!(pl <= ph);
            prop_assert!((0.0..=1.0).contains(&pl) && (0.0..=1.0).contains(&ph));
        }
    }
}
