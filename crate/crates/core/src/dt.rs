//! Digital-twin measurement model: model-size accounting, the clustering
//! accuracy surface over (model size, user dynamics), and the quadratic
//! least-squares fit that produces it.

use std::io::Read;
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Weight and bias counts of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: u64,
    pub biases: u64,
}

impl LayerParams {
    pub const fn new(weights: u64, biases: u64) -> Self {
        LayerParams { weights, biases }
    }

    /// Dense layer `inputs -> outputs`.
    pub const fn dense(inputs: u64, outputs: u64) -> Self {
        LayerParams::new(inputs * outputs, outputs)
    }

    /// 2-D convolution with a square kernel.
    pub const fn conv(kernel: u64, in_channels: u64, out_channels: u64) -> Self {
        LayerParams::new(kernel * kernel * in_channels * out_channels, out_channels)
    }

    fn total(&self) -> u64 {
        self.weights + self.biases
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DtModelSpec {
    pub version: u32,
    pub conv_layers: Vec<LayerParams>,
    pub dense_layers: Vec<LayerParams>,
    /// Number of cluster centroids.
    pub centroids: u64,
    pub feature_dim: u64,
    pub param_size_mb: f64,
    pub feature_size_mb: f64,
}

impl DtModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.version < 1 {
            return Err(Error::Config("DT model version must be ≥ 1".into()));
        }
        for (what, v) in [
            ("param_size_mb", self.param_size_mb),
            ("feature_size_mb", self.feature_size_mb),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "DT model {}: {what} must be positive",
                    self.version
                )));
            }
        }
        Ok(())
    }
}

/// Model size: parameter storage of every conv and dense layer plus the
/// centroid table, `S_p·Σ(w+b) + K·d·S_d`.
pub fn model_size(spec: &DtModelSpec) -> f64 {
    let params: u64 = spec
        .conv_layers
        .iter()
        .chain(&spec.dense_layers)
        .map(LayerParams::total)
        .sum();
    spec.param_size_mb * params as f64
        + (spec.centroids * spec.feature_dim) as f64 * spec.feature_size_mb
}

/// Per-unit size used by the default catalog. Scales raw parameter counts
/// into the size-score range the accuracy surface was fitted on.
pub const DEFAULT_UNIT_SIZE: f64 = 0.0073;

/// Three autoencoder + dueling-DQN depths; sizes score roughly 2000, 5000
/// and 9000.
pub fn default_catalog() -> Vec<DtModelSpec> {
    use LayerParams as L;
    let encoder = vec![L::conv(3, 1, 16), L::conv(3, 16, 32)];
    let deep_encoder = vec![L::conv(3, 1, 16), L::conv(3, 16, 32), L::conv(3, 32, 64)];
    let spec = |version, conv_layers, dense_layers| DtModelSpec {
        version,
        conv_layers,
        dense_layers,
        centroids: 8,
        feature_dim: 32,
        param_size_mb: DEFAULT_UNIT_SIZE,
        feature_size_mb: DEFAULT_UNIT_SIZE,
    };
    vec![
        spec(
            1,
            encoder.clone(),
            vec![
                L::dense(2048, 128),
                L::dense(128, 32),
                L::dense(32, 64),
                L::dense(64, 10),
            ],
        ),
        spec(
            2,
            encoder,
            vec![
                L::dense(2048, 304),
                L::dense(304, 128),
                L::dense(128, 32),
                L::dense(32, 128),
                L::dense(128, 64),
                L::dense(64, 10),
            ],
        ),
        spec(
            3,
            deep_encoder,
            vec![
                L::dense(2048, 512),
                L::dense(512, 256),
                L::dense(256, 32),
                L::dense(32, 128),
                L::dense(128, 64),
                L::dense(64, 64),
                L::dense(64, 10),
            ],
        ),
    ]
}

static OUT_OF_DOMAIN: AtomicU64 = AtomicU64::new(0);

/// Number of accuracy evaluations whose inputs had to be clamped into the
/// surface domain, process-wide.
pub fn out_of_domain_count() -> u64 {
    OUT_OF_DOMAIN.load(Ordering::Relaxed)
}

/// Quadratic clustering-accuracy surface over basis
/// `{1, m, ψ, m², mψ, ψ²}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracySurface {
    pub coefficients: [f64; 6],
    pub m_range: (f64, f64),
    pub psi_range: (f64, f64),
}

pub const PAPER_COEFFICIENTS: [f64; 6] = [0.8246, 3.793e-5, -0.2262, -2.044e-9, 3.931e-5, -0.3294];

fn basis(m: f64, psi: f64) -> [f64; 6] {
    [1.0, m, psi, m * m, m * psi, psi * psi]
}

impl AccuracySurface {
    /// The published fit, over model sizes up to 10⁴ and ψ in [0, 1].
    pub fn paper() -> Self {
        AccuracySurface {
            coefficients: PAPER_COEFFICIENTS,
            m_range: (0.0, 10_000.0),
            psi_range: (0.0, 1.0),
        }
    }

    /// Unclamped polynomial value.
    pub fn polynomial(&self, m: f64, psi: f64) -> f64 {
        basis(m, psi)
            .iter()
            .zip(&self.coefficients)
            .map(|(b, c)| b * c)
            .sum()
    }

    pub fn contains(&self, m: f64, psi: f64) -> bool {
        (self.m_range.0..=self.m_range.1).contains(&m)
            && (self.psi_range.0..=self.psi_range.1).contains(&psi)
    }

    /// Accuracy in [0, 1] plus whether the inputs had to be clamped.
    pub fn accuracy_checked(&self, m: f64, psi: f64) -> (f64, bool) {
        let inside = self.contains(m, psi);
        if !inside && OUT_OF_DOMAIN.fetch_add(1, Ordering::Relaxed) == 0 {
            log::warn!("accuracy surface evaluated outside its domain at m={m}, psi={psi}");
        }
        let m = m.clamp(self.m_range.0, self.m_range.1);
        let psi = psi.clamp(self.psi_range.0, self.psi_range.1);
        (self.polynomial(m, psi).clamp(0.0, 1.0), !inside)
    }
}

pub fn accuracy(surface: &AccuracySurface, m: f64, psi: f64) -> f64 {
    surface.accuracy_checked(m, psi).0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub m: f64,
    pub psi: f64,
    pub acc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfaceFit {
    pub surface: AccuracySurface,
    pub r2: f64,
    /// Residual standard error, `sqrt(SSE / (n − 6))`.
    pub rmse: f64,
}

/// Ordinary least squares over the quadratic basis.
///
/// Columns are scaled to unit max-norm before the SVD solve since `m²`
/// spans eight orders of magnitude more than the constant column.
pub fn fit_surface(samples: &[Measurement]) -> Result<SurfaceFit> {
    const P: usize = 6;
    if samples.len() < P {
        return Err(Error::InsufficientSamples {
            needed: P,
            got: samples.len(),
        });
    }
    let n = samples.len();
    let mut x = DMatrix::<f64>::zeros(n, P);
    for (i, s) in samples.iter().enumerate() {
        for (j, b) in basis(s.m, s.psi).into_iter().enumerate() {
            x[(i, j)] = b;
        }
    }
    let y = DVector::from_iterator(n, samples.iter().map(|s| s.acc));

    let mut scale = [1.0; P];
    for (j, sc) in scale.iter_mut().enumerate() {
        let max = x.column(j).amax();
        if max > 0.0 {
            *sc = max;
            x.column_mut(j).unscale_mut(max);
        }
    }

    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * 1e-10;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < P {
        return Err(Error::RankDeficient { rank, cols: P });
    }
    let beta = svd
        .solve(&y, tol)
        .map_err(|e| Error::Config(format!("least squares solve failed: {e}")))?;

    let mut coefficients = [0.0; P];
    for j in 0..P {
        coefficients[j] = beta[j] / scale[j];
    }

    let fitted = &x * &beta;
    let sse: f64 = (&y - fitted).iter().map(|r| r * r).sum();
    let mean = y.mean();
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let r2 = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
    let dof = (n - P).max(1) as f64;

    let bound = |f: fn(&Measurement) -> f64| {
        samples
            .iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    };
    Ok(SurfaceFit {
        surface: AccuracySurface {
            coefficients,
            m_range: bound(|s| s.m),
            psi_range: bound(|s| s.psi),
        },
        r2,
        rmse: (sse / dof).sqrt(),
    })
}

/// Synthetic measurement campaign: (m, ψ) uniform over the surface domain,
/// accuracy observed as the polynomial plus Gaussian noise. Values are not
/// clamped: the polynomial peaks slightly above 1 and a clamp would bias
/// any refit.
pub fn synth_measurements(
    surface: &AccuracySurface,
    n: usize,
    noise_sd: f64,
    rng: &mut impl Rng,
) -> Vec<Measurement> {
    let noise = Normal::new(0.0, noise_sd.max(0.0)).expect("finite sd");
    (0..n)
        .map(|_| {
            let m = rng.random_range(surface.m_range.0..=surface.m_range.1);
            let psi = rng.random_range(surface.psi_range.0..=surface.psi_range.1);
            let e = if noise_sd > 0.0 { noise.sample(rng) } else { 0.0 };
            Measurement {
                m,
                psi,
                acc: surface.polynomial(m, psi) + e,
            }
        })
        .collect()
}

/// Read `m,psi,acc` rows (with header).
pub fn read_measurements<R: Read>(reader: R) -> Result<Vec<Measurement>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row?);
    }
    Ok(out)
}
