//! Simulator and resource-management toolkit for digital-twin-assisted
//! multicast short-video streaming.
//!
//! The crate is layered bottom-up:
//!
//! - [`domain`]: immutable scenario data (catalog, groups, network constants)
//!   and the configuration schema it is built from.
//! - [`mobility`]: Lévy-flight users, path-loss/fading channels, per-window
//!   user status emulation and the user-dynamics metric.
//! - [`dt`]: digital-twin model sizes, the clustering-accuracy surface and its
//!   least-squares fit.
//! - [`latency`]: DT processing, transcoding and multicast transmission delays.
//! - [`env`]: the sequential decision environment, action decoding and a
//!   brute-force optimum.
//! - [`neural`]: small multilayer perceptrons with exact reverse-mode gradients.
//! - [`agents`]: diffusion-actor TD3 plus the MDDPG and dueling DQN baselines.
//! - [`harness`]: experiment plans, sweeps, oracle comparisons and CSV output.

pub mod agents;
pub mod domain;
pub mod dt;
pub mod env;
mod error;
pub mod harness;
pub mod latency;
pub mod mobility;
pub mod neural;
pub mod rng;

pub use domain::{
    build_scenario, Category, MulticastGroup, NetworkConfig, Scenario, ScenarioConfig, SwipeModel,
    Video, WeibullParams,
};
pub use dt::{AccuracySurface, DtModelSpec};
pub use env::{decode_action, Action, Env, RawAction, State};
pub use error::{Error, Result};
pub use latency::{LatencyBreakdown, WindowContext};
pub use mobility::{MobilityParams, UserStatusWindow};
