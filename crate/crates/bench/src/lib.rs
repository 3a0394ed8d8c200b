//! Fixtures shared by the criterion benches.

use std::sync::Arc;

use twinstream_core::{build_scenario, Env, ScenarioConfig, WindowContext};

/// Desk scenario reset at `seed`, together with its first window context.
pub fn desk_window(groups: usize, users: usize, seed: u64) -> (Env, WindowContext) {
    let scenario = build_scenario(&ScenarioConfig::desk(groups, users)).expect("desk scenario builds");
    let mut env = Env::new(Arc::new(scenario));
    env.reset(seed);
    let ctx = env.next_context();
    (env, ctx)
}
