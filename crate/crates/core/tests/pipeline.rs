use std::sync::Arc;

use proptest::prelude::*;
use twinstream_core::env::{brute_force_optimum, kkt_split};
use twinstream_core::harness::{build_evaluator, evaluate, run, Algorithm, Evaluator, ExperimentPlan};
use twinstream_core::latency::service_latency;
use twinstream_core::{build_scenario, decode_action, Action, Env, RawAction, ScenarioConfig};

fn desk(groups: usize, users: usize) -> Arc<twinstream_core::Scenario> {
    Arc::new(build_scenario(&ScenarioConfig::desk(groups, users)).unwrap())
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = ScenarioConfig::desk(3, 5);
    let back = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(cfg, back);
    assert_eq!(build_scenario(&cfg).unwrap(), build_scenario(&back).unwrap());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let text = format!("{}\n[agent]\nlearning_rate = 0.1\n", ScenarioConfig::desk(2, 3).to_toml());
    assert!(ScenarioConfig::from_toml(&text).is_err());
}

#[test]
fn episodes_replay_exactly_from_the_seed() {
    let sc = desk(3, 5);
    let rollout = |seed| {
        let mut env = Env::new(sc.clone()).with_episode_len(8);
        env.reset(seed);
        let a = env.default_action();
        (0..8).map(|_| env.step(&a).unwrap().info).collect::<Vec<_>>()
    };
    assert_eq!(rollout(11), rollout(11));
    assert_ne!(rollout(11), rollout(12));
}

#[test]
fn episode_ends_after_configured_length() {
    let mut env = Env::new(desk(2, 3)).with_episode_len(5);
    env.reset(1);
    let a = env.default_action();
    let done: Vec<bool> = (0..5).map(|_| env.step(&a).unwrap().done).collect();
    assert_eq!(done, [false, false, false, false, true]);
}

#[test]
fn oracle_never_loses_to_fixed_splits() {
    let sc = desk(3, 5);
    let mut env = Env::new(sc.clone());
    env.reset(3);
    for _ in 0..4 {
        let ctx = env.next_context();
        let best = brute_force_optimum(&ctx, 41).unwrap();
        for model in 0..sc.model_count() {
            let eq = Action::equal_split(sc.model_count(), model, 3, sc.net.bandwidth_mhz);
            let lat = service_latency(&eq, &ctx).unwrap().total_s;
            assert!(best.latency_s <= lat + 1e-12, "model {model}: {} > {lat}", best.latency_s);
        }
        let kkt = kkt_split(&ctx, best.action.model());
        assert!((kkt.iter().sum::<f64>() - sc.net.bandwidth_mhz).abs() < 1e-9);
        env.apply(&ctx, &best.action).unwrap();
    }
}

#[test]
fn oracle_evaluator_is_a_lower_envelope() {
    let sc = desk(2, 5);
    let oracle = Evaluator::Oracle { grid_points: 41 };
    let fixed = Evaluator::Policy(Box::new(twinstream_core::agents::EqualSplit::default()));
    let a = evaluate(&oracle, sc.clone(), 4, 6).unwrap();
    let b = evaluate(&fixed, sc.clone(), 4, 6).unwrap();
    for (o, f) in a.iter().zip(&b) {
        assert!(o.latency_s <= f.latency_s + 1e-12);
    }
}

#[test]
fn short_training_run_writes_expected_artifacts() {
    let mut cfg = ScenarioConfig::desk(2, 3);
    cfg.agent.episodes = 2;
    cfg.agent.steps_per_episode = 10;
    cfg.agent.batch = 8;
    cfg.agent.hidden = vec![8];
    cfg.experiment.algorithms = vec![Algorithm::Dftd3, Algorithm::EqualSplit];
    cfg.experiment.seeds = vec![1];
    cfg.experiment.eval_windows = 3;
    let tmp = tempfile::tempdir().unwrap();
    let art = run(&ExperimentPlan::from_config(cfg, tmp.path()).unwrap()).unwrap();
    let mut names: Vec<_> = art.manifest.files.iter().map(|f| f.name.clone()).collect();
    names.sort();
    assert_eq!(
        names,
        [
            "dftd3_seed1.ckpt.json",
            "dftd3_seed1_eval.csv",
            "dftd3_seed1_train.csv",
            "equal-split_seed1_eval.csv"
        ]
    );
    for f in &art.manifest.files {
        assert!(tmp.path().join(&f.name).exists());
        assert_eq!(f.sha256.len(), 64);
    }
    assert!(tmp.path().join("manifest.json").exists());
}

#[test]
fn trained_policies_only_emit_valid_actions() {
    let mut cfg = ScenarioConfig::desk(3, 3);
    cfg.agent.episodes = 2;
    cfg.agent.steps_per_episode = 10;
    cfg.agent.batch = 8;
    cfg.agent.hidden = vec![8];
    let sc = Arc::new(build_scenario(&cfg).unwrap());
    for algorithm in [Algorithm::Dftd3, Algorithm::Mddpg, Algorithm::Ddqn] {
        let mut env = Env::new(sc.clone()).with_episode_len(10);
        let (ev, log) = build_evaluator(algorithm, &mut env, &cfg.agent, 2, 11).unwrap();
        assert_eq!(log.len(), 2);
        for info in evaluate(&ev, sc.clone(), 2, 5).unwrap() {
            assert!((info.bandwidth_mhz.iter().sum::<f64>() - sc.net.bandwidth_mhz).abs() < 1e-9);
            assert!(info.model < sc.model_count());
            assert!(info.latency_s > 0.0 && info.latency_s.is_finite());
        }
    }
}

proptest! {
    #[test]
    fn decoded_actions_pass_validation(raw in prop::collection::vec(0.0f64..=1.0, 6)) {
        let sc = desk(3, 3);
        let a = decode_action(&RawAction(raw), 3, &sc.net);
        prop_assert!(a.validate(&sc.net).is_ok());
        let mut env = Env::new(sc.clone());
        env.reset(0);
        let step = env.step(&a).unwrap();
        prop_assert!(step.info.latency_s <= env.max_latency());
    }

    #[test]
    fn more_bandwidth_never_hurts_the_equal_split(extra in 0.1f64..6.0, seed in 0u64..50) {
        let sc = desk(2, 3);
        let wider = sc.with_capacity(Some(sc.net.bandwidth_mhz + extra), None);
        let lat = |s: &twinstream_core::Scenario| {
            let mut env = Env::new(Arc::new(s.clone()));
            env.reset(seed);
            let ctx = env.next_context();
            let a = Action::equal_split(s.model_count(), 0, 2, s.net.bandwidth_mhz);
            service_latency(&a, &ctx).unwrap().total_s
        };
        prop_assert!(lat(&wider) <= lat(&sc) + 1e-12);
    }
}
