use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Algorithm;
use crate::agents::{
    ddqn_train, dftd3_train, mddpg_train, write_train_log, Ddqn, Dftd3, EqualSplit, Hyperparams, Mddpg, Policy,
    TrainLog,
};
use crate::neural::Checkpoint;
use crate::domain::{build_scenario, Scenario, ScenarioConfig};
use crate::env::{brute_force_optimum, Env, StepInfo, StepLogWriter};
use crate::rng::derive_seed;
use crate::{Error, Result};

/// Everything a run needs; built from a scenario config and an output dir.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub config: ScenarioConfig,
    /// Bytes hashed into the manifest (the config file as read).
    pub config_bytes: Vec<u8>,
    pub out_dir: PathBuf,
}

impl ExperimentPlan {
    pub fn new(config: ScenarioConfig, config_bytes: Vec<u8>, out_dir: impl Into<PathBuf>) -> Result<Self> {
        let plan = ExperimentPlan {
            config,
            config_bytes,
            out_dir: out_dir.into(),
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Plan whose hashed bytes are the serialized config.
    pub fn from_config(config: ScenarioConfig, out_dir: impl Into<PathBuf>) -> Result<Self> {
        let bytes = config.to_toml().into_bytes();
        Self::new(config, bytes, out_dir)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.agent.validate()?;
        self.config.experiment.validate()
    }

    pub fn hp(&self) -> &Hyperparams {
        &self.config.agent
    }

    pub fn config_hash(&self) -> String {
        hex(&Sha256::digest(&self.config_bytes))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// A greedy policy or the per-window brute-force optimum.
pub enum Evaluator {
    Policy(Box<dyn Policy>),
    Oracle { grid_points: usize },
}

impl Evaluator {
    pub fn name(&self) -> &'static str {
        match self {
            Evaluator::Policy(p) => p.name(),
            Evaluator::Oracle { .. } => "oracle",
        }
    }
}

/// Train `algorithm` on `env` (no-op for the fixed rules).
pub fn build_evaluator(
    algorithm: Algorithm,
    env: &mut Env,
    hp: &Hyperparams,
    seed: u64,
    oracle_grid: usize,
) -> Result<(Evaluator, TrainLog)> {
    Ok(match algorithm {
        Algorithm::Dftd3 => {
            let (a, log) = dftd3_train(env, hp, seed)?;
            (Evaluator::Policy(Box::new(a)), log)
        }
        Algorithm::Mddpg => {
            let (a, log) = mddpg_train(env, hp, seed)?;
            (Evaluator::Policy(Box::new(a)), log)
        }
        Algorithm::Ddqn => {
            let (a, log) = ddqn_train(env, hp, seed)?;
            (Evaluator::Policy(Box::new(a)), log)
        }
        Algorithm::EqualSplit => (Evaluator::Policy(Box::new(EqualSplit::default())), Vec::new()),
        Algorithm::Oracle => (Evaluator::Oracle { grid_points: oracle_grid }, Vec::new()),
    })
}

/// Rebuild a learned policy from its checkpoint; `kind` picks the agent.
pub fn load_policy(c: &Checkpoint, env: &Env, hp: &Hyperparams, seed: u64) -> Result<Box<dyn Policy>> {
    Ok(match c.kind.as_str() {
        "dftd3" => Box::new(Dftd3::from_checkpoint(c, hp, seed)?),
        "mddpg" => Box::new(Mddpg::from_checkpoint(c, hp, seed)?),
        "ddqn" => Box::new(Ddqn::from_checkpoint(c, env, hp, seed)?),
        other => return Err(Error::Checkpoint(format!("unknown agent kind {other:?}"))),
    })
}

/// Environment seed for evaluation runs; disjoint from training episodes.
pub fn eval_seed(seed: u64) -> u64 {
    derive_seed(seed, 0xE7A1_5EED)
}

/// Greedy rollout over `windows` consecutive windows.
pub fn evaluate(ev: &Evaluator, scenario: Arc<Scenario>, seed: u64, windows: usize) -> Result<Vec<StepInfo>> {
    let mut env = Env::new(scenario).with_episode_len(windows);
    env.reset(eval_seed(seed));
    let net = env.scenario().net.clone();
    let mut out = Vec::with_capacity(windows);
    for _ in 0..windows {
        let features = env.state().expect("reset").features(&net);
        let ctx = env.next_context();
        let action = match ev {
            Evaluator::Policy(p) => p.greedy(&features, &env)?,
            Evaluator::Oracle { grid_points } => brute_force_optimum(&ctx, *grid_points)?.action,
        };
        let step = env.apply(&ctx, &action)?;
        log::debug!("{}", serde_json::to_string(&step.info)?);
        out.push(step.info);
    }
    Ok(out)
}

pub fn write_eval_csv<W: Write>(infos: &[StepInfo], groups: usize, out: W) -> Result<W> {
    let mut w = StepLogWriter::new(out, groups)?;
    for i in infos {
        w.write(i)?;
    }
    w.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub code_version: String,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<Algorithm>,
    pub files: Vec<ManifestFile>,
}

impl Manifest {
    pub fn new(plan: &ExperimentPlan) -> Self {
        Manifest {
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: plan.config_hash(),
            seeds: plan.config.experiment.seeds.clone(),
            algorithms: plan.config.experiment.algorithms.clone(),
            files: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_json().as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

/// Write `bytes` under `dir` and record its hash.
pub(crate) fn emit(dir: &Path, name: &str, bytes: &[u8], manifest: &mut Manifest) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    manifest.files.push(ManifestFile {
        name: name.to_string(),
        sha256: hex(&Sha256::digest(bytes)),
    });
    Ok(())
}

pub(crate) fn finish_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let path = dir.join("manifest.json");
    fs::write(&path, manifest.to_json()).map_err(|e| Error::io(&path, e))
}

/// Train and greedily evaluate every (algorithm, seed) of the plan.
pub fn run(plan: &ExperimentPlan) -> Result<Artifacts> {
    plan.validate()?;
    let dir = &plan.out_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let scenario = Arc::new(build_scenario(&plan.config)?);
    let hp = plan.hp();
    let exp = &plan.config.experiment;
    let mut manifest = Manifest::new(plan);
    for &algorithm in &exp.algorithms {
        for &seed in &exp.seeds {
            let stem = format!("{algorithm}_seed{seed}");
            let mut env = Env::new(scenario.clone()).with_episode_len(hp.steps_per_episode);
            let (ev, log) = build_evaluator(algorithm, &mut env, hp, seed, exp.oracle_grid)?;
            if algorithm.learns() {
                let mut buf = Vec::new();
                write_train_log(&log, &mut buf)?;
                emit(dir, &format!("{stem}_train.csv"), &buf, &mut manifest)?;
                if let Evaluator::Policy(p) = &ev {
                    if let Some(c) = p.checkpoint() {
                        emit(dir, &format!("{stem}.ckpt.json"), c.to_json().as_bytes(), &mut manifest)?;
                    }
                }
            }
            let infos = evaluate(&ev, scenario.clone(), seed, exp.eval_windows)?;
            let buf = write_eval_csv(&infos, scenario.group_count(), Vec::new())?;
            emit(dir, &format!("{stem}_eval.csv"), &buf, &mut manifest)?;
            log::info!(
                "{stem}: mean eval latency {:.4} s",
                infos.iter().map(|i| i.latency_s).sum::<f64>() / infos.len() as f64
            );
        }
    }
    finish_manifest(dir, &manifest)?;
    Ok(Artifacts {
        dir: dir.clone(),
        manifest,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    /// Policy latency / grid-optimum latency, per window.
    pub ratios: Vec<f64>,
    pub min: f64,
    pub median: f64,
    pub mean: f64,
    pub max: f64,
}

impl OracleReport {
    pub fn from_ratios(ratios: Vec<f64>) -> Self {
        let mut sorted = ratios.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n == 0 {
            f64::NAN
        } else if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        OracleReport {
            min: sorted.first().copied().unwrap_or(f64::NAN),
            max: sorted.last().copied().unwrap_or(f64::NAN),
            mean: sorted.iter().sum::<f64>() / n as f64,
            median,
            ratios,
        }
    }
}

/// Per-window latency ratio of `ev` against the brute-force optimum.
/// Policies acting off the grid can land slightly below 1.
pub fn compare_oracle(
    ev: &Evaluator,
    scenario: Arc<Scenario>,
    seed: u64,
    windows: usize,
    grid_points: usize,
) -> Result<OracleReport> {
    let mut env = Env::new(scenario).with_episode_len(windows);
    env.reset(eval_seed(seed));
    let net = env.scenario().net.clone();
    let mut ratios = Vec::with_capacity(windows);
    for _ in 0..windows {
        let features = env.state().expect("reset").features(&net);
        let ctx = env.next_context();
        let best = brute_force_optimum(&ctx, grid_points)?;
        let action = match ev {
            Evaluator::Policy(p) => p.greedy(&features, &env)?,
            Evaluator::Oracle { .. } => best.action.clone(),
        };
        let step = env.apply(&ctx, &action)?;
        ratios.push(step.info.latency_s / best.latency_s);
    }
    Ok(OracleReport::from_ratios(ratios))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoints_reload_to_identical_greedy_actions() {
        let mut cfg = ScenarioConfig::desk(2, 3);
        cfg.agent.episodes = 2;
        cfg.agent.steps_per_episode = 10;
        cfg.agent.batch = 8;
        cfg.agent.hidden = vec![8];
        let scenario = Arc::new(build_scenario(&cfg).unwrap());
        for algorithm in [Algorithm::Dftd3, Algorithm::Mddpg, Algorithm::Ddqn] {
            let mut env = Env::new(scenario.clone()).with_episode_len(10);
            let (ev, _) = build_evaluator(algorithm, &mut env, &cfg.agent, 3, 11).unwrap();
            let Evaluator::Policy(p) = &ev else { unreachable!() };
            let c = Checkpoint::from_json(&p.checkpoint().unwrap().to_json()).unwrap();
            let back = Evaluator::Policy(load_policy(&c, &env, &cfg.agent, 3).unwrap());
            let a = evaluate(&ev, scenario.clone(), 3, 5).unwrap();
            let b = evaluate(&back, scenario.clone(), 3, 5).unwrap();
            assert_eq!(a, b, "{algorithm}");
        }
        let mut bad = Checkpoint::new("nope");
        bad.scalars.push(("x".into(), 1.0));
        let env = Env::new(scenario);
        assert!(matches!(load_policy(&bad, &env, &cfg.agent, 0), Err(Error::Checkpoint(_))));
    }

    fn plan(dir: &Path, algorithms: Vec<Algorithm>) -> ExperimentPlan {
        let mut cfg = ScenarioConfig::desk(2, 3);
        cfg.agent.episodes = 2;
        cfg.agent.steps_per_episode = 10;
        cfg.agent.batch = 8;
        cfg.agent.hidden = vec![8];
        cfg.experiment.algorithms = algorithms;
        cfg.experiment.seeds = vec![1, 2];
        cfg.experiment.eval_windows = 3;
        cfg.experiment.oracle_grid = 11;
        ExperimentPlan::from_config(cfg, dir).unwrap()
    }

    #[test]
    fn equal_split_writes_eval_only() {
        let tmp = tempfile::tempdir().unwrap();
        let a = run(&plan(tmp.path(), vec![Algorithm::EqualSplit])).unwrap();
        let names: Vec<&str> = a.manifest.files.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, vec!["equal-split_seed1_eval.csv", "equal-split_seed2_eval.csv"]);
        let text = fs::read_to_string(tmp.path().join("equal-split_seed1_eval.csv")).unwrap();
        assert_eq!(text.lines().count(), 1 + 3);
        assert!(tmp.path().join("manifest.json").exists());
    }

    #[test]
    fn identical_plans_identical_manifests() {
        let t1 = tempfile::tempdir().unwrap();
        let t2 = tempfile::tempdir().unwrap();
        let algos = vec![Algorithm::Dftd3, Algorithm::Ddqn, Algorithm::Oracle];
        let a = run(&plan(t1.path(), algos.clone())).unwrap();
        let b = run(&plan(t2.path(), algos)).unwrap();
        assert_eq!(a.manifest.hash(), b.manifest.hash());
        assert!(a.manifest.files.iter().any(|f| f.name == "dftd3_seed1.ckpt.json"));
        for f in &a.manifest.files {
            assert_eq!(fs::read(t1.path().join(&f.name)).unwrap(), fs::read(t2.path().join(&f.name)).unwrap());
        }
    }

    #[test]
    fn empty_seeds_rejected() {
        let mut cfg = ScenarioConfig::desk(2, 3);
        cfg.experiment.seeds.clear();
        assert!(matches!(ExperimentPlan::from_config(cfg, "/tmp/unused"), Err(Error::Plan(_))));
    }

    #[test]
    fn oracle_against_itself_is_one() {
        let s = Arc::new(build_scenario(&ScenarioConfig::desk(2, 3)).unwrap());
        let r = compare_oracle(&Evaluator::Oracle { grid_points: 21 }, s, 3, 4, 21).unwrap();
        assert!(r.ratios.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn equal_split_loses_on_asymmetric_groups() {
        let mut cfg = ScenarioConfig::desk(2, 3);
        // A wide area spreads the users, so the groups' worst channels differ.
        cfg.mobility.area_m = 3000.0;
        let s = Arc::new(build_scenario(&cfg).unwrap());
        let ev = Evaluator::Policy(Box::new(EqualSplit::default()));
        let r = compare_oracle(&ev, s, 5, 6, 41).unwrap();
        assert!(r.ratios.iter().all(|&x| x >= 1.0));
        assert!(r.max > 1.0);
    }
}
