use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use log::info;
use twinstream_core::dt::{fit_surface, read_measurements, synth_measurements};
use twinstream_core::env::{Env, StepLogWriter};
use twinstream_core::harness::{
    build_evaluator, compare_oracle, evaluate, fmt_num, load_policy, run, sweep, write_eval_csv, write_sweep_csv,
    Algorithm, Evaluator, ExperimentPlan,
};
use twinstream_core::mobility::write_trace_csv;
use twinstream_core::neural::Checkpoint;
use twinstream_core::rng::seeded;
use twinstream_core::{build_scenario, AccuracySurface, Action, Error, Result, ScenarioConfig};

#[derive(Debug, Parser)]
#[command(name = "twinstream", version, about = "DT-assisted multicast short-video resource management")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario TOML; the built-in desk scenario (3 groups × 5 users) if omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (output file for `fit-surface`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override `agent.episodes`.
    #[arg(long, global = true)]
    episodes: Option<usize>,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the accuracy surface to `m,psi,acc` measurements.
    FitSurface {
        /// Measurement CSV with header `m,psi,acc`.
        #[arg(long, conflicts_with = "synth")]
        input: Option<PathBuf>,
        /// Fit this many synthetic samples of the reference surface instead.
        #[arg(long)]
        synth: Option<usize>,
        /// Noise sd for `--synth`.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// Train and greedily evaluate each (algorithm, seed).
    Train {
        #[arg(long = "algorithm", value_name = "NAME")]
        algorithms: Vec<Algorithm>,
    },
    /// Greedy evaluation of a checkpoint or a fixed rule.
    Eval {
        #[arg(long, required_unless_present = "checkpoint", conflicts_with = "checkpoint")]
        algorithm: Option<Algorithm>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        windows: Option<usize>,
    },
    /// Latency against bandwidth and compute capacity.
    Sweep {
        #[arg(long = "algorithm", value_name = "NAME")]
        algorithms: Vec<Algorithm>,
    },
    /// Per-window latency ratio against the brute-force optimum.
    Oracle {
        #[arg(long = "algorithm", value_name = "NAME")]
        algorithms: Vec<Algorithm>,
        #[arg(long)]
        windows: Option<usize>,
        /// Simplex grid points per axis.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Print the effective scenario config as TOML, after overrides.
    Config,
    /// Environment-only rollout under a fixed equal split.
    Simulate {
        #[arg(long, default_value_t = 20)]
        windows: usize,
        /// Zero-based DT model index.
        #[arg(long, default_value_t = 0)]
        model: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.common.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    match &cli.command {
        Command::FitSurface { input, synth, noise } => fit(input.as_deref(), *synth, *noise, c),
        Command::Train { algorithms } => {
            let plan = load_plan(c, algorithms)?;
            let art = run(&plan)?;
            println!("{}", art.manifest.to_json());
            Ok(())
        }
        Command::Eval {
            algorithm,
            checkpoint,
            windows,
        } => eval(*algorithm, checkpoint.as_deref(), *windows, c),
        Command::Sweep { algorithms } => {
            let plan = load_plan(c, algorithms)?;
            let rows = sweep(&plan)?;
            let buf = write_sweep_csv(&rows, Vec::new())?;
            print!("{}", String::from_utf8_lossy(&buf));
            Ok(())
        }
        Command::Oracle {
            algorithms,
            windows,
            grid,
        } => oracle(algorithms, *windows, *grid, c),
        Command::Config => {
            let (cfg, _) = load_config(c)?;
            build_scenario(&cfg)?;
            print!("{}", cfg.to_toml());
            Ok(())
        }
        Command::Simulate { windows, model } => simulate(*windows, *model, c),
    }
}

/// Config plus the command-line overrides, and the bytes that identify it.
fn load_config(c: &Common) -> Result<(ScenarioConfig, Vec<u8>)> {
    let (mut cfg, mut bytes) = match &c.config {
        Some(path) => {
            let bytes = fs::read(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let text = String::from_utf8(bytes.clone())
                .map_err(|_| Error::Config(format!("{}: not UTF-8", path.display())))?;
            (ScenarioConfig::from_toml(&text)?, bytes)
        }
        None => {
            let cfg = ScenarioConfig::desk(3, 5);
            let bytes = cfg.to_toml().into_bytes();
            (cfg, bytes)
        }
    };
    if let Some(seed) = c.seed {
        cfg.experiment.seeds = vec![seed];
        bytes.extend_from_slice(format!("\n# --seed {seed}\n").as_bytes());
    }
    if let Some(n) = c.episodes {
        cfg.agent.episodes = n;
        bytes.extend_from_slice(format!("\n# --episodes {n}\n").as_bytes());
    }
    Ok((cfg, bytes))
}

fn load_plan(c: &Common, algorithms: &[Algorithm]) -> Result<ExperimentPlan> {
    let (mut cfg, mut bytes) = load_config(c)?;
    if !algorithms.is_empty() {
        cfg.experiment.algorithms = algorithms.to_vec();
        let names: Vec<&str> = algorithms.iter().map(|a| a.as_str()).collect();
        bytes.extend_from_slice(format!("\n# --algorithm {}\n", names.join(",")).as_bytes());
    }
    ExperimentPlan::new(cfg, bytes, out_dir(c))
}

fn out_dir(c: &Common) -> PathBuf {
    c.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn fit(input: Option<&Path>, synth: Option<usize>, noise: f64, c: &Common) -> Result<()> {
    let samples = match (input, synth) {
        (Some(path), _) => {
            let f = fs::File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            read_measurements(f)?
        }
        (None, Some(n)) => {
            let mut rng = seeded(c.seed.unwrap_or(1));
            synth_measurements(&AccuracySurface::paper(), n, noise, &mut rng)
        }
        (None, None) => return Err(Error::Config("fit-surface needs --input or --synth".into())),
    };
    let fit = fit_surface(&samples)?;
    let k = fit.surface.coefficients;
    let mut text = String::new();
    for (name, v) in ["c0", "c_m", "c_psi", "c_mm", "c_mpsi", "c_psipsi"].iter().zip(k) {
        text.push_str(&format!("{name} = {}\n", fmt_num(v)));
    }
    text.push_str(&format!("r2 = {}\n", fmt_num(fit.r2)));
    text.push_str(&format!("rmse = {}\n", fmt_num(fit.rmse)));
    text.push_str(&format!("samples = {}\n", samples.len()));
    print!("{text}");
    if let Some(path) = &c.out {
        write(path, text.as_bytes())?;
    }
    Ok(())
}

fn eval(algorithm: Option<Algorithm>, checkpoint: Option<&Path>, windows: Option<usize>, c: &Common) -> Result<()> {
    let (cfg, _) = load_config(c)?;
    cfg.experiment.validate()?;
    let scenario = Arc::new(build_scenario(&cfg)?);
    let windows = windows.unwrap_or(cfg.experiment.eval_windows);
    let dir = out_dir(c);
    let ckpt = match checkpoint {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Some(Checkpoint::from_json(&text)?)
        }
        None => None,
    };
    for &seed in &cfg.experiment.seeds {
        let mut env = Env::new(scenario.clone());
        let ev = match (&ckpt, algorithm) {
            (Some(ck), _) => Evaluator::Policy(load_policy(ck, &env, &cfg.agent, seed)?),
            (None, Some(a)) if !a.learns() => {
                build_evaluator(a, &mut env, &cfg.agent, seed, cfg.experiment.oracle_grid)?.0
            }
            (None, Some(a)) => {
                return Err(Error::Config(format!("{a} needs a --checkpoint (or use `train`)")));
            }
            (None, None) => unreachable!("clap requires one of the two"),
        };
        let infos = evaluate(&ev, scenario.clone(), seed, windows)?;
        let buf = write_eval_csv(&infos, scenario.group_count(), Vec::new())?;
        let path = dir.join(format!("{}_seed{seed}_eval.csv", ev.name()));
        write(&path, &buf)?;
        let mean = infos.iter().map(|i| i.latency_s).sum::<f64>() / infos.len().max(1) as f64;
        println!("{} seed {seed}: mean latency {} s", ev.name(), fmt_num(mean));
    }
    Ok(())
}

fn oracle(algorithms: &[Algorithm], windows: Option<usize>, grid: Option<usize>, c: &Common) -> Result<()> {
    let plan = load_plan(c, algorithms)?;
    let exp = &plan.config.experiment;
    let hp = plan.hp();
    let scenario = Arc::new(build_scenario(&plan.config)?);
    let windows = windows.unwrap_or(exp.eval_windows);
    let grid = grid.unwrap_or(exp.oracle_grid);
    let mut csv = String::from("algorithm,seed,window,ratio\n");
    let mut summary = String::from("algorithm,seed,min,median,mean,max\n");
    for &algorithm in &exp.algorithms {
        for &seed in &exp.seeds {
            let mut env = Env::new(scenario.clone()).with_episode_len(hp.steps_per_episode);
            let (ev, _) = build_evaluator(algorithm, &mut env, hp, seed, grid)?;
            let report = compare_oracle(&ev, scenario.clone(), seed, windows, grid)?;
            for (w, r) in report.ratios.iter().enumerate() {
                csv.push_str(&format!("{algorithm},{seed},{},{}\n", w + 1, fmt_num(*r)));
            }
            summary.push_str(&format!(
                "{algorithm},{seed},{},{},{},{}\n",
                fmt_num(report.min),
                fmt_num(report.median),
                fmt_num(report.mean),
                fmt_num(report.max)
            ));
            info!("{algorithm} seed {seed}: median ratio {:.4}", report.median);
        }
    }
    let dir = &plan.out_dir;
    write(&dir.join("oracle.csv"), csv.as_bytes())?;
    write(&dir.join("oracle_summary.csv"), summary.as_bytes())?;
    print!("{summary}");
    Ok(())
}

fn simulate(windows: usize, model: usize, c: &Common) -> Result<()> {
    let (cfg, _) = load_config(c)?;
    let scenario = Arc::new(build_scenario(&cfg)?);
    let groups = scenario.group_count();
    if model >= scenario.model_count() {
        return Err(Error::Config(format!(
            "--model {model} but the catalog has {} models",
            scenario.model_count()
        )));
    }
    let action = Action::equal_split(scenario.model_count(), model, groups, scenario.net.bandwidth_mhz);
    let seed = cfg.experiment.seeds.first().copied().unwrap_or(cfg.seed);
    let mut env = Env::new(scenario.clone()).with_episode_len(windows);
    env.reset(seed);
    let mut steps = StepLogWriter::new(Vec::new(), groups)?;
    let mut trace = Vec::with_capacity(windows);
    for _ in 0..windows {
        let ctx = env.next_context();
        trace.push(env.last_status().expect("emulated").to_vec());
        let step = env.apply(&ctx, &action)?;
        steps.write(&step.info)?;
    }
    let dir = out_dir(c);
    write(&dir.join("simulate_steps.csv"), &steps.finish()?)?;
    let mut buf = Vec::new();
    write_trace_csv(&trace, scenario.net.window_s, 1, &mut buf)?;
    write(&dir.join("simulate_trace.csv"), &buf)?;
    println!("{windows} windows written to {}", dir.display());
    Ok(())
}
