use std::fs;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::fmt_num;
use super::run::{build_evaluator, emit, evaluate, finish_manifest, Evaluator, ExperimentPlan, Manifest};
use crate::agents::write_train_log;
use crate::domain::{build_scenario, Scenario};
use crate::env::Env;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Bandwidth,
    Compute,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Bandwidth => "bandwidth_mhz",
            Axis::Compute => "compute_gcps",
        }
    }

    pub fn apply(self, base: &Scenario, value: f64) -> Scenario {
        match self {
            Axis::Bandwidth => base.with_capacity(Some(value), None),
            Axis::Compute => base.with_capacity(None, Some(value)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: Axis,
    pub axis_value: f64,
    pub algorithm: String,
    pub mean_latency_s: f64,
    pub ci95: f64,
    /// Per-seed mean latency, in seed order.
    pub per_seed: Vec<f64>,
}

/// Half-width of the normal-approximation 95% interval of the mean.
pub fn ci95(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    1.96 * (var / n as f64).sqrt()
}

/// Evaluate each algorithm's per-seed evaluators at every grid value.
pub fn sweep_axis(
    base: &Scenario,
    axis: Axis,
    grid: &[f64],
    entries: &[(String, Vec<(u64, &Evaluator)>)],
    windows: usize,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &value in grid {
        let scenario = Arc::new(axis.apply(base, value));
        for (name, evs) in entries {
            let per_seed = evs
                .iter()
                .map(|(seed, ev)| {
                    let infos = evaluate(ev, scenario.clone(), *seed, windows)?;
                    Ok(infos.iter().map(|i| i.latency_s).sum::<f64>() / infos.len() as f64)
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(SweepRow {
                axis,
                axis_value: value,
                algorithm: name.clone(),
                mean_latency_s: per_seed.iter().sum::<f64>() / per_seed.len() as f64,
                ci95: ci95(&per_seed),
                per_seed,
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<W> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["axis", "axis_value", "algorithm", "mean_latency_s", "ci95"])?;
    for r in rows {
        w.write_record([
            r.axis.as_str().to_string(),
            fmt_num(r.axis_value),
            r.algorithm.clone(),
            fmt_num(r.mean_latency_s),
            fmt_num(r.ci95),
        ])?;
    }
    w.flush().map_err(|e| Error::io("sweep csv", e))?;
    w.into_inner().map_err(|e| Error::io("sweep csv", e.into_error()))
}

/// Train every learning algorithm once per seed at the base capacity, then
/// evaluate all algorithms along both capacity axes.
pub fn sweep(plan: &ExperimentPlan) -> Result<Vec<SweepRow>> {
    plan.validate()?;
    let exp = &plan.config.experiment;
    if exp.bandwidth_grid.is_empty() && exp.compute_grid.is_empty() {
        return Err(Error::Plan("sweep needs at least one non-empty axis".into()));
    }
    let dir = &plan.out_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let base = build_scenario(&plan.config)?;
    let shared = Arc::new(base.clone());
    let hp = plan.hp();
    let mut manifest = Manifest::new(plan);
    let mut trained: Vec<(String, Vec<(u64, Evaluator)>)> = Vec::new();
    for &algorithm in &exp.algorithms {
        let mut evs = Vec::new();
        for &seed in &exp.seeds {
            let mut env = Env::new(shared.clone()).with_episode_len(hp.steps_per_episode);
            let (ev, log) = build_evaluator(algorithm, &mut env, hp, seed, exp.oracle_grid)?;
            if algorithm.learns() {
                let mut buf = Vec::new();
                write_train_log(&log, &mut buf)?;
                emit(dir, &format!("{algorithm}_seed{seed}_train.csv"), &buf, &mut manifest)?;
            }
            evs.push((seed, ev));
        }
        trained.push((algorithm.to_string(), evs));
    }
    let entries: Vec<(String, Vec<(u64, &Evaluator)>)> = trained
        .iter()
        .map(|(n, evs)| (n.clone(), evs.iter().map(|(s, e)| (*s, e)).collect()))
        .collect();
    let mut rows = sweep_axis(&base, Axis::Bandwidth, &exp.bandwidth_grid, &entries, exp.eval_windows)?;
    rows.extend(sweep_axis(&base, Axis::Compute, &exp.compute_grid, &entries, exp.eval_windows)?);
    let buf = write_sweep_csv(&rows, Vec::new())?;
    emit(dir, "sweep.csv", &buf, &mut manifest)?;
    finish_manifest(dir, &manifest)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::EqualSplit;
    use crate::domain::ScenarioConfig;
    use crate::latency::service_latency;

    #[test]
    fn interval_half_width() {
        assert_eq!(ci95(&[3.0]), 0.0);
        // sd = 1, n = 4 ⇒ 1.96 / 2.
        let xs = [1.0, 2.0, 3.0, 2.0];
        let sd = (2.0f64 / 3.0).sqrt();
        assert!((ci95(&xs) - 1.96 * sd / 2.0).abs() < 1e-12);
    }

    #[test]
    fn equal_split_non_increasing_along_both_axes() {
        let base = build_scenario(&ScenarioConfig::desk(3, 5)).unwrap();
        let ev = Evaluator::Policy(Box::new(EqualSplit::default()));
        let entries = vec![("equal-split".to_string(), vec![(1, &ev), (2, &ev)])];
        for (axis, grid) in [
            (Axis::Bandwidth, vec![6.0, 8.0, 10.0, 12.0, 14.0]),
            (Axis::Compute, vec![6.0, 8.0, 10.0]),
        ] {
            let rows = sweep_axis(&base, axis, &grid, &entries, 5).unwrap();
            assert_eq!(rows.len(), grid.len());
            for w in rows.windows(2) {
                assert!(w[1].mean_latency_s <= w[0].mean_latency_s, "{axis:?}: {w:?}");
            }
        }
    }

    #[test]
    fn sweep_matches_direct_latency() {
        // Oracle: recompute each window's latency straight from the model.
        let base = build_scenario(&ScenarioConfig::desk(2, 3)).unwrap();
        let ev = Evaluator::Policy(Box::new(EqualSplit::default()));
        let rows = sweep_axis(&base, Axis::Bandwidth, &[8.0], &[("eq".into(), vec![(4, &ev)])], 3).unwrap();
        assert_eq!(rows.len(), 1);
        let s = Arc::new(Axis::Bandwidth.apply(&base, 8.0));
        let mut env = Env::new(s.clone()).with_episode_len(3);
        env.reset(super::super::eval_seed(4));
        let mut total = 0.0;
        for _ in 0..3 {
            let ctx = env.next_context();
            let a = crate::env::Action::equal_split(3, 0, 2, 8.0);
            total += service_latency(&a, &ctx).unwrap().total_s;
            env.apply(&ctx, &a).unwrap();
        }
        assert!((rows[0].mean_latency_s - total / 3.0).abs() < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let rows = vec![SweepRow {
            axis: Axis::Compute,
            axis_value: 6.0,
            algorithm: "ddqn".into(),
            mean_latency_s: 5.25,
            ci95: 0.125,
            per_seed: vec![5.25],
        }];
        let text = String::from_utf8(write_sweep_csv(&rows, Vec::new()).unwrap()).unwrap();
        assert_eq!(text, "axis,axis_value,algorithm,mean_latency_s,ci95\ncompute_gcps,6,ddqn,5.25,0.125\n");
    }
}
