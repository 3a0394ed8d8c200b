//! Experiment plumbing: plans, training and evaluation runs, capacity
//! sweeps, oracle comparisons and deterministic CSV/manifest output.

mod run;
mod sweep;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use run::{
    build_evaluator, compare_oracle, eval_seed, evaluate, load_policy, run, write_eval_csv, Artifacts, Evaluator,
    ExperimentPlan,
    Manifest, OracleReport,
};
pub use sweep::{ci95, sweep, sweep_axis, write_sweep_csv, Axis, SweepRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Dftd3,
    Mddpg,
    Ddqn,
    EqualSplit,
    Oracle,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Dftd3,
        Algorithm::Mddpg,
        Algorithm::Ddqn,
        Algorithm::EqualSplit,
        Algorithm::Oracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Dftd3 => "dftd3",
            Algorithm::Mddpg => "mddpg",
            Algorithm::Ddqn => "ddqn",
            Algorithm::EqualSplit => "equal-split",
            Algorithm::Oracle => "oracle",
        }
    }

    pub fn learns(self) -> bool {
        matches!(self, Algorithm::Dftd3 | Algorithm::Mddpg | Algorithm::Ddqn)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

/// `[experiment]` table of the scenario config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    pub bandwidth_grid: Vec<f64>,
    pub compute_grid: Vec<f64>,
    /// Windows per seed in each evaluation.
    pub eval_windows: usize,
    /// Points per axis of the brute-force bandwidth grid.
    pub oracle_grid: usize,
    /// Permit sweep values outside the reference capacity ranges.
    pub allow_out_of_range: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            algorithms: vec![Algorithm::Dftd3, Algorithm::Mddpg, Algorithm::Ddqn, Algorithm::EqualSplit],
            seeds: vec![1, 2, 3, 4, 5],
            bandwidth_grid: vec![6.0, 8.0, 10.0, 12.0, 14.0],
            compute_grid: vec![6.0, 8.0, 10.0],
            eval_windows: 20,
            oracle_grid: 41,
            allow_out_of_range: false,
        }
    }
}

pub const BANDWIDTH_RANGE_MHZ: (f64, f64) = (6.0, 14.0);
pub const COMPUTE_RANGE_GCPS: (f64, f64) = (6.0, 10.0);

impl ExperimentSection {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Plan("seed list is empty".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Plan("algorithm list is empty".into()));
        }
        if self.eval_windows == 0 {
            return Err(Error::Plan("eval_windows must be ≥ 1".into()));
        }
        let check = |name: &str, grid: &[f64], (lo, hi): (f64, f64)| {
            for &v in grid {
                let ok = v > 0.0 && (self.allow_out_of_range || (lo..=hi).contains(&v));
                if !ok {
                    return Err(Error::Plan(format!("{name} value {v} outside [{lo}, {hi}]")));
                }
            }
            Ok(())
        };
        check("bandwidth_grid", &self.bandwidth_grid, BANDWIDTH_RANGE_MHZ)?;
        check("compute_grid", &self.compute_grid, COMPUTE_RANGE_GCPS)?;
        Ok(())
    }
}

/// `%.9g`-style formatting shared by every CSV.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let mant = strip_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (8 - exp) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(-2.5), "-2.5");
        assert_eq!(fmt_num(0.8246), "0.8246");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_num(123456789.0), "123456789");
        assert_eq!(fmt_num(1234567890.0), "1.23456789e+09");
        assert_eq!(fmt_num(3.931e-5), "3.931e-05");
        assert_eq!(fmt_num(0.0001), "0.0001");
        assert_eq!(fmt_num(-2.044e-9), "-2.044e-09");
        assert_eq!(fmt_num(9.9999999999), "10");
        assert_eq!(fmt_num(2.0f64.sqrt()), "1.41421356");
        assert_eq!(fmt_num(f64::NAN), "nan");
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
        assert!("td3".parse::<Algorithm>().is_err());
    }

    #[test]
    fn plan_validation() {
        ExperimentSection::default().validate().unwrap();
        let empty = ExperimentSection { seeds: vec![], ..Default::default() };
        assert!(matches!(empty.validate(), Err(Error::Plan(_))));
        let wide = ExperimentSection { bandwidth_grid: vec![20.0], ..Default::default() };
        assert!(wide.validate().is_err());
        let allowed = ExperimentSection { allow_out_of_range: true, ..wide };
        allowed.validate().unwrap();
    }
}
