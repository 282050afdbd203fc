//! Resolved job descriptions. A job is built from defaults, then an optional
//! JSON or TOML config file, then command-line flags; the result is what the
//! manifest stores and what `verify` re-runs.

use std::path::{Path, PathBuf};

use mixwass_core::estimators::MleOptions;
use mixwass_core::simulate::{CiMethod, Scenario, SimConfig};
use mixwass_core::Metric;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

/// Which two documents of the count input(s) to compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocPair(pub usize, pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateJob {
    pub counts: PathBuf,
    pub topics: PathBuf,
    #[serde(default)]
    pub mle: MleOptions,
}

/// Inputs shared by `distance` and `ci`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairInput {
    /// One file holding both documents, or two files.
    pub counts: Vec<PathBuf>,
    pub topics: PathBuf,
    /// Document index within the first and the second source. With a single
    /// file both index that file; the default is (0, 1) there and (0, 0) for two files.
    #[serde(default)]
    pub docs: Option<DocPair>,
    #[serde(default)]
    pub metric: Metric,
    /// K x K cost table; overrides `metric`.
    #[serde(default)]
    pub cost: Option<PathBuf>,
    #[serde(default)]
    pub mle: MleOptions,
}

pub type DistanceJob = PairInput;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CiJob {
    pub counts: Vec<PathBuf>,
    pub topics: PathBuf,
    #[serde(default)]
    pub docs: Option<DocPair>,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default)]
    pub cost: Option<PathBuf>,
    #[serde(default)]
    pub mle: MleOptions,
    pub level: f64,
    pub method: CiMethod,
    pub m: usize,
    pub b: usize,
    pub gamma: f64,
    /// `None` samples over the whole dual polytope.
    pub delta: Option<f64>,
    pub seed: u64,
}

impl CiJob {
    pub fn input(&self) -> PairInput {
        PairInput {
            counts: self.counts.clone(),
            topics: self.topics.clone(),
            docs: self.docs,
            metric: self.metric.clone(),
            cost: self.cost.clone(),
            mle: self.mle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Table {
    NullCi,
    AltCi,
    MleVsWls,
    KsConvergence,
    Normality,
}

impl Table {
    pub fn name(self) -> &'static str {
        match self {
            Table::NullCi => "null-ci",
            Table::AltCi => "alt-ci",
            Table::MleVsWls => "mle-vs-wls",
            Table::KsConvergence => "ks-convergence",
            Table::Normality => "normality",
        }
    }

    /// Full-size settings for each table.
    pub fn preset(self) -> SimConfig {
        let all = vec![CiMethod::Plugin, CiMethod::DerivBs, CiMethod::MOfNBs];
        let base = SimConfig::default();
        match self {
            Table::NullCi => SimConfig { delta: None, methods: all, ..base },
            Table::AltCi => SimConfig {
                scenario: Scenario::Alternative,
                n_outer: 10,
                b: 500,
                methods: all,
                ..base
            },
            Table::MleVsWls => SimConfig { n: 500, n_outer: 1000, n_reps: 10, m: 2000, delta: None, ..base },
            Table::KsConvergence => SimConfig { k: 10, p: 300, n: 1000, n_outer: 10, draws: 2000, ..base },
            Table::Normality => SimConfig { p: 1000, tau: 3, n: 500, n_reps: 500, ..base },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableJob {
    pub table: Table,
    pub sim: SimConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelftestJob {
    pub seed: u64,
    pub quick: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Job {
    Estimate(EstimateJob),
    Distance(DistanceJob),
    Ci(CiJob),
    SimulateTable(TableJob),
    Selftest(SelftestJob),
}

impl Job {
    pub fn command(&self) -> &'static str {
        match self {
            Job::Estimate(_) => "estimate",
            Job::Distance(_) => "distance",
            Job::Ci(_) => "ci",
            Job::SimulateTable(_) => "simulate-table",
            Job::Selftest(_) => "selftest",
        }
    }

    /// Seed of the run; deterministic commands report 0.
    pub fn seed(&self) -> u64 {
        match self {
            Job::Ci(j) => j.seed,
            Job::SimulateTable(j) => j.sim.seed,
            Job::Selftest(j) => j.seed,
            Job::Estimate(_) | Job::Distance(_) => 0,
        }
    }

    pub fn input_files(&self) -> Vec<PathBuf> {
        let pair = |p: &PairInput| {
            let mut v = p.counts.clone();
            v.push(p.topics.clone());
            v.extend(p.cost.clone());
            v
        };
        match self {
            Job::Estimate(j) => vec![j.counts.clone(), j.topics.clone()],
            Job::Distance(j) => pair(j),
            Job::Ci(j) => pair(&j.input()),
            Job::SimulateTable(_) | Job::Selftest(_) => vec![],
        }
    }
}

/// Reads a config file as JSON (`.json`) or TOML (anything else).
pub fn read_config_file(path: &Path) -> CliResult<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: Value = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| CliError::parse(path, e.line() as u64, e.to_string()))?
    } else {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let line = e.span().map_or(0, |s| text[..s.start].lines().count().max(1) as u64);
            CliError::parse(path, line, e.message().to_string())
        })?;
        serde_json::to_value(table).map_err(|e| CliError::Config(e.to_string()))?
    };
    match value {
        Value::Object(map) => Ok(map),
        _ => Err(CliError::Config(format!("{}: expected a table of settings", path.display()))),
    }
}

/// `defaults`, overlaid by `file`, overlaid by `flags`, deserialized into `T`.
/// Unknown keys are rejected by `T`.
pub fn layered<T: DeserializeOwned>(defaults: Value, file: Option<&Map<String, Value>>, flags: Map<String, Value>) -> CliResult<T> {
    let mut merged = match defaults {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    for layer in file.into_iter().chain(std::iter::once(&flags)) {
        for (k, v) in layer {
            merged.insert(k.replace('-', "_"), v.clone());
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Config(e.to_string()))
}

/// Makes input paths absolute so a manifest can be verified from anywhere.
pub fn absolute(path: &Path) -> CliResult<PathBuf> {
    std::path::absolute(path).map_err(|e| CliError::io(path, e))
}
