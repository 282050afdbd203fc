//! Command-line grammar and the translation of flags into jobs.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mixwass_core::simulate::CiMethod;
use serde_json::{json, Map, Value};

use crate::config::{self, CiJob, EstimateJob, Job, PairInput, Table, TableJob};
use crate::error::{CliError, CliResult};

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (build ", env!("MIXWASS_BUILD"), ")");

#[derive(Debug, Parser)]
#[command(name = "mixwass", version = VERSION, about = "Wasserstein distances between topic-model mixtures, with confidence intervals")]
pub struct Cli {
    /// Worker threads; falls back to MIXWASS_THREADS, then to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON (.json) or TOML settings; flags override them.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for report.json, manifest.json and sample dumps.
    #[arg(long, global = true, default_value = "mixwass-out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-document weight estimates and their covariances.
    Estimate(EstimateArgs),
    /// Distance estimate between two documents.
    Distance(PairArgs),
    /// Confidence interval for the distance between two documents.
    Ci(CiArgs),
    /// Reproduce one of the simulation tables.
    SimulateTable(TableArgs),
    /// Run the randomized property suites.
    Selftest(SelftestArgs),
    /// Re-run a manifest into --out and check that its outputs are reproduced exactly.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub counts: Option<PathBuf>,
    #[arg(long)]
    pub topics: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    Tv,
    Euclidean,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    /// One count file, or two separated by a comma.
    #[arg(long, value_delimiter = ',')]
    pub counts: Option<Vec<PathBuf>>,
    /// p x K topic matrix CSV.
    #[arg(long)]
    pub topics: Option<PathBuf>,
    /// Document indices, e.g. `--docs 0,3`.
    #[arg(long, value_delimiter = ',')]
    pub docs: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
    /// K x K table of component distances (overrides --metric).
    #[arg(long)]
    pub cost: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Plugin,
    DerivBs,
    MOfNBs,
}

impl From<MethodArg> for CiMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Plugin => CiMethod::Plugin,
            MethodArg::DerivBs => CiMethod::DerivBs,
            MethodArg::MOfNBs => CiMethod::MOfNBs,
        }
    }
}

#[derive(Debug, Args)]
pub struct CiArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// Miscoverage level (0.05 gives 95% intervals).
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Limit-law Monte Carlo draws.
    #[arg(long = "M")]
    pub m: Option<usize>,
    /// Bootstrap replicates.
    #[arg(long = "B")]
    pub b: Option<usize>,
    /// m-out-of-N exponent, m = N^gamma.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Facet slack, or `none` for the full dual polytope.
    #[arg(long)]
    pub delta: Option<String>,
    /// Generated from the clock when absent; always recorded.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TableArg {
    NullCi,
    AltCi,
    MleVsWls,
    KsConvergence,
    Normality,
}

impl From<TableArg> for Table {
    fn from(t: TableArg) -> Self {
        match t {
            TableArg::NullCi => Table::NullCi,
            TableArg::AltCi => Table::AltCi,
            TableArg::MleVsWls => Table::MleVsWls,
            TableArg::KsConvergence => Table::KsConvergence,
            TableArg::Normality => Table::Normality,
        }
    }
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(value_enum)]
    pub table: TableArg,
    /// Desk-scale run with capped replicate and draw counts.
    #[arg(long)]
    pub quick: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of topics.
    #[arg(long)]
    pub k: Option<usize>,
    /// Vocabulary size.
    #[arg(long)]
    pub p: Option<usize>,
    /// Document length.
    #[arg(long)]
    pub n: Option<u64>,
    /// Length of the second document; defaults to --n.
    #[arg(long)]
    pub n_j: Option<u64>,
    /// Support size of the weights; 0 draws dense weights.
    #[arg(long)]
    pub tau: Option<usize>,
    /// Replicates per weight draw.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Weight draws.
    #[arg(long)]
    pub outer: Option<usize>,
    /// Limit-law Monte Carlo draws.
    #[arg(long = "M")]
    pub m: Option<usize>,
    /// Bootstrap replicates.
    #[arg(long = "B")]
    pub b: Option<usize>,
    /// m-out-of-N exponent, m = N^gamma.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Facet slack, or `none` for the full dual polytope.
    #[arg(long)]
    pub delta: Option<String>,
    /// Miscoverage level.
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
    /// Interval methods to compare.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub methods: Option<Vec<MethodArg>>,
    /// Draws per side of the KS comparison.
    #[arg(long)]
    pub draws: Option<usize>,
    /// Relative noise applied to the topic matrix the estimators see.
    #[arg(long)]
    pub a_noise: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long)]
    pub quick: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// manifest.json written by an earlier run.
    pub manifest: PathBuf,
}

fn metric_value(m: MetricArg) -> Value {
    match m {
        MetricArg::Tv => json!("total_variation"),
        MetricArg::Euclidean => json!("euclidean"),
    }
}

fn delta_value(s: &str) -> CliResult<Value> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(Value::Null);
    }
    let d: f64 = s
        .parse()
        .map_err(|_| CliError::Config(format!("--delta expects a number or `none`, got {s:?}")))?;
    Ok(json!(d))
}

#[derive(Default)]
struct Flags(Map<String, Value>);

impl Flags {
    fn set<T: serde::Serialize>(&mut self, key: &str, v: Option<T>) {
        if let Some(v) = v {
            self.0.insert(key.to_string(), json!(v));
        }
    }

    fn set_value(&mut self, key: &str, v: Option<Value>) {
        if let Some(v) = v {
            self.0.insert(key.to_string(), v);
        }
    }
}

fn pair_flags(args: &PairArgs, flags: &mut Flags) {
    flags.set("counts", args.counts.clone());
    flags.set("topics", args.topics.clone());
    flags.set("docs", args.docs.clone());
    flags.set_value("metric", args.metric.map(metric_value));
    flags.set("cost", args.cost.clone());
}

/// Accepts `counts = "a.csv"` or `"a.csv,b.csv"` in config files as well as arrays.
fn split_counts(map: &mut Map<String, Value>) {
    if let Some(Value::String(s)) = map.get("counts") {
        let parts: Vec<Value> = s.split(',').map(|p| json!(p.trim())).collect();
        map.insert("counts".into(), Value::Array(parts));
    }
}

fn absolute_pair(input: &mut PairInput) -> CliResult<()> {
    for c in input.counts.iter_mut() {
        *c = config::absolute(c)?;
    }
    input.topics = config::absolute(&input.topics)?;
    if let Some(c) = input.cost.as_mut() {
        *c = config::absolute(c)?;
    }
    Ok(())
}

fn clock_seed() -> u64 {
    let now = chrono::Utc::now();
    (now.timestamp() as u64).wrapping_mul(1_000_000_007) ^ u64::from(now.timestamp_subsec_nanos())
}

fn required(map: &Map<String, Value>, keys: &[&str], command: &str) -> CliResult<()> {
    for k in keys {
        if map.get(*k).is_none_or(Value::is_null) {
            return Err(CliError::Config(format!("{command} needs --{k} (or `{k}` in the config file)")));
        }
    }
    Ok(())
}

/// Resolves a command line into a job. `None` for `verify`.
pub fn build_job(cli: &Cli) -> CliResult<Option<Job>> {
    let mut file = cli.config.as_deref().map(config::read_config_file).transpose()?;
    if let Some(f) = file.as_mut() {
        split_counts(f);
    }
    let file = file.as_ref();
    let mut flags = Flags::default();
    let check = |flags: &Flags, keys: &[&str], command: &str| {
        let mut all = file.cloned().unwrap_or_default();
        all.extend(flags.0.clone());
        required(&all, keys, command)
    };
    let job = match &cli.command {
        Command::Estimate(a) => {
            flags.set("counts", a.counts.clone());
            flags.set("topics", a.topics.clone());
            check(&flags, &["counts", "topics"], "estimate")?;
            let mut job: EstimateJob = config::layered(json!({}), file, flags.0)?;
            job.counts = config::absolute(&job.counts)?;
            job.topics = config::absolute(&job.topics)?;
            Job::Estimate(job)
        }
        Command::Distance(a) => {
            pair_flags(a, &mut flags);
            check(&flags, &["counts", "topics"], "distance")?;
            let mut job: PairInput = config::layered(json!({}), file, flags.0)?;
            absolute_pair(&mut job)?;
            Job::Distance(job)
        }
        Command::Ci(a) => {
            pair_flags(&a.pair, &mut flags);
            flags.set("level", a.level);
            flags.set("method", a.method.map(CiMethod::from));
            flags.set("m", a.m);
            flags.set("b", a.b);
            flags.set("gamma", a.gamma);
            flags.set_value("delta", a.delta.as_deref().map(delta_value).transpose()?);
            flags.set("seed", a.seed);
            check(&flags, &["counts", "topics"], "ci")?;
            let defaults = json!({
                "level": 0.05, "method": CiMethod::Plugin, "m": 1000, "b": 1000,
                "gamma": 0.5, "delta": 0.0, "seed": clock_seed(),
            });
            let mut job: CiJob = config::layered(defaults, file, flags.0)?;
            let mut input = job.input();
            absolute_pair(&mut input)?;
            job.counts = input.counts;
            job.topics = input.topics;
            job.cost = input.cost;
            Job::Ci(job)
        }
        Command::SimulateTable(a) => {
            let table = Table::from(a.table);
            flags.set("seed", a.seed);
            flags.set("k", a.k);
            flags.set("p", a.p);
            flags.set("n", a.n);
            flags.set("n_j", a.n_j);
            flags.set("tau", a.tau);
            flags.set("n_reps", a.reps);
            flags.set("n_outer", a.outer);
            flags.set("m", a.m);
            flags.set("b", a.b);
            flags.set("gamma", a.gamma);
            flags.set_value("delta", a.delta.as_deref().map(delta_value).transpose()?);
            flags.set("level", a.level);
            flags.set_value("metric", a.metric.map(metric_value));
            flags.set("methods", a.methods.as_ref().map(|v| v.iter().map(|&m| CiMethod::from(m)).collect::<Vec<_>>()));
            flags.set("draws", a.draws);
            flags.set("a_noise", a.a_noise);
            let defaults = serde_json::to_value(table.preset()).map_err(|e| CliError::Config(e.to_string()))?;
            let mut sim: mixwass_core::simulate::SimConfig = config::layered(defaults, file, flags.0)?;
            if a.quick {
                sim = sim.quick();
            }
            sim.validate()?;
            Job::SimulateTable(TableJob { table, sim })
        }
        Command::Selftest(a) => {
            flags.set("seed", a.seed);
            flags.set("quick", a.quick.then_some(true));
            Job::Selftest(config::layered(json!({ "seed": 2024, "quick": false }), file, flags.0)?)
        }
        Command::Verify(_) => return Ok(None),
    };
    Ok(Some(job))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn job(args: &[&str]) -> CliResult<Option<Job>> {
        build_job(&Cli::try_parse_from(args).unwrap())
    }

    #[test]
    fn ci_flags_resolve() {
        let j = job(&["mixwass", "ci", "--counts", "a.csv,b.csv", "--topics", "A.csv", "--M", "400", "--delta", "none", "--seed", "7"])
            .unwrap()
            .unwrap();
        let Job::Ci(c) = j else { panic!("not a ci job") };
        assert_eq!(c.counts.len(), 2);
        assert!(c.counts[0].is_absolute());
        assert_eq!((c.m, c.delta, c.seed, c.level), (400, None, 7, 0.05));
    }

    #[test]
    fn quick_table_is_capped() {
        let Some(Job::SimulateTable(t)) = job(&["mixwass", "simulate-table", "null-ci", "--quick", "--seed", "3"]).unwrap() else {
            panic!()
        };
        assert_eq!((t.sim.n_reps, t.sim.m, t.sim.seed, t.sim.delta), (100, 500, 3, None));
    }

    #[test]
    fn missing_inputs_are_config_errors() {
        assert!(matches!(job(&["mixwass", "distance", "--topics", "A.csv"]), Err(CliError::Config(_))));
    }
}
