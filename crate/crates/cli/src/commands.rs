//! Executes resolved jobs. Execution is a pure function of the job and its
//! input files, which is what makes manifests verifiable.

use mixwass_core::estimators::{self, CountVector};
use mixwass_core::inference::{self, DocumentFit, LimitSampleSet, ResamplingSettings};
use mixwass_core::selftest::{self, SelftestOptions};
use mixwass_core::simulate::{self, ExperimentReport};
use mixwass_core::{transport, CostMatrix, Error, TopicMatrix};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::config::{CiJob, DocPair, EstimateJob, Job, PairInput, SelftestJob, Table, TableJob};
use crate::error::{CliError, CliResult};
use crate::io;

/// File name of sample dumps, relative to the report.
pub const SAMPLES_FILE: &str = "samples.csv";
pub const SERIES_FILE: &str = "series.csv";

#[derive(Debug, Clone)]
pub enum Dump {
    Samples(LimitSampleSet),
    Series(Vec<(String, Vec<f64>)>),
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Value,
    /// Short human-readable result for the terminal.
    pub summary: String,
    pub dumps: Vec<(&'static str, Dump)>,
    /// Set when the run completed but its own checks failed.
    pub failure: Option<String>,
}

pub fn execute(job: &Job) -> CliResult<Outcome> {
    match job {
        Job::Estimate(j) => estimate(j),
        Job::Distance(j) => distance(j),
        Job::Ci(j) => ci(j),
        Job::SimulateTable(j) => simulate_table(j),
        Job::Selftest(j) => run_selftest(j),
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn estimate(job: &EstimateJob) -> CliResult<Outcome> {
    let a = io::load_topics(&job.topics)?;
    let corpus = io::load_corpus(&job.counts, Some(a.p()))?;
    let mut docs = vec![];
    for (id, counts) in corpus.doc_ids.iter().zip(&corpus.docs) {
        let fit = inference::fit_document(counts, &a, &job.mle)?;
        let wls = estimators::wls_weights(&counts.frequencies(), &a)?;
        docs.push(json!({
            "doc_id": id,
            "n": fit.n,
            "mle": fit.mle.alpha,
            "mle_iterations": fit.mle.iterations,
            "mle_converged": fit.mle.converged,
            "debiased": fit.debiased.alpha,
            "wls": wls.alpha,
            "sigma": rows(&fit.sigma.sigma),
            "sigma_rank": fit.sigma.rank,
        }));
    }
    let summary = format!("{} documents, K = {}, p = {}", docs.len(), a.k(), a.p());
    Ok(Outcome {
        report: json!({ "k": a.k(), "p": a.p(), "documents": docs }),
        summary,
        dumps: vec![],
        failure: None,
    })
}

struct Pair {
    a: TopicMatrix,
    cost: CostMatrix,
    docs: [(u64, CountVector); 2],
}

fn load_pair(input: &PairInput) -> CliResult<Pair> {
    let a = io::load_topics(&input.topics)?;
    let cost = match &input.cost {
        Some(path) => io::load_cost(path)?,
        None => transport::cost_matrix(&a, &input.metric)?,
    };
    if cost.k() != a.k() {
        return Err(Error::DimError { expected: a.k(), got: cost.k() }.into());
    }
    let corpora = input
        .counts
        .iter()
        .map(|p| io::load_corpus(p, Some(a.p())))
        .collect::<CliResult<Vec<_>>>()?;
    let (sources, DocPair(i, j)) = match corpora.len() {
        1 => ([0, 0], input.docs.unwrap_or(DocPair(0, 1))),
        2 => ([0, 1], input.docs.unwrap_or(DocPair(0, 0))),
        n => return Err(CliError::Config(format!("expected one or two count files, got {n}"))),
    };
    let pick = |src: usize, idx: usize| -> CliResult<(u64, CountVector)> {
        let c = &corpora[src];
        match (c.doc_ids.get(idx), c.docs.get(idx)) {
            (Some(id), Some(d)) => Ok((*id, d.clone())),
            _ => Err(CliError::Config(format!(
                "{} holds {} documents; index {idx} requested",
                input.counts[src].display(),
                c.docs.len()
            ))),
        }
    };
    Ok(Pair {
        docs: [pick(sources[0], i)?, pick(sources[1], j)?],
        a,
        cost,
    })
}

fn fit_pair(pair: &Pair, input: &PairInput) -> CliResult<[DocumentFit; 2]> {
    Ok([
        inference::fit_document(&pair.docs[0].1, &pair.a, &input.mle)?,
        inference::fit_document(&pair.docs[1].1, &pair.a, &input.mle)?,
    ])
}

fn pair_json(pair: &Pair, fits: &[DocumentFit; 2]) -> CliResult<Value> {
    let mle_i = mixwass_core::ProbVec::new(fits[0].mle.alpha.clone())?;
    let mle_j = mixwass_core::ProbVec::new(fits[1].mle.alpha.clone())?;
    let plan = transport::wasserstein_primal(&mle_i, &mle_j, &pair.cost)?;
    Ok(json!({
        "doc_ids": [pair.docs[0].0, pair.docs[1].0],
        "n": [fits[0].n, fits[1].n],
        "mle": [fits[0].mle.alpha, fits[1].mle.alpha],
        "debiased": [fits[0].debiased.alpha, fits[1].debiased.alpha],
        "w_mle": plan.value,
        "plan_mle": rows(&plan.plan),
        "cost": rows(pair.cost.matrix()),
    }))
}

fn distance(job: &PairInput) -> CliResult<Outcome> {
    let pair = load_pair(job)?;
    let fits = fit_pair(&pair, job)?;
    let point = inference::distance_estimate(&fits[0].debiased.alpha, &fits[1].debiased.alpha, &pair.cost)?;
    let mut report = pair_json(&pair, &fits)?;
    report["point"] = json!(point);
    Ok(Outcome {
        summary: format!("W̃ = {point:.6}, W(α̂ⁱ, α̂ʲ) = {:.6}", report["w_mle"].as_f64().unwrap_or(f64::NAN)),
        report,
        dumps: vec![],
        failure: None,
    })
}

fn ci(job: &CiJob) -> CliResult<Outcome> {
    let input = job.input();
    let pair = load_pair(&input)?;
    let fits = fit_pair(&pair, &input)?;
    let point = inference::distance_estimate(&fits[0].debiased.alpha, &fits[1].debiased.alpha, &pair.cost)?;
    let settings = ResamplingSettings {
        m: job.m,
        b: job.b,
        gamma: job.gamma,
        delta: job.delta,
        mle: job.mle,
    };
    let sorted = inference::reference_samples(
        job.method,
        (&pair.docs[0].1, &fits[0]),
        (&pair.docs[1].1, &fits[1]),
        &pair.a,
        &pair.cost,
        &settings,
        job.seed,
    )?;
    let interval = inference::confidence_interval(point, &sorted, job.level, fits[0].n, fits[1].n)?;
    let mut report = pair_json(&pair, &fits)?;
    report["point"] = json!(point);
    report["interval"] = json!(interval);
    report["method"] = json!(job.method.label());
    report["seed"] = json!(job.seed);
    report["samples"] = json!(sorted.len());
    report["samples_path"] = json!(SAMPLES_FILE);
    Ok(Outcome {
        summary: format!(
            "W̃ = {point:.6}, {:.0}% interval [{:.6}, {:.6}] ({})",
            100.0 * (1.0 - job.level),
            interval.lower,
            interval.upper,
            job.method.label()
        ),
        report,
        dumps: vec![(SAMPLES_FILE, Dump::Samples(LimitSampleSet::new(sorted, job.delta, job.seed)))],
        failure: None,
    })
}

fn table_summary(rep: &ExperimentReport) -> String {
    let mut lines = vec![format!("{} ({} records, {} failed)", rep.experiment, rep.records.len(), rep.failures)];
    for s in &rep.summaries {
        lines.push(format!(
            "  {:<14} coverage {:.3}  mean length {:.4} (se {:.4})",
            s.method, s.coverage, s.mean_length, s.length_stderr
        ));
    }
    for k in &rep.ks {
        lines.push(format!("  {:<18} KS {:.4}  p {:.3}", k.label, k.distance, k.p_value));
    }
    for p in &rep.paired {
        lines.push(format!("  {} {:.5} (se {:.5}, n {})", p.label, p.mean, p.stderr, p.n));
    }
    lines.join("\n")
}

fn simulate_table(job: &TableJob) -> CliResult<Outcome> {
    job.sim.validate()?;
    let rep = match job.table {
        Table::NullCi | Table::AltCi => simulate::run_ci_experiment(&job.sim)?,
        Table::MleVsWls => simulate::run_mle_vs_wls_experiment(&job.sim)?,
        Table::KsConvergence => simulate::run_convergence_experiment(&job.sim)?,
        Table::Normality => simulate::run_normality_experiment(&job.sim)?,
    };
    let failure = (!rep.valid).then(|| format!("{} of {} replicates failed", rep.failures, rep.records.len()));
    let dumps = if rep.series.is_empty() {
        vec![]
    } else {
        let series = rep.series.iter().map(|s| (s.label.clone(), s.values.clone())).collect();
        vec![(SERIES_FILE, Dump::Series(series))]
    };
    Ok(Outcome {
        summary: table_summary(&rep),
        report: serde_json::to_value(&rep).map_err(|e| CliError::Check(e.to_string()))?,
        dumps,
        failure,
    })
}

fn run_selftest(job: &SelftestJob) -> CliResult<Outcome> {
    let out = selftest::run(SelftestOptions { seed: job.seed, quick: job.quick });
    let failed = out.iter().filter(|o| !o.passed).count();
    let summary = out
        .iter()
        .map(|o| format!("{} {}::{}: {}", if o.passed { "PASS" } else { "FAIL" }, o.module, o.name, o.detail))
        .collect::<Vec<_>>()
        .join("\n");
    Ok(Outcome {
        report: json!({ "properties": out, "failed": failed }),
        summary,
        dumps: vec![],
        failure: (failed > 0).then(|| format!("{failed} properties failed")),
    })
}
