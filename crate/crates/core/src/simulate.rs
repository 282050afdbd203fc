//! Synthetic topic-model data and the experiment drivers: confidence-interval
//! coverage, asymptotic normality of the weight estimators, speed of
//! convergence of the distance estimator and the MLE vs WLS comparison.
//!
//! The topic matrix is known to the estimators unless `a_noise > 0`, in which
//! case they see a multiplicatively perturbed copy.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::distr::Distribution;
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{self, CountVector, MleOptions};
use crate::inference::{self, ConfidenceInterval, ResamplingSettings};
pub use crate::inference::CiMethod;
use crate::rng::{self, StreamRng};
use crate::transport::{self, CostMatrix, DualPolytope, Metric, ProbVec, TopicMatrix};

/// Share of failed replicates above which a report is flagged invalid.
pub const MAX_FAILURE_RATE: f64 = 0.01;

// stream tags
const TAG_TOPICS: u64 = 1;
const TAG_NOISE: u64 = 2;
const TAG_WEIGHTS: u64 = 3;
const TAG_DOC: u64 = 4;
const TAG_SAMPLER: u64 = 5;
const TAG_BOOT: u64 = 6;
const TAG_LIMIT: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    MleDebiased,
    Wls,
}

impl EstimatorKind {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::MleDebiased => "mle_debiased",
            EstimatorKind::Wls => "wls",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// `α_i = α_j`.
    Null,
    /// Independent `α_i`, `α_j`.
    Alternative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub k: usize,
    pub p: usize,
    pub n: u64,
    /// Size of the second document; defaults to `n`.
    pub n_j: Option<u64>,
    /// Support size of the weights; 0 draws dense weights.
    pub tau: usize,
    pub scenario: Scenario,
    /// Independent weight draws (or weight pairs).
    pub n_outer: usize,
    /// Replicates per weight draw.
    pub n_reps: usize,
    /// Limit-law Monte Carlo draws.
    pub m: usize,
    /// Bootstrap replicates.
    pub b: usize,
    pub gamma: f64,
    /// Facet slack; `None` maximizes over `F̂` without a facet constraint.
    pub delta: Option<f64>,
    /// Miscoverage level, 0.05 for 95% intervals.
    pub level: f64,
    pub metric: Metric,
    pub seed: u64,
    pub methods: Vec<CiMethod>,
    pub estimators: Vec<EstimatorKind>,
    /// Relative multiplicative noise applied to the topic matrix seen by the estimators.
    pub a_noise: f64,
    /// Draws on each side of the two-sample KS comparison.
    pub draws: usize,
    pub mle: MleOptions,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            k: 5,
            p: 500,
            n: 1000,
            n_j: None,
            tau: 0,
            scenario: Scenario::Null,
            n_outer: 1,
            n_reps: 200,
            m: 1000,
            b: 1000,
            gamma: 0.5,
            delta: Some(0.0),
            level: 0.05,
            metric: Metric::TotalVariation,
            seed: 1,
            methods: vec![CiMethod::Plugin],
            estimators: vec![EstimatorKind::MleDebiased, EstimatorKind::Wls],
            a_noise: 0.0,
            draws: 2000,
            mle: MleOptions::default(),
        }
    }
}

impl SimConfig {
    pub fn n_j(&self) -> u64 {
        self.n_j.unwrap_or(self.n)
    }

    /// Desk-scale variant: at most 100 replicates and 500 Monte Carlo or bootstrap draws.
    pub fn quick(mut self) -> Self {
        self.n_reps = self.n_reps.min(100);
        self.m = self.m.min(500);
        self.b = self.b.min(500);
        self.draws = self.draws.min(1000);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParam(msg));
        if self.k == 0 || self.p < self.k {
            return bad(format!("need p >= K >= 1, got p = {}, K = {}", self.p, self.k));
        }
        if self.tau > self.k {
            return bad(format!("tau = {} exceeds K = {}", self.tau, self.k));
        }
        if self.n == 0 || self.n_j() == 0 {
            return bad("document sizes must be >= 1".into());
        }
        if self.n_reps == 0 || self.n_outer == 0 {
            return bad("n_reps and n_outer must be >= 1".into());
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad(format!("level {} must lie in (0, 1)", self.level));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma {} must lie in (0, 1)", self.gamma));
        }
        if let Some(d) = self.delta {
            if !(d >= 0.0) {
                return bad(format!("delta = {d} must be >= 0"));
            }
        }
        if !(self.a_noise >= 0.0 && self.a_noise.is_finite()) {
            return bad(format!("a_noise = {} must be finite and >= 0", self.a_noise));
        }
        if self.m == 0 || self.b == 0 || self.draws == 0 {
            return bad("m, b and draws must be >= 1".into());
        }
        let needed = (20.0 / self.level).ceil() as usize;
        if self.methods.contains(&CiMethod::Plugin) && self.m < needed {
            return bad(format!("m = {} is below 20/level = {needed}", self.m));
        }
        if self.methods.iter().any(|&c| c != CiMethod::Plugin) && self.b < needed {
            return bad(format!("b = {} is below 20/level = {needed}", self.b));
        }
        Ok(())
    }
}

/// Entries i.i.d. `Unif(0,1)`, columns normalized.
pub fn gen_topic_matrix(p: usize, k: usize, seed: u64) -> Result<TopicMatrix> {
    topic_matrix_from(p, k, &mut rng::stream(seed, &[TAG_TOPICS]))
}

fn topic_matrix_from(p: usize, k: usize, rng: &mut StreamRng) -> Result<TopicMatrix> {
    if k == 0 || p < k {
        return Err(Error::InvalidParam(format!("need p >= K >= 1, got p = {p}, K = {k}")));
    }
    let mut m = DMatrix::zeros(p, k);
    for c in 0..k {
        for r in 0..p {
            // open interval keeps every entry positive
            m[(r, c)] = 1.0 - rng.random::<f64>();
        }
        let s: f64 = m.column(c).sum();
        m.column_mut(c).iter_mut().for_each(|v| *v /= s);
    }
    TopicMatrix::new(m)
}

/// Dense weights uniform on `Δ_K` (`tau = 0`), or a uniformly chosen support of
/// size `tau` with `Unif(0,1)` entries, normalized.
pub fn gen_weights(k: usize, tau: usize, seed: u64) -> Result<ProbVec> {
    weights_from(k, tau, &mut rng::stream(seed, &[TAG_WEIGHTS]))
}

fn weights_from(k: usize, tau: usize, rng: &mut StreamRng) -> Result<ProbVec> {
    if k == 0 || tau > k {
        return Err(Error::InvalidParam(format!("need 0 <= tau <= K, K >= 1; got tau = {tau}, K = {k}")));
    }
    let mut w = vec![0.0; k];
    if tau == 0 {
        for v in w.iter_mut() {
            *v = -(1.0 - rng.random::<f64>()).ln();
        }
    } else {
        for i in index::sample(rng, k, tau) {
            w[i] = 1.0 - rng.random::<f64>();
        }
    }
    ProbVec::from_weights(&w)
}

/// `Multinomial(N, r)` counts.
pub fn gen_document(r: &ProbVec, n: u64, seed: u64) -> Result<CountVector> {
    document_from(r, n, &mut rng::stream(seed, &[TAG_DOC]))
}

fn document_from(r: &ProbVec, n: u64, rng: &mut StreamRng) -> Result<CountVector> {
    CountVector::new(rng::multinomial(rng, n, r.as_slice()))
}

/// `Â_jk ∝ A_jk exp(σ ξ_jk)`, columns renormalized.
fn perturb_topics(a: &TopicMatrix, sigma: f64, rng: &mut StreamRng) -> Result<TopicMatrix> {
    let normal = rand_distr::StandardNormal;
    let mut m = a.matrix().clone();
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let z: f64 = normal.sample(rng);
            m[(r, c)] *= (sigma * z).exp();
        }
        let s: f64 = m.column(c).sum();
        m.column_mut(c).iter_mut().for_each(|v| *v /= s);
    }
    TopicMatrix::new(m)
}

/// Per-method interval of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub method: String,
    pub lower: f64,
    pub upper: f64,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub outer: usize,
    pub inner: usize,
    pub truth: f64,
    pub point: Option<f64>,
    pub intervals: Vec<IntervalRecord>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub coverage: f64,
    pub mean_length: f64,
    pub length_stderr: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsRecord {
    pub label: String,
    pub distance: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Mean and standard error of a paired difference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSummary {
    pub label: String,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: SimConfig,
    pub seed: u64,
    pub rng: String,
    pub summaries: Vec<MethodSummary>,
    pub ks: Vec<KsRecord>,
    pub paired: Vec<PairedSummary>,
    pub series: Vec<Series>,
    pub true_weights: Vec<Vec<f64>>,
    pub records: Vec<ReplicateRecord>,
    pub failures: usize,
    pub valid: bool,
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    fn new(experiment: &str, config: &SimConfig) -> Self {
        ExperimentReport {
            experiment: experiment.to_string(),
            config: config.clone(),
            seed: config.seed,
            rng: rng::RNG_FAMILY.to_string(),
            summaries: vec![],
            ks: vec![],
            paired: vec![],
            series: vec![],
            true_weights: vec![],
            records: vec![],
            failures: 0,
            valid: true,
            wall_clock_seconds: 0.0,
        }
    }

    pub fn summary(&self, method: &str) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    pub fn ks_record(&self, label: &str) -> Option<&KsRecord> {
        self.ks.iter().find(|s| s.label == label)
    }

    /// JSON bytes with the wall-clock time zeroed: identical for identical
    /// configurations and seeds.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut copy = self.clone();
        copy.wall_clock_seconds = 0.0;
        serde_json::to_vec(&copy).expect("report serializes")
    }

    fn finish(&mut self, total: usize, started: Instant) {
        self.failures = self.records.iter().filter(|r| r.error.is_some()).count();
        self.valid = (self.failures as f64) <= MAX_FAILURE_RATE * total as f64;
        self.wall_clock_seconds = started.elapsed().as_secs_f64();
    }
}

fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn summarize(records: &[ReplicateRecord], labels: &[&str]) -> Vec<MethodSummary> {
    labels
        .iter()
        .map(|&label| {
            let mut lengths = vec![];
            let mut hits = 0usize;
            for iv in records.iter().flat_map(|r| r.intervals.iter()).filter(|iv| iv.method == label) {
                lengths.push(iv.upper - iv.lower);
                hits += iv.covered as usize;
            }
            let (mean_length, length_stderr) = mean_and_stderr(&lengths);
            MethodSummary {
                method: label.to_string(),
                coverage: if lengths.is_empty() { f64::NAN } else { hits as f64 / lengths.len() as f64 },
                mean_length,
                length_stderr,
                replicates: lengths.len(),
            }
        })
        .collect()
}

/// Shared setup: true topics, the estimators' view of them and both cost matrices.
struct Setup {
    a: TopicMatrix,
    a_hat: TopicMatrix,
    cost: CostMatrix,
    cost_hat: CostMatrix,
}

fn setup(config: &SimConfig) -> Result<Setup> {
    config.validate()?;
    let a = gen_topic_matrix(config.p, config.k, config.seed)?;
    let a_hat = if config.a_noise > 0.0 {
        perturb_topics(&a, config.a_noise, &mut rng::stream(config.seed, &[TAG_NOISE]))?
    } else {
        a.clone()
    };
    let cost = transport::cost_matrix(&a, &config.metric)?;
    let cost_hat = transport::cost_matrix(&a_hat, &config.metric)?;
    Ok(Setup { a, a_hat, cost, cost_hat })
}

fn outer_weights(config: &SimConfig, outer: usize, side: u64) -> Result<ProbVec> {
    weights_from(config.k, config.tau, &mut rng::stream(config.seed, &[TAG_WEIGHTS, outer as u64, side]))
}

fn replicate_stream(config: &SimConfig, tag: u64, outer: usize, inner: usize) -> StreamRng {
    rng::stream(config.seed, &[tag, outer as u64, inner as u64])
}

fn replicate_seed(config: &SimConfig, tag: u64, outer: usize, inner: usize) -> u64 {
    replicate_stream(config, tag, outer, inner).random()
}

/// Coverage and length of level-`t` intervals for `W(α_i, α_j)` under the
/// configured scenario and methods.
pub fn run_ci_experiment(config: &SimConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    let s = setup(config)?;
    let name = match config.scenario {
        Scenario::Null => "null_ci",
        Scenario::Alternative => "alternative_ci",
    };
    let mut report = ExperimentReport::new(name, config);

    let mut pairs = vec![];
    for outer in 0..config.n_outer {
        let ai = outer_weights(config, outer, 0)?;
        let aj = match config.scenario {
            Scenario::Null => ai.clone(),
            Scenario::Alternative => outer_weights(config, outer, 1)?,
        };
        let truth = transport::wasserstein_primal(&ai, &aj, &s.cost)?.value;
        let ri = ProbVec::from_weights(&s.a.mix(ai.as_slice()))?;
        let rj = ProbVec::from_weights(&s.a.mix(aj.as_slice()))?;
        report.true_weights.push(ai.as_slice().to_vec());
        report.true_weights.push(aj.as_slice().to_vec());
        pairs.push((truth, ri, rj));
    }

    let jobs: Vec<(usize, usize)> = (0..config.n_outer)
        .flat_map(|o| (0..config.n_reps).map(move |r| (o, r)))
        .collect();
    report.records = jobs
        .par_iter()
        .map(|&(outer, inner)| {
            let (truth, ri, rj) = &pairs[outer];
            match ci_replicate(config, &s, ri, rj, *truth, outer, inner) {
                Ok((point, intervals)) => ReplicateRecord {
                    outer,
                    inner,
                    truth: *truth,
                    point: Some(point),
                    intervals,
                    error: None,
                },
                Err(e) => ReplicateRecord {
                    outer,
                    inner,
                    truth: *truth,
                    point: None,
                    intervals: vec![],
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let labels: Vec<&str> = config.methods.iter().map(|m| m.label()).collect();
    report.summaries = summarize(&report.records, &labels);
    report.finish(jobs.len(), started);
    Ok(report)
}

fn interval_record(method: &str, ci: ConfidenceInterval, truth: f64) -> IntervalRecord {
    IntervalRecord {
        method: method.to_string(),
        lower: ci.lower,
        upper: ci.upper,
        covered: ci.contains(truth),
    }
}

fn ci_replicate(
    config: &SimConfig,
    s: &Setup,
    ri: &ProbVec,
    rj: &ProbVec,
    truth: f64,
    outer: usize,
    inner: usize,
) -> Result<(f64, Vec<IntervalRecord>)> {
    let mut stream = replicate_stream(config, TAG_DOC, outer, inner);
    let (ni, nj) = (config.n, config.n_j());
    let yi = document_from(ri, ni, &mut stream)?;
    let yj = document_from(rj, nj, &mut stream)?;
    let fi = inference::fit_document(&yi, &s.a_hat, &config.mle)?;
    let fj = inference::fit_document(&yj, &s.a_hat, &config.mle)?;
    let point = inference::distance_estimate(&fi.debiased.alpha, &fj.debiased.alpha, &s.cost_hat)?;
    let settings = ResamplingSettings {
        m: config.m,
        b: config.b,
        gamma: config.gamma,
        delta: config.delta,
        mle: config.mle,
    };
    let mut out = vec![];
    for &method in &config.methods {
        let tag = match method {
            CiMethod::Plugin => TAG_SAMPLER,
            CiMethod::DerivBs => TAG_BOOT,
            CiMethod::MOfNBs => TAG_BOOT + 100,
        };
        let seed = replicate_seed(config, tag, outer, inner);
        let sorted = inference::reference_samples(method, (&yi, &fi), (&yj, &fj), &s.a_hat, &s.cost_hat, &settings, seed)?;
        let ci = inference::confidence_interval(point, &sorted, config.level, ni, nj)?;
        out.push(interval_record(method.label(), ci, truth));
    }
    Ok((point, out))
}

/// Standardized draws `√N(α̂_k - α_k)/√Σ_kk` of each enabled estimator (and of
/// the simplex MLE) with one-sample KS tests against `N(0, 1)`. `Σ` is the
/// true asymptotic covariance of the debiased MLE.
pub fn run_normality_experiment(config: &SimConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    let s = setup(config)?;
    let mut report = ExperimentReport::new("normality", config);
    let alpha = outer_weights(config, 0, 0)?;
    report.true_weights.push(alpha.as_slice().to_vec());
    let r = ProbVec::from_weights(&s.a.mix(alpha.as_slice()))?;
    let sigma = estimators::sigma_from_weights(alpha.as_slice(), &s.a)?.sigma;
    let sigma_ls = {
        let est = estimators::WeightEstimate {
            alpha: alpha.as_slice().to_vec(),
            method: estimators::WeightMethod::Wls,
            support: vec![],
            iterations: 0,
            converged: true,
        };
        estimators::sigma_ls(&est, r.as_slice(), &s.a)?.sigma
    };
    let k = config.k;
    let root_n = (config.n as f64).sqrt();

    type Draw = (Vec<f64>, Vec<f64>, Vec<f64>);
    let draws: Vec<Result<Draw>> = (0..config.n_reps)
        .into_par_iter()
        .map(|rep| {
            let mut stream = replicate_stream(config, TAG_DOC, 0, rep);
            let y = document_from(&r, config.n, &mut stream)?;
            let x = y.frequencies();
            let mle = estimators::mle_weights(&x, &s.a_hat, &config.mle)?;
            let deb = estimators::debias(&mle, &x, &s.a_hat)?;
            let wls = estimators::wls_weights(&x, &s.a_hat)?;
            Ok((mle.alpha, deb.alpha, wls.alpha))
        })
        .collect();

    let mut kept: Vec<Draw> = vec![];
    for (rep, d) in draws.into_iter().enumerate() {
        match d {
            Ok(v) => {
                kept.push(v);
                report.records.push(ReplicateRecord {
                    outer: 0,
                    inner: rep,
                    truth: 0.0,
                    point: None,
                    intervals: vec![],
                    error: None,
                })
            }
            Err(e) => report.records.push(ReplicateRecord {
                outer: 0,
                inner: rep,
                truth: 0.0,
                point: None,
                intervals: vec![],
                error: Some(e.to_string()),
            }),
        }
    }

    let mut families: Vec<(&str, usize, &DMatrix<f64>)> = vec![("mle", 0, &sigma)];
    if config.estimators.contains(&EstimatorKind::MleDebiased) {
        families.push(("mle_debiased", 1, &sigma));
    }
    if config.estimators.contains(&EstimatorKind::Wls) {
        families.push(("wls", 2, &sigma_ls));
    }
    for (name, slot, cov) in families {
        for c in 0..k {
            let sd = cov[(c, c)].max(0.0).sqrt();
            if sd == 0.0 || kept.is_empty() {
                continue;
            }
            let z: Vec<f64> = kept
                .iter()
                .map(|d| {
                    let est = match slot {
                        0 => &d.0,
                        1 => &d.1,
                        _ => &d.2,
                    };
                    root_n * (est[c] - alpha.as_slice()[c]) / sd
                })
                .collect();
            let label = format!("{name}[{c}]");
            let (distance, p_value) = inference::ks_standard_normal(&z)?;
            report.ks.push(KsRecord {
                label: label.clone(),
                distance,
                p_value,
                n: z.len(),
            });
            report.series.push(Series { label, values: z });
        }
    }
    report.finish(config.n_reps, started);
    Ok(report)
}

/// Two-sample KS comparison, under the null, of `s·W̃` (with
/// `s = √(N_iN_j/(N_i+N_j))`) against draws from its limit law computed with
/// the true covariance and the true polytope.
pub fn run_convergence_experiment(config: &SimConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    let s = setup(config)?;
    let mut report = ExperimentReport::new("ks_convergence", config);
    let (ni, nj) = (config.n, config.n_j());
    let scale = inference::sample_scale(ni, nj);
    let mut distances = vec![];
    let mut pvalues = vec![];
    for outer in 0..config.n_outer {
        let alpha = outer_weights(config, outer, 0)?;
        report.true_weights.push(alpha.as_slice().to_vec());
        let r = ProbVec::from_weights(&s.a.mix(alpha.as_slice()))?;
        let sigma = estimators::sigma_from_weights(alpha.as_slice(), &s.a)?.sigma;
        let q = inference::pooled_covariance(&sigma, &sigma, ni, nj);
        let limit_seed = replicate_seed(config, TAG_LIMIT, outer, 0);
        let limit = inference::sample_limit_law(&q, &DualPolytope::new(s.cost.clone()), config.draws, limit_seed)?;

        let stats: Vec<Result<f64>> = (0..config.draws)
            .into_par_iter()
            .map(|rep| {
                let mut stream = replicate_stream(config, TAG_DOC, outer, rep);
                let yi = document_from(&r, ni, &mut stream)?;
                let yj = document_from(&r, nj, &mut stream)?;
                let xi = yi.frequencies();
                let xj = yj.frequencies();
                let di = estimators::debias(&estimators::mle_weights(&xi, &s.a_hat, &config.mle)?, &xi, &s.a_hat)?;
                let dj = estimators::debias(&estimators::mle_weights(&xj, &s.a_hat, &config.mle)?, &xj, &s.a_hat)?;
                Ok(scale * inference::distance_estimate(&di.alpha, &dj.alpha, &s.cost_hat)?)
            })
            .collect();
        let mut ok = vec![];
        let mut first_error = None;
        let mut failed = 0;
        for st in stats {
            match st {
                Ok(v) => ok.push(v),
                Err(e) => {
                    failed += 1;
                    first_error.get_or_insert(e.to_string());
                }
            }
        }
        let distance = inference::ks_distance(&ok, &limit)?;
        let p_value = inference::ks_two_sample_pvalue(&ok, &limit)?;
        distances.push(distance);
        pvalues.push(p_value);
        report.ks.push(KsRecord {
            label: format!("outer[{outer}]"),
            distance,
            p_value,
            n: ok.len(),
        });
        report.records.push(ReplicateRecord {
            outer,
            inner: 0,
            truth: 0.0,
            point: None,
            intervals: vec![],
            error: first_error.map(|e| format!("{failed} of {} draws failed; first: {e}", config.draws)),
        });
        if outer == 0 {
            report.series.push(Series {
                label: "scaled_estimates".into(),
                values: ok,
            });
            report.series.push(Series {
                label: "limit_draws".into(),
                values: limit,
            });
        }
    }
    let (dm, _) = mean_and_stderr(&distances);
    let (pm, _) = mean_and_stderr(&pvalues);
    report.ks.push(KsRecord {
        label: "average".into(),
        distance: dm,
        p_value: pm,
        n: config.draws,
    });
    report.finish(config.n_outer, started);
    Ok(report)
}

/// Null-case intervals from the debiased MLE and from WLS, both using their
/// known limit laws (true covariance, true polytope). Each weight draw gives
/// one paired length difference; common normals are used for both laws.
pub fn run_mle_vs_wls_experiment(config: &SimConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    let s = setup(config)?;
    let mut report = ExperimentReport::new("mle_vs_wls", config);
    let (ni, nj) = (config.n, config.n_j());

    struct Outer {
        r: ProbVec,
        mle_law: Vec<f64>,
        wls_law: Vec<f64>,
    }
    let outers: Vec<Result<Outer>> = (0..config.n_outer)
        .into_par_iter()
        .map(|outer| {
            let alpha = outer_weights(config, outer, 0)?;
            let r = ProbVec::from_weights(&s.a.mix(alpha.as_slice()))?;
            let sigma = estimators::sigma_from_weights(alpha.as_slice(), &s.a)?.sigma;
            let est = estimators::WeightEstimate {
                alpha: alpha.as_slice().to_vec(),
                method: estimators::WeightMethod::Wls,
                support: vec![],
                iterations: 0,
                converged: true,
            };
            let sigma_ls = estimators::sigma_ls(&est, r.as_slice(), &s.a)?.sigma;
            let poly = DualPolytope::new(s.cost.clone());
            let seed = replicate_seed(config, TAG_LIMIT, outer, 0);
            let mut mle_law = inference::sample_limit_law(&inference::pooled_covariance(&sigma, &sigma, ni, nj), &poly, config.m, seed)?;
            let mut wls_law = inference::sample_limit_law(&inference::pooled_covariance(&sigma_ls, &sigma_ls, ni, nj), &poly, config.m, seed)?;
            mle_law.sort_by(f64::total_cmp);
            wls_law.sort_by(f64::total_cmp);
            Ok(Outer { r, mle_law, wls_law })
        })
        .collect();
    let outers: Vec<Outer> = outers.into_iter().collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..config.n_outer)
        .flat_map(|o| (0..config.n_reps).map(move |r| (o, r)))
        .collect();
    report.records = jobs
        .par_iter()
        .map(|&(outer, inner)| {
            let o = &outers[outer];
            let res = (|| -> Result<(f64, Vec<IntervalRecord>)> {
                let mut stream = replicate_stream(config, TAG_DOC, outer, inner);
                let yi = document_from(&o.r, ni, &mut stream)?;
                let yj = document_from(&o.r, nj, &mut stream)?;
                let (xi, xj) = (yi.frequencies(), yj.frequencies());
                let mut out = vec![];
                let mut point = f64::NAN;
                if config.estimators.contains(&EstimatorKind::MleDebiased) {
                    let di = estimators::debias(&estimators::mle_weights(&xi, &s.a_hat, &config.mle)?, &xi, &s.a_hat)?;
                    let dj = estimators::debias(&estimators::mle_weights(&xj, &s.a_hat, &config.mle)?, &xj, &s.a_hat)?;
                    let w = inference::distance_estimate(&di.alpha, &dj.alpha, &s.cost_hat)?;
                    point = w;
                    let ci = inference::confidence_interval(w, &o.mle_law, config.level, ni, nj)?;
                    out.push(interval_record(EstimatorKind::MleDebiased.label(), ci, 0.0));
                }
                if config.estimators.contains(&EstimatorKind::Wls) {
                    let wi = estimators::wls_weights(&xi, &s.a_hat)?;
                    let wj = estimators::wls_weights(&xj, &s.a_hat)?;
                    let w = inference::distance_estimate(&wi.alpha, &wj.alpha, &s.cost_hat)?;
                    if point.is_nan() {
                        point = w;
                    }
                    let ci = inference::confidence_interval(w, &o.wls_law, config.level, ni, nj)?;
                    out.push(interval_record(EstimatorKind::Wls.label(), ci, 0.0));
                }
                Ok((point, out))
            })();
            match res {
                Ok((point, intervals)) => ReplicateRecord {
                    outer,
                    inner,
                    truth: 0.0,
                    point: Some(point),
                    intervals,
                    error: None,
                },
                Err(e) => ReplicateRecord {
                    outer,
                    inner,
                    truth: 0.0,
                    point: None,
                    intervals: vec![],
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let labels: Vec<&str> = config.estimators.iter().map(|e| e.label()).collect();
    report.summaries = summarize(&report.records, &labels);

    // paired per-draw length difference (the known-law length depends only on the draw)
    let scale = inference::sample_scale(ni, nj);
    let diffs: Vec<f64> = outers
        .iter()
        .map(|o| {
            let len = |law: &[f64]| {
                (inference::quantile_sorted(law, 1.0 - config.level / 2.0) - inference::quantile_sorted(law, config.level / 2.0)) / scale
            };
            len(&o.wls_law) - len(&o.mle_law)
        })
        .collect();
    let (mean, stderr) = mean_and_stderr(&diffs);
    report.paired.push(PairedSummary {
        label: "wls_minus_mle_length".into(),
        mean,
        stderr,
        n: diffs.len(),
    });
    report.finish(jobs.len(), started);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_valid_and_deterministic() {
        let a = gen_topic_matrix(20, 4, 9).unwrap();
        assert_eq!(a, gen_topic_matrix(20, 4, 9).unwrap());
        for c in 0..4 {
            assert!((a.matrix().column(c).sum() - 1.0).abs() < 1e-12);
        }
        let single = gen_topic_matrix(3, 1, 0).unwrap();
        assert!((single.matrix().sum() - 1.0).abs() < 1e-12);

        let w = gen_weights(5, 3, 2).unwrap();
        assert_eq!(w.as_slice().iter().filter(|&&v| v > 0.0).count(), 3);
        assert_eq!(gen_weights(1, 1, 0).unwrap().as_slice(), &[1.0]);

        let doc = gen_document(&ProbVec::vertex(4, 2), 11, 5).unwrap();
        assert_eq!(doc.counts(), &[0, 0, 11, 0]);
        let one = gen_document(&ProbVec::uniform(6), 1, 5).unwrap();
        assert_eq!(one.total(), 1);
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::default().validate().is_ok());
        let bad = SimConfig { tau: 9, ..SimConfig::default() };
        assert!(bad.validate().is_err());
        let bad = SimConfig { level: 1.5, ..SimConfig::default() };
        assert!(bad.validate().is_err());
        let q = SimConfig::default().quick();
        assert_eq!((q.n_reps, q.m, q.b), (100, 500, 500));
    }

    #[test]
    fn single_replicate_report() {
        let cfg = SimConfig {
            k: 3,
            p: 30,
            n: 200,
            n_reps: 1,
            m: 400,
            ..SimConfig::default()
        };
        let rep = run_ci_experiment(&cfg).unwrap();
        assert_eq!(rep.records.len(), 1);
        assert!(rep.valid);
        let again = run_ci_experiment(&cfg).unwrap();
        assert_eq!(rep.canonical_bytes(), again.canonical_bytes());
    }
}
