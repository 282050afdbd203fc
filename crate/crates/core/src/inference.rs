//! Distance estimation and inference: the plug-in limit sampler, confidence
//! intervals, the two bootstrap baselines and Kolmogorov-Smirnov statistics.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimators::{self, CountVector, CovEstimate, MleOptions, WeightEstimate};
use crate::numlin;
use crate::rng;
use crate::transport::{self, CostMatrix, DualPolytope, TopicMatrix};

/// Bootstrap replicates whose resample cannot be fitted are redrawn at most
/// this many times in total before giving up.
const MAX_REDRAWS_PER_REPLICATE: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    Plugin,
    DerivBs,
    MOfNBs,
}

impl CiMethod {
    pub fn label(self) -> &'static str {
        match self {
            CiMethod::Plugin => "plugin",
            CiMethod::DerivBs => "deriv_bs",
            CiMethod::MOfNBs => "m_of_n_bs",
        }
    }
}

/// Resampling sizes and options shared by the three interval methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResamplingSettings {
    /// Limit-law draws for the plug-in method.
    pub m: usize,
    /// Bootstrap replicates.
    pub b: usize,
    /// m-out-of-N exponent.
    pub gamma: f64,
    /// Facet slack; `None` samples over the whole of `F̂`.
    pub delta: Option<f64>,
    pub mle: MleOptions,
}

/// Sorted draws approximating the law of `√N(W̃ - W)` for `method`.
pub fn reference_samples(
    method: CiMethod,
    (y_i, fit_i): (&CountVector, &DocumentFit),
    (y_j, fit_j): (&CountVector, &DocumentFit),
    a_hat: &TopicMatrix,
    cost: &CostMatrix,
    settings: &ResamplingSettings,
    seed: u64,
) -> Result<Vec<f64>> {
    Ok(match method {
        CiMethod::Plugin => limit_sampler(fit_i, fit_j, cost, settings.delta, settings.m, seed)?.sorted().to_vec(),
        CiMethod::DerivBs => {
            let poly = plugin_polytope(fit_i, fit_j, cost, settings.delta)?;
            derivative_bootstrap(y_i, y_j, a_hat, &poly, settings.b, seed, &settings.mle)?.sorted()
        }
        CiMethod::MOfNBs => m_out_of_n_bootstrap(y_i, y_j, a_hat, cost, settings.gamma, settings.b, seed, &settings.mle)?.sorted(),
    })
}

/// `sup_{f ∈ F̂} fᵀ(α_i - α_j)`. Inputs may be debiased estimates with negative
/// entries; the LP value is returned as is.
pub fn distance_estimate(alpha_i: &[f64], alpha_j: &[f64], cost: &CostMatrix) -> Result<f64> {
    if alpha_i.len() != alpha_j.len() {
        return Err(Error::DimError {
            expected: alpha_i.len(),
            got: alpha_j.len(),
        });
    }
    let u: Vec<f64> = alpha_i.iter().zip(alpha_j).map(|(a, b)| a - b).collect();
    Ok(transport::kr_dual_value(&u, &DualPolytope::new(cost.clone()))?.value)
}

/// `√(N_i N_j / (N_i + N_j))`.
pub fn sample_scale(n_i: u64, n_j: u64) -> f64 {
    let (a, b) = (n_i as f64, n_j as f64);
    (a * b / (a + b)).sqrt()
}

/// Covariance of the limit of `√(N_iN_j/(N_i+N_j))((α̃_i - α̃_j) - (α_i - α_j))`:
/// `(N_j Σ_i + N_i Σ_j) / (N_i + N_j)`.
pub fn pooled_covariance(sigma_i: &DMatrix<f64>, sigma_j: &DMatrix<f64>, n_i: u64, n_j: u64) -> DMatrix<f64> {
    let (a, b) = (n_i as f64, n_j as f64);
    (sigma_i * b + sigma_j * a) / (a + b)
}

/// Everything inference needs from one document.
#[derive(Debug, Clone)]
pub struct DocumentFit {
    pub n: u64,
    pub mle: WeightEstimate,
    pub debiased: WeightEstimate,
    /// Plug-in covariance at the MLE.
    pub sigma: CovEstimate,
}

pub fn fit_document(counts: &CountVector, a_hat: &TopicMatrix, opts: &MleOptions) -> Result<DocumentFit> {
    let x = counts.frequencies();
    let mle = estimators::mle_weights(&x, a_hat, opts)?;
    let debiased = estimators::debias(&mle, &x, a_hat)?;
    let sigma = estimators::sigma_hat(&mle, a_hat)?;
    Ok(DocumentFit {
        n: counts.total(),
        mle,
        debiased,
        sigma,
    })
}

/// Which polytope the limit law is maximized over.
///
/// `None` is `F̂` itself (enough under the null `α_i = α_j`); `Some(δ)` is the
/// facet-restricted `F̂'_δ`.
pub fn plugin_polytope(fit_i: &DocumentFit, fit_j: &DocumentFit, cost: &CostMatrix, delta: Option<f64>) -> Result<DualPolytope> {
    match delta {
        None => Ok(DualPolytope::new(cost.clone())),
        Some(d) => transport::restricted_polytope(cost, &fit_i.mle.alpha, &fit_j.mle.alpha, None, d),
    }
}

/// Monte Carlo draws from a limit law `sup_{f ∈ polytope} fᵀZ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSampleSet {
    pub samples: Vec<f64>,
    sorted: Vec<f64>,
    pub delta: Option<f64>,
    pub seed: u64,
}

impl LimitSampleSet {
    pub fn new(samples: Vec<f64>, delta: Option<f64>, seed: u64) -> Self {
        let mut sorted = samples.clone();
        sorted.sort_by(f64::total_cmp);
        LimitSampleSet {
            samples,
            sorted,
            delta,
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// The `⌈Mγ⌉`-th order statistic (1-based, clamped to `[1, M]`).
    pub fn quantile(&self, gamma: f64) -> f64 {
        quantile_sorted(&self.sorted, gamma)
    }

    /// Empirical CDF `#{b : sample_b ≤ t} / M`.
    pub fn ecdf(&self, t: f64) -> f64 {
        if self.sorted.is_empty() {
            return f64::NAN;
        }
        self.sorted.partition_point(|&s| s <= t) as f64 / self.sorted.len() as f64
    }
}

/// `⌈Mγ⌉`-th order statistic of an ascending sample.
pub fn quantile_sorted(sorted: &[f64], gamma: f64) -> f64 {
    let m = sorted.len();
    if m == 0 {
        return f64::NAN;
    }
    // guard against Mγ landing a hair above an integer through roundoff
    let idx = ((m as f64) * gamma - 1e-9).ceil() as i64;
    let idx = idx.clamp(1, m as i64) as usize;
    sorted[idx - 1]
}

/// Draws `Z_b ~ N(0, cov)` for `b < m` and evaluates `sup_{f ∈ polytope} fᵀZ_b`.
///
/// Normals come from a single stream in order, so the output does not depend
/// on the number of worker threads.
pub fn sample_limit_law(cov: &DMatrix<f64>, polytope: &DualPolytope, m: usize, seed: u64) -> Result<Vec<f64>> {
    let k = polytope.k();
    if cov.nrows() != k || cov.ncols() != k {
        return Err(Error::DimError {
            expected: k,
            got: cov.nrows(),
        });
    }
    let root = numlin::psd_sqrt(&numlin::clip_psd(cov)?)?;
    let mut stream = rng::stream(seed, &[0x11, m as u64]);
    let directions: Vec<DVector<f64>> = (0..m)
        .map(|_| &root * DVector::from_vec(rng::standard_normals(&mut stream, k)))
        .collect();
    directions
        .par_iter()
        .map(|z| {
            if z.iter().all(|&v| v == 0.0) {
                return Ok(0.0);
            }
            transport::kr_dual_value(z.as_slice(), polytope).map(|v| v.value)
        })
        .collect()
}

/// Plug-in estimate of the limit law of `√(N_iN_j/(N_i+N_j))(W̃ - W)`.
pub fn limit_sampler(
    fit_i: &DocumentFit,
    fit_j: &DocumentFit,
    cost: &CostMatrix,
    delta: Option<f64>,
    m: usize,
    seed: u64,
) -> Result<LimitSampleSet> {
    if m == 0 {
        return Err(Error::InvalidParam("number of limit samples must be >= 1".into()));
    }
    let polytope = plugin_polytope(fit_i, fit_j, cost, delta)?;
    let q = pooled_covariance(&fit_i.sigma.sigma, &fit_j.sigma.sigma, fit_i.n, fit_j.n);
    let samples = sample_limit_law(&q, &polytope, m, seed)?;
    Ok(LimitSampleSet::new(samples, delta, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub point: f64,
    pub scale: f64,
}

impl ConfidenceInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, w: f64) -> bool {
        self.lower <= w && w <= self.upper
    }
}

/// `[W̃ - q_{1-t/2}/s, W̃ - q_{t/2}/s]` with `s = √(N_iN_j/(N_i+N_j))`, where
/// `t` is the miscoverage level (0.05 for a 95% interval).
pub fn confidence_interval(w_tilde: f64, sorted: &[f64], level: f64, n_i: u64, n_j: u64) -> Result<ConfidenceInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParam(format!("level {level} must lie in (0, 1)")));
    }
    let m = sorted.len();
    if (m as f64) < 20.0 / level {
        return Err(Error::InvalidParam(format!(
            "{m} samples are too few for level {level}; need at least {}",
            (20.0 / level).ceil()
        )));
    }
    if n_i == 0 || n_j == 0 {
        return Err(Error::InvalidParam("document sizes must be positive".into()));
    }
    let scale = sample_scale(n_i, n_j);
    let hi = quantile_sorted(sorted, 1.0 - level / 2.0);
    let lo = quantile_sorted(sorted, level / 2.0);
    Ok(ConfidenceInterval {
        lower: w_tilde - hi / scale,
        upper: w_tilde - lo / scale,
        level,
        point: w_tilde,
        scale,
    })
}

/// Bootstrap draws plus bookkeeping on failed resamples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSamples {
    pub samples: Vec<f64>,
    /// Resamples that could not be fitted and were drawn again.
    pub redraws: usize,
}

impl BootstrapSamples {
    pub fn sorted(&self) -> Vec<f64> {
        let mut s = self.samples.clone();
        s.sort_by(f64::total_cmp);
        s
    }
}

fn resample(counts: &CountVector, size: u64, rng: &mut rng::StreamRng) -> Result<CountVector> {
    let x = counts.frequencies();
    CountVector::new(rng::multinomial(rng, size, x.as_slice()))
}

fn debiased_weights(counts: &CountVector, a_hat: &TopicMatrix, opts: &MleOptions) -> Result<Vec<f64>> {
    let x = counts.frequencies();
    let mle = estimators::mle_weights(&x, a_hat, opts)?;
    Ok(estimators::debias(&mle, &x, a_hat)?.alpha)
}

/// Runs `draw` with fresh streams until it succeeds; validation errors are
/// returned immediately, numerical ones trigger a redraw.
fn with_redraws<T>(seed: u64, tags: [u64; 2], mut draw: impl FnMut(&mut rng::StreamRng) -> Result<T>) -> Result<(T, usize)> {
    let mut last = None;
    for attempt in 0..MAX_REDRAWS_PER_REPLICATE {
        let mut stream = rng::stream(seed, &[tags[0], tags[1], attempt as u64]);
        match draw(&mut stream) {
            Ok(v) => return Ok((v, attempt)),
            Err(e) if e.is_numerical() => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or(Error::DegenerateSupport))
}

fn collect_bootstrap(results: Vec<Result<(f64, usize)>>) -> Result<BootstrapSamples> {
    let mut samples = Vec::with_capacity(results.len());
    let mut redraws = 0;
    for r in results {
        let (v, extra) = r?;
        samples.push(v);
        redraws += extra;
    }
    Ok(BootstrapSamples { samples, redraws })
}

/// `m`-out-of-`N` bootstrap: `m_ℓ = ⌈N_ℓ^γ⌉` counts resampled from each
/// document's frequencies, emitting `√(m_im_j/(m_i+m_j)) (W̃_b - W̃)`.
#[allow(clippy::too_many_arguments)]
pub fn m_out_of_n_bootstrap(
    x_i: &CountVector,
    x_j: &CountVector,
    a_hat: &TopicMatrix,
    cost: &CostMatrix,
    gamma: f64,
    b: usize,
    seed: u64,
    opts: &MleOptions,
) -> Result<BootstrapSamples> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParam(format!("gamma {gamma} must lie in (0, 1)")));
    }
    if b == 0 {
        return Err(Error::InvalidParam("number of bootstrap samples must be >= 1".into()));
    }
    let w_tilde = distance_estimate(&debiased_weights(x_i, a_hat, opts)?, &debiased_weights(x_j, a_hat, opts)?, cost)?;
    let m_i = (x_i.total() as f64).powf(gamma).ceil() as u64;
    let m_j = (x_j.total() as f64).powf(gamma).ceil() as u64;
    let scale = sample_scale(m_i, m_j);
    let results: Vec<_> = (0..b)
        .into_par_iter()
        .map(|rep| {
            with_redraws(seed, [0x21, rep as u64], |stream| {
                let yi = resample(x_i, m_i, stream)?;
                let yj = resample(x_j, m_j, stream)?;
                let w = distance_estimate(&debiased_weights(&yi, a_hat, opts)?, &debiased_weights(&yj, a_hat, opts)?, cost)?;
                Ok(scale * (w - w_tilde))
            })
        })
        .collect();
    collect_bootstrap(results)
}

/// Derivative-based bootstrap: full-size resamples, directions
/// `B_b = s(α̃_b^i - α̃_b^j - α̃^i + α̃^j)` plugged into the support function of
/// `polytope`.
#[allow(clippy::too_many_arguments)]
pub fn derivative_bootstrap(
    x_i: &CountVector,
    x_j: &CountVector,
    a_hat: &TopicMatrix,
    polytope: &DualPolytope,
    b: usize,
    seed: u64,
    opts: &MleOptions,
) -> Result<BootstrapSamples> {
    if b == 0 {
        return Err(Error::InvalidParam("number of bootstrap samples must be >= 1".into()));
    }
    let ai = debiased_weights(x_i, a_hat, opts)?;
    let aj = debiased_weights(x_j, a_hat, opts)?;
    let scale = sample_scale(x_i.total(), x_j.total());
    let results: Vec<_> = (0..b)
        .into_par_iter()
        .map(|rep| {
            with_redraws(seed, [0x22, rep as u64], |stream| {
                let yi = resample(x_i, x_i.total(), stream)?;
                let yj = resample(x_j, x_j.total(), stream)?;
                let bi = debiased_weights(&yi, a_hat, opts)?;
                let bj = debiased_weights(&yj, a_hat, opts)?;
                let dir: Vec<f64> = (0..ai.len()).map(|k| scale * (bi[k] - bj[k] - ai[k] + aj[k])).collect();
                if dir.iter().all(|&v| v == 0.0) {
                    return Ok(0.0);
                }
                Ok(transport::kr_dual_value(&dir, polytope)?.value)
            })
        })
        .collect();
    collect_bootstrap(results)
}

fn sorted_copy(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::InvalidParam("empty sample".into()));
    }
    if v.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidParam("sample contains NaN".into()));
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Two-sample Kolmogorov-Smirnov distance `sup_t |F_a(t) - F_b(t)|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let sa = sorted_copy(a)?;
    let sb = sorted_copy(b)?;
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        let t = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= t {
            i += 1;
        }
        while j < sb.len() && sb[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        // the alternating series converges slowly here and the value is 1 to
        // double precision
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_pvalue(d: f64, n_eff: f64) -> f64 {
    let root = n_eff.sqrt();
    kolmogorov_survival((root + 0.12 + 0.11 / root) * d)
}

/// Asymptotic p-value of the two-sample KS test.
pub fn ks_two_sample_pvalue(a: &[f64], b: &[f64]) -> Result<f64> {
    let d = ks_distance(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    Ok(ks_pvalue(d, na * nb / (na + nb)))
}

/// One-sample KS test against a continuous CDF: `(D, p-value)`.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    let s = sorted_copy(sample)?;
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok((d, ks_pvalue(d, n)))
}

pub fn ks_standard_normal(sample: &[f64]) -> Result<(f64, f64)> {
    let normal = Normal::standard();
    ks_one_sample(sample, |x| normal.cdf(x))
}
