//! Randomized property suites over every module, run by the `selftest`
//! command and by the acceptance tests.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::estimators::{self, MleOptions};
use crate::inference::{self, LimitSampleSet};
use crate::numlin;
use crate::rng::{self, StreamRng};
use crate::simulate::{self, SimConfig};
use crate::transport::{self, CostMatrix, DualPolytope, Metric, ProbVec, TopicMatrix};

#[derive(Debug, Clone, Serialize)]
pub struct PropertyOutcome {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SelftestOptions {
    pub seed: u64,
    /// Fewer random instances and smaller experiments.
    pub quick: bool,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        SelftestOptions { seed: 2024, quick: false }
    }
}

type Check = fn(&mut StreamRng, bool) -> Result<String, String>;

const SUITE: &[(&str, &str, Check)] = &[
    ("numlin", "eigen_contracts", eigen_contracts),
    ("numlin", "pinv_and_sqrt_of_psd", pinv_and_sqrt_of_psd),
    ("numlin", "eig_determinism", eig_determinism),
    ("transport", "strong_duality", strong_duality),
    ("transport", "metric_axioms", metric_axioms),
    ("transport", "joint_convexity", joint_convexity),
    ("transport", "dirac_agreement", dirac_agreement),
    ("transport", "tv_upper_bound", tv_upper_bound),
    ("transport", "support_function_stability", support_function_stability),
    ("estimators", "em_monotone", em_monotone),
    ("estimators", "debias_fixes_interior_mle", debias_fixes_interior_mle),
    ("estimators", "sigma_annihilates_ones", sigma_annihilates_ones),
    ("estimators", "estimators_deterministic_and_normalized", estimators_deterministic_and_normalized),
    ("inference", "sampler_worker_invariance", sampler_worker_invariance),
    ("inference", "samples_nonnegative", samples_nonnegative),
    ("inference", "quantiles_and_nesting", quantiles_and_nesting),
    ("inference", "inactive_facet_matches_unrestricted", inactive_facet_matches_unrestricted),
    ("simulate", "report_determinism", report_determinism),
    ("simulate", "coverage_in_binomial_band", coverage_in_binomial_band),
    ("simulate", "length_decreases_with_n", length_decreases_with_n),
];

/// Runs every property; never panics on a failed property.
pub fn run(opts: SelftestOptions) -> Vec<PropertyOutcome> {
    SUITE
        .iter()
        .enumerate()
        .map(|(i, &(module, name, check))| {
            let started = Instant::now();
            let mut stream = rng::stream(opts.seed, &[0x5e1f, i as u64]);
            let (passed, detail) = match check(&mut stream, opts.quick) {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            PropertyOutcome {
                module,
                name,
                passed,
                detail,
                seconds: started.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

fn count(quick: bool, full: usize) -> usize {
    if quick {
        (full / 5).max(10)
    } else {
        full
    }
}

fn random_topics(rng: &mut StreamRng, p: usize, k: usize) -> TopicMatrix {
    simulate::gen_topic_matrix(p, k, rng.random()).expect("valid sizes")
}

fn random_weights(rng: &mut StreamRng, k: usize) -> ProbVec {
    let tau = if rng.random_bool(0.3) { rng.random_range(1..=k) } else { 0 };
    simulate::gen_weights(k, tau, rng.random()).expect("valid sizes")
}

/// TV costs between random topic columns: a metric.
fn random_cost(rng: &mut StreamRng, k: usize) -> CostMatrix {
    let a = random_topics(rng, k + 3, k);
    transport::cost_matrix(&a, &Metric::TotalVariation).expect("valid topics")
}

fn random_psd(rng: &mut StreamRng, k: usize, rank: usize) -> DMatrix<f64> {
    let b = DMatrix::from_fn(k, rank, |_, _| rng.random::<f64>() - 0.5);
    &b * b.transpose()
}

fn wasserstein(a: &ProbVec, b: &ProbVec, c: &CostMatrix) -> f64 {
    transport::wasserstein_primal(a, b, c).expect("valid instance").value
}

fn eigen_contracts(rng: &mut StreamRng, quick: bool) -> Result<String, String> {
    for _ in 0..count(quick, 200) {
        let k = rng.random_range(1..=12);
        let rank = rng.random_range(0..=k);
        let m = random_psd(rng, k, rank) + DMatrix::from_fn(k, k, |_, _| 0.0);
        let e = numlin::sym_eig(&m).map_err(|e| e.to_string())?;
        let u = &e.eigenvectors;
        let recon = (&m - e.reconstruct()).norm();
        if recon > 1e-9 * m.norm().max(1.0) {
            return Err(format!("reconstruction residual {recon:e} at K={k}"));
        }
        let orth = (u.transpose() * u - DMatrix::identity(k, k)).norm();
        if orth > 1e-10 {
            return Err(format!("orthonormality residual {orth:e} at K={k}"));
        }
        let top = e.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
        let expect = e.eigenvalues.iter().filter(|&&l| l > e.rank_tolerance * top).count();
        if expect != e.rank || e.eigenvalues.as_slice().windows(2).any(|w| w[0] < w[1]) {
            return Err(format!("rank/order contract broken at K={k}"));
        }
    }
    Ok("reconstruction, orthonormality, rank and ordering hold".into())
}

fn pinv_and_sqrt_of_psd(rng: &mut StreamRng, quick: bool) -> Result<String, String> {
    for _ in 0..count(quick, 200) {
        let k = rng.random_range(1..=10);
        let rank = rng.random_range(0..=k);
        let m = random_psd(rng, k, rank);
        let p = numlin::pinv(&m).map_err(|e| e.to_string())?;
        let s = numlin::psd_sqrt_pinv(&m).map_err(|e| e.to_string())?;
        let min_eig = numlin::sym_eig(&p).map_err(|e| e.to_string())?.eigenvalues.min();
        if min_eig < -1e-8 * p.norm().max(1.0) {
            return Err(format!("pinv not PSD: min eigenvalue {min_eig:e}"));
        }
        let r = (&s * &s - &p).norm();
        if r > 1e-8 * p.norm().max(1.0) {
            return Err(format!("S² - M⁺ residual {r:e} at K={k}, rank {rank}"));
        }
        let pen = (&m * &p * &m - &m).norm() + (&p * &m * &p - &p).norm();
        if pen > 1e-8 * (1.0 + p.norm() + m.norm()) {
            return Err(format!("Penrose residual {pen:e}"));
        }
    }
    Ok("pinv PSD, Penrose conditions and S² = M⁺ hold".into())
}

fn eig_determinism(rng: &mut StreamRng, _quick: bool) -> Result<String, String> {
    let m = random_psd(rng, 8, 6);
    let a = numlin::sym_eig(&m).map_err(|e| e.to_string())?;
    let b = numlin::sym_eig(&m.clone()).map_err(|e| e.to_string())?;
    let same = a.eigenvalues.iter().zip(b.eigenvalues.iter()).all(|(x, y)| x.to_bits() == y.to_bits())
        && a.eigenvectors.iter().zip(b.eigenvectors.iter()).all(|(x, y)| x.to_bits() == y.to_bits());
    if same {
        Ok("bitwise identical".into())
    } else {
        Err("repeated decomposition differs".into())
    }
}

fn strong_duality(rng: &mut StreamRng, quick: bool) -> Result<String, String> {
    let n = count(quick, 1000);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let k = rng.random_range(2..=10);
        let c = random_cost(rng, k);
        let a = random_weights(rng, k);
        let b = random_weights(rng, k);
        let primal = wasserstein(&a, &b, &c);
        let u: Vec<f64> = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x - y).collect();
        let dual = transport::kr_dual_value(&u, &DualPolytope::new(c.clone())).map_err(|e| e.to_string())?.value;
        let gap = (primal - dual).abs() / primal.max(1.0);
        worst = worst.max(gap);
        if gap > 1e-8 {
            return Err(format!("gap {gap:e} at K={k}"));
        }
    }
    Ok(format!("{n} instances, worst relative gap {worst:.1e}"))
}

fn metric_axioms(rng: &mut StreamRng, quick: bool) -> Result<String, String> {
    for _ in 0..count(quick, 300) {
        let k = rng.random_range(2..=8);
        let c = random_cost(rng, k);
        let (a, b, d) = (random_weights(rng, k), random_weights(rng, k), random_weights(rng, k));
        let ab = wasserstein(&a, &b, &c);
        let ba = wasserstein(&b, &a, &c);
        if (ab - ba).abs() > 1e-10 {
            return Err(format!("asymmetry {:e}", (ab - ba).abs()));
        }
        if wasserstein(&a, &a, &c).abs() > 1e-12 {
            return Err("W(α, α) ≠ 0".into());
        }
        let ad = wasserstein(&a, &d, &c);
        let db = wasserstein(&d, &b, &c);
        if ab > ad + db + 1e-8 {
            return Err(format!("triangle violated by {:e}", ab - ad - db));
        }
    }
    Ok("symmetry, identity and triangle inequality hold".into())
}

fn joint_convexity(rng: &mut StreamRng, quick: bool) -> Result<String, String> {
    for _ in 0..count(quick, 300) {
        let k = rng.random_range(2..=8);
        let c = random_cost(rng, k);
        let (a, b, a2, b2) = (random_weights(rng, k), random_weights(rng, k), random_weights(rng, k), random_weights(rng, k));
        let l: f64 = rng.random();
        let mix = |x: &ProbVec, y: &ProbVec| {
            let w: Vec<f64> = x.as_slice().iter().zip(y.as_slice()).map(|(p, q)| l * p + (1.0 - l) * q).collect();
            ProbVec::from_weights(&w).expect("convex combination")
        };
        let lhs = wasserstein(&mix(&a, &a2), &mix(&b, &b2), &c);
        let rhs = l * wasserstein(&a, &b, &c) + (1.0 - l) * wasserstein(&a2, &b2, &c);
        if lhs > rhs + 1e-8 {
            return Err(format!("convexity violated by {:e}", lhs - rhs));
        }
    }
    Ok("jointly convex on random draws".into())
}

fn dirac_agreement(rng: &mut StreamRng, quick: bool) -> Result<String, String> {
    for _ in 0..count(quick, 50) {
        let k = rng.random_range(1..=10);
        let c = random_cost(rng, k);
        for i in 0..k {
            for j in 0..k {
                let w = wasserstein(&ProbVec::vertex(k, i), &ProbVec::vertex(k, j), &c);
                if (w - c.get(i, j)).abs() > 1e-12 {
                    return Err(format!("W(e_{i}, e_{j}) = {w} but cost is {}", c.get(i, j)));
                }
            }
        }
    }
    Ok("W(e_k, e_l) = d(A_k, A_l)".into())
}

fn tv_upper_bound(rng: &mut StreamRng, quick: bool) -> Result<String, String> {
    for _ in 0..count(quick, 300) {
        let k = rng.random_range(2..=10);
        let c = random_cost(rng, k);
        let (a, b) = (random_weights(rng, k), random_weights(rng, k));
        let w = wasserstein(&a, &b, &c);
        let bound = c.max_entry() * transport::tv_distance(&a, &b).map_err(|e| e.to_string())?;
        if w > bound + 1e-8 {
            return Err(format!("W = {w} exceeds max cost · TV = {bound}"));
        }
    }
    Ok("W ≤ max cost · TV".into())
}

fn support_function_stability(rng: &mut StreamRng, quick: bool) -> Result<String, String> {
    for _ in 0..count(quick, 300) {
        let k = rng.random_range(2..=8);
        let a = random_topics(rng, k + 4, k);
        let noise: f64 = 0.3 * rng.random::<f64>();
        let perturbed = DMatrix::from_fn(a.p(), k, |r, cc| a.matrix()[(r, cc)] * (1.0 + noise * (rng.random::<f64>() - 0.5)));
        let a_hat = TopicMatrix::new(normalize_columns(perturbed)).map_err(|e| e.to_string())?;
        let c = transport::cost_matrix(&a, &Metric::TotalVariation).map_err(|e| e.to_string())?;
        let c_hat = transport::cost_matrix(&a_hat, &Metric::TotalVariation).map_err(|e| e.to_string())?;
        let eps = (c.matrix() - c_hat.matrix()).abs().max();
        // random u with ‖u‖₁ ≤ 1
        let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() - 0.5).collect();
        let l1: f64 = raw.iter().map(|v| v.abs()).sum::<f64>().max(1e-300);
        let scale: f64 = rng.random();
        let u: Vec<f64> = raw.iter().map(|v| scale * v / l1).collect();
        let s = transport::kr_dual_value(&u, &DualPolytope::new(c)).map_err(|e| e.to_string())?.value;
        let s_hat = transport::kr_dual_value(&u, &DualPolytope::new(c_hat)).map_err(|e| e.to_string())?.value;
        if (s - s_hat).abs() > eps + 1e-8 {
            return Err(format!("support functions differ by {:e} > {eps:e}", (s - s_hat).abs()));
        }
    }
    Ok("|h_F(u) − h_F̂(u)| ≤ max |C − Ĉ| for ‖u‖₁ ≤ 1".into())
}

fn normalize_columns(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for c in 0..m.ncols() {
        let s = m.column(c).sum();
        m.column_mut(c).iter_mut().for_each(|v| *v /= s);
    }
    m
}

fn random_document(rng: &mut StreamRng, a: &TopicMatrix, alpha: &ProbVec, n: u64) -> ProbVec {
    let r = a.mix(alpha.as_slice());
    let counts = rng::multinomial(rng, n, &r);
    estimators::CountVector::new(counts).expect("n ≥ 1").frequencies()
}

fn em_monotone(rng: &mut StreamRng, quick: bool) -> Result<String, String> {
    for _ in 0..count(quick, 50) {
        let k = rng.random_range(2..=6);
        let a = random_topics(rng, 30, k);
        let alpha = random_weights(rng, k);
        let x = random_document(rng, &a, &alpha, 200);
        let trace = estimators::em_trace(&x, &a, 200).map_err(|e| e.to_string())?;
        for w in trace.windows(2) {
            if w[1].1 < w[0].1 - 1e-12 {
                return Err(format!("objective decreased by {:e}", w[0].1 - w[1].1));
            }
        }
    }
    Ok("objective non-decreasing over 200 EM steps".into())
}

fn debias_fixes_interior_mle(rng: &mut StreamRng, quick: bool) -> Result<String, String> {
    let mut tested = 0;
    for _ in 0..count(quick, 100) {
        let k = rng.random_range(2..=6);
        let a = random_topics(rng, 40, k);
        let alpha = simulate::gen_weights(k, 0, rng.random()).expect("valid");
        let x = ProbVec::from_weights(&a.mix(alpha.as_slice())).expect("mixture");
        let mle = estimators::mle_weights(&x, &a, &MleOptions::default()).map_err(|e| e.to_string())?;
        if mle.alpha.iter().any(|&v| v <= estimators::ACTIVE_TAU) {
            continue;
        }
        tested += 1;
        let deb = estimators::debias(&mle, &x, &a).map_err(|e| e.to_string())?;
        let diff = mle.alpha.iter().zip(&deb.alpha).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        if diff > 1e-6 {
            return Err(format!("debias moved an interior MLE by {diff:e}"));
        }
    }
    Ok(format!("{tested} interior instances reproduced"))
}

fn sigma_annihilates_ones(rng: &mut StreamRng, quick: bool) -> Result<String, String> {
    for _ in 0..count(quick, 200) {
        let k = rng.random_range(2..=8);
        let a = random_topics(rng, 3 * k, k);
        let alpha = simulate::gen_weights(k, 0, rng.random()).expect("valid");
        let cov = estimators::sigma_from_weights(alpha.as_slice(), &a).map_err(|e| e.to_string())?;
        let r = (&cov.sigma * DVector::from_element(k, 1.0)).amax();
        if r > 1e-8 {
            return Err(format!("‖Σ̂1‖∞ = {r:e}"));
        }
    }
    Ok("‖Σ̂1‖∞ ≤ 1e-8".into())
}

fn estimators_deterministic_and_normalized(rng: &mut StreamRng, quick: bool) -> Result<String, String> {
    for _ in 0..count(quick, 100) {
        let k = rng.random_range(2..=6);
        let a = random_topics(rng, 50, k);
        let alpha = random_weights(rng, k);
        let x = random_document(rng, &a, &alpha, 300);
        let fit = || -> crate::Result<_> {
            let mle = estimators::mle_weights(&x, &a, &MleOptions::default())?;
            let deb = estimators::debias(&mle, &x, &a)?;
            let wls = estimators::wls_weights(&x, &a)?;
            Ok((mle, deb, wls))
        };
        let first = fit().map_err(|e| e.to_string())?;
        let second = fit().map_err(|e| e.to_string())?;
        if first != second {
            return Err("estimators are not deterministic".into());
        }
        for est in [&first.0, &first.1, &first.2] {
            let s: f64 = est.alpha.iter().sum();
            if (s - 1.0).abs() > 1e-6 {
                return Err(format!("{:?} sums to {s}", est.method));
            }
        }
        if first.0.alpha.iter().any(|&v| v < 0.0) {
            return Err("MLE left the simplex".into());
        }
    }
    Ok("bitwise repeatable; all estimates sum to one".into())
}

fn sampler_fixture(rng: &mut StreamRng, k: usize) -> (DMatrix<f64>, CostMatrix) {
    let a = random_topics(rng, 60, k);
    let alpha = simulate::gen_weights(k, 0, rng.random()).expect("valid");
    let sigma = estimators::sigma_from_weights(alpha.as_slice(), &a).expect("invertible").sigma;
    (sigma, transport::cost_matrix(&a, &Metric::TotalVariation).expect("valid"))
}

fn sampler_worker_invariance(rng: &mut StreamRng, quick: bool) -> Result<String, String> {
    let (sigma, cost) = sampler_fixture(rng, 5);
    let poly = DualPolytope::new(cost);
    let m = if quick { 200 } else { 1000 };
    let seed: u64 = rng.random();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool")
            .install(|| inference::sample_limit_law(&sigma, &poly, m, seed))
    };
    let one = run(1).map_err(|e| e.to_string())?;
    let four = run(4).map_err(|e| e.to_string())?;
    let same = one.iter().zip(&four).all(|(a, b)| a.to_bits() == b.to_bits());
    if same {
        Ok(format!("{m} samples identical with 1 and 4 workers"))
    } else {
        Err("sample sets differ across worker counts".into())
    }
}

fn samples_nonnegative(rng: &mut StreamRng, quick: bool) -> Result<String, String> {
    for _ in 0..count(quick, 20) {
        let k = rng.random_range(2..=6);
        let (sigma, cost) = sampler_fixture(rng, k);
        // F̂, and a facet slack wide enough to keep f = 0
        let alpha = random_weights(rng, k);
        let beta = random_weights(rng, k);
        let w = wasserstein(&alpha, &beta, &cost);
        let polys = [
            DualPolytope::new(cost.clone()),
            transport::restricted_polytope(&cost, alpha.as_slice(), beta.as_slice(), None, w).map_err(|e| e.to_string())?,
        ];
        for poly in &polys {
            let s = inference::sample_limit_law(&sigma, poly, 200, rng.random()).map_err(|e| e.to_string())?;
            if let Some(v) = s.iter().find(|&&v| v < -1e-12) {
                return Err(format!("negative sample {v:e}"));
            }
        }
    }
    Ok("samples ≥ 0 whenever f = 0 is feasible".into())
}

fn quantiles_and_nesting(rng: &mut StreamRng, quick: bool) -> Result<String, String> {
    for _ in 0..count(quick, 20) {
        let k = rng.random_range(2..=6);
        let (sigma, cost) = sampler_fixture(rng, k);
        let seed = rng.random();
        let set = LimitSampleSet::new(inference::sample_limit_law(&sigma, &DualPolytope::new(cost), 1000, seed).map_err(|e| e.to_string())?, None, seed);
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        if grid.windows(2).any(|g| set.quantile(g[0]) > set.quantile(g[1])) {
            return Err("quantile not monotone".into());
        }
        let w: f64 = rng.random();
        let wide = inference::confidence_interval(w, set.sorted(), 0.05, 500, 700).map_err(|e| e.to_string())?;
        let narrow = inference::confidence_interval(w, set.sorted(), 0.5, 500, 700).map_err(|e| e.to_string())?;
        if wide.width() < 0.0 || narrow.width() < 0.0 {
            return Err("negative width".into());
        }
        if narrow.lower < wide.lower || narrow.upper > wide.upper {
            return Err("level-0.5 interval not inside level-0.05 interval".into());
        }
    }
    Ok("monotone quantiles, non-negative widths, nested intervals".into())
}

fn inactive_facet_matches_unrestricted(rng: &mut StreamRng, quick: bool) -> Result<String, String> {
    for _ in 0..count(quick, 20) {
        let k = rng.random_range(2..=6);
        let (sigma, cost) = sampler_fixture(rng, k);
        let (alpha, beta) = (random_weights(rng, k), random_weights(rng, k));
        let wide = transport::restricted_polytope(&cost, alpha.as_slice(), beta.as_slice(), None, 2.0 * cost.max_entry())
            .map_err(|e| e.to_string())?;
        let seed = rng.random();
        let a = inference::sample_limit_law(&sigma, &DualPolytope::new(cost), 200, seed).map_err(|e| e.to_string())?;
        let b = inference::sample_limit_law(&sigma, &wide, 200, seed).map_err(|e| e.to_string())?;
        let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        if diff > 1e-9 {
            return Err(format!("inactive facet changed samples by {diff:e}"));
        }
    }
    Ok("δ ≥ 2·max cost reproduces the F̂ samples".into())
}

fn small_config(rng: &mut StreamRng, quick: bool) -> SimConfig {
    SimConfig {
        k: 4,
        p: 60,
        n: 500,
        n_reps: if quick { 5 } else { 20 },
        m: 400,
        delta: None,
        seed: rng.random(),
        ..SimConfig::default()
    }
}

fn report_determinism(rng: &mut StreamRng, quick: bool) -> Result<String, String> {
    let cfg = small_config(rng, quick);
    let a = simulate::run_ci_experiment(&cfg).map_err(|e| e.to_string())?;
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .expect("thread pool")
        .install(|| simulate::run_ci_experiment(&cfg))
        .map_err(|e| e.to_string())?;
    if a.canonical_bytes() == b.canonical_bytes() {
        Ok("identical report bytes across runs and worker counts".into())
    } else {
        Err("reports differ".into())
    }
}

fn coverage_in_binomial_band(rng: &mut StreamRng, quick: bool) -> Result<String, String> {
    let reps = if quick { 100 } else { 200 };
    let cfg = SimConfig {
        n: 1000,
        n_reps: reps,
        m: 1000,
        delta: None,
        seed: rng.random(),
        ..SimConfig::default()
    };
    let rep = simulate::run_ci_experiment(&cfg).map_err(|e| e.to_string())?;
    let s = rep.summary("plugin").ok_or("no plug-in summary")?;
    let n = s.replicates as u64;
    let binom = Binomial::new(0.95, n).map_err(|e| e.to_string())?;
    let lo = binom.inverse_cdf(0.005) as f64 / n as f64;
    let hi = binom.inverse_cdf(0.995) as f64 / n as f64;
    if s.coverage >= lo && s.coverage <= hi {
        Ok(format!("coverage {:.3} in [{lo:.3}, {hi:.3}]", s.coverage))
    } else {
        Err(format!("coverage {:.3} outside [{lo:.3}, {hi:.3}]", s.coverage))
    }
}

fn length_decreases_with_n(rng: &mut StreamRng, quick: bool) -> Result<String, String> {
    let seed = rng.random();
    let mut lengths = vec![];
    for n in [100u64, 500, 1000, 3000] {
        let cfg = SimConfig {
            n,
            n_reps: if quick { 20 } else { 50 },
            m: 500,
            delta: None,
            seed,
            ..SimConfig::default()
        };
        let rep = simulate::run_ci_experiment(&cfg).map_err(|e| e.to_string())?;
        lengths.push(rep.summary("plugin").ok_or("no plug-in summary")?.mean_length);
    }
    if lengths.windows(2).all(|w| w[1] < w[0]) {
        Ok(format!("mean lengths {lengths:.3?}"))
    } else {
        Err(format!("mean lengths not decreasing: {lengths:.3?}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        let out = run(SelftestOptions { seed: 5, quick: true });
        let failed: Vec<_> = out.iter().filter(|o| !o.passed).collect();
        assert!(failed.is_empty(), "{failed:#?}");
    }
}
