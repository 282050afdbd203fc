//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines are always printed.
//! Takes several minutes on one core; the alternative-hypothesis bootstrap
//! dominates.

use std::time::Instant;

use mixwass_core::estimators::{self, MleOptions};
use mixwass_core::rng::{self, StreamRng};
use mixwass_core::selftest::{self, SelftestOptions};
use mixwass_core::simulate::{self, CiMethod, EstimatorKind, Scenario, SimConfig};
use mixwass_core::transport;
use mixwass_core::{DualPolytope, Metric, ProbVec, TopicMatrix};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

mod common;

type Outcome = Result<String, String>;

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("duality suite", duality),
        ("brute-force K=3 oracle", brute_force),
        ("classical-regime identity", classical_regime),
        ("covariance null space", covariance_null_space),
        ("normality of debiased weights", normality),
        ("null CI coverage and length", null_ci),
        ("alternative CI ordering", alternative_ci),
        ("MLE vs WLS interval length", mle_vs_wls),
        ("KS convergence to the limit law", ks_convergence),
        ("property suite", property_suite),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = run();
        let secs = started.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag}  {name}: {detail} [{secs:.1}s]", i + 1);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn stream(tag: u64) -> StreamRng {
    rng::stream(20_240_601, &[tag])
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok { Ok(detail) } else { Err(detail) }
}

fn random_weights(r: &mut StreamRng, k: usize) -> ProbVec {
    let tau = if r.random_bool(0.3) { r.random_range(1..=k) } else { 0 };
    simulate::gen_weights(k, tau, r.random()).unwrap()
}

fn duality() -> Outcome {
    let started = Instant::now();
    let mut r = stream(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let k = r.random_range(2..=10);
        let a = simulate::gen_topic_matrix(k + 5, k, r.random()).unwrap();
        let c = transport::cost_matrix(&a, &Metric::TotalVariation).unwrap();
        let (x, y) = (random_weights(&mut r, k), random_weights(&mut r, k));
        let primal = transport::wasserstein_primal(&x, &y, &c).map_err(|e| e.to_string())?.value;
        let u: Vec<f64> = x.as_slice().iter().zip(y.as_slice()).map(|(p, q)| p - q).collect();
        let dual = transport::kr_dual_value(&u, &DualPolytope::new(c)).map_err(|e| e.to_string())?.value;
        worst = worst.max((primal - dual).abs() / primal.max(1.0));
    }
    let secs = started.elapsed().as_secs_f64();
    check(worst <= 1e-8 && secs < 30.0, format!("1000 instances, worst scaled gap {worst:.1e} (≤ 1e-8), {secs:.2}s (< 30s)"))
}

fn brute_force() -> Outcome {
    let mut r = stream(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a = simulate::gen_topic_matrix(6, 3, r.random()).unwrap();
        let c = transport::cost_matrix(&a, &Metric::TotalVariation).unwrap();
        let (x, y) = (random_weights(&mut r, 3), random_weights(&mut r, 3));
        let got = transport::wasserstein_primal(&x, &y, &c).map_err(|e| e.to_string())?.value;
        worst = worst.max((got - common::transport_by_vertices(x.as_slice(), y.as_slice(), &c)).abs());
    }
    check(worst <= 1e-9, format!("100 instances, worst |primal - enumeration| {worst:.1e} (≤ 1e-9)"))
}

fn classical_regime() -> Outcome {
    let mut r = stream(3);
    let (mut worst_debias, mut worst_mle): (f64, f64) = (0.0, 0.0);
    for _ in 0..200 {
        let k = r.random_range(2..=10);
        let a = simulate::gen_topic_matrix(2 * k, k, r.random()).unwrap();
        let alpha = simulate::gen_weights(k, 0, r.random()).unwrap();
        let x = ProbVec::from_weights(&a.mix(alpha.as_slice())).unwrap();
        let mle = estimators::mle_weights(&x, &a, &MleOptions::default()).map_err(|e| e.to_string())?;
        let deb = estimators::debias(&mle, &x, &a).map_err(|e| e.to_string())?;
        let sup = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst_debias = worst_debias.max(sup(&deb.alpha, &mle.alpha));
        worst_mle = worst_mle.max(sup(&mle.alpha, alpha.as_slice()));
    }
    check(
        worst_debias <= 1e-6 && worst_mle <= 1e-4,
        format!("200 instances, max |α̃ - α̂| {worst_debias:.1e} (≤ 1e-6), max |α̂ - α| {worst_mle:.1e} (≤ 1e-4)"),
    )
}

fn covariance_null_space() -> Outcome {
    let mut r = stream(4);
    let mut worst_null: f64 = 0.0;
    for _ in 0..200 {
        let k = r.random_range(2..=10);
        let a = simulate::gen_topic_matrix(r.random_range(k..=5 * k), k, r.random()).unwrap();
        let alpha = simulate::gen_weights(k, 0, r.random()).unwrap();
        let sigma = estimators::sigma_from_weights(alpha.as_slice(), &a).map_err(|e| e.to_string())?.sigma;
        worst_null = worst_null.max((&sigma * DVector::from_element(k, 1.0)).amax());
    }
    let mut worst_identity: f64 = 0.0;
    for k in 2..=10 {
        let a = TopicMatrix::new(DMatrix::identity(k, k)).unwrap();
        let alpha = simulate::gen_weights(k, 0, r.random()).unwrap();
        let sigma = estimators::sigma_from_weights(alpha.as_slice(), &a).map_err(|e| e.to_string())?.sigma;
        let av = alpha.to_dvector();
        worst_identity = worst_identity.max((sigma - (DMatrix::from_diagonal(&av) - &av * av.transpose())).amax());
    }
    check(
        worst_null <= 1e-8 && worst_identity <= 1e-8,
        format!("max ‖Σ̂1‖∞ {worst_null:.1e}, identity-A error {worst_identity:.1e} (both ≤ 1e-8)"),
    )
}

fn normality() -> Outcome {
    let started = Instant::now();
    let cfg = SimConfig { k: 5, p: 1000, tau: 3, n: 500, n_reps: 500, seed: 1, ..SimConfig::default() };
    let rep = simulate::run_normality_experiment(&cfg).map_err(|e| e.to_string())?;
    let alpha = &rep.true_weights[0];
    let mut min_active: f64 = 1.0;
    let mut max_boundary: f64 = 0.0;
    for (c, &w) in alpha.iter().enumerate() {
        if w > 0.0 {
            let rec = rep.ks_record(&format!("mle_debiased[{c}]")).ok_or("missing debiased record")?;
            min_active = min_active.min(rec.p_value);
        } else {
            let rec = rep.ks_record(&format!("mle[{c}]")).ok_or("missing MLE record")?;
            max_boundary = max_boundary.max(rec.p_value);
        }
    }
    let secs = started.elapsed().as_secs_f64();
    check(
        min_active > 0.01 && max_boundary < 0.01 && secs < 300.0,
        format!("active debiased min p = {min_active:.3} (> 0.01), boundary MLE max p = {max_boundary:.1e} (< 0.01)"),
    )
}

fn null_config() -> SimConfig {
    SimConfig { k: 5, p: 500, n: 1000, n_reps: 200, m: 1000, delta: None, seed: 1, ..SimConfig::default() }
}

fn null_ci() -> Outcome {
    let started = Instant::now();
    let full = simulate::run_ci_experiment(&null_config()).map_err(|e| e.to_string())?;
    let full_secs = started.elapsed().as_secs_f64();
    let s = full.summary(CiMethod::Plugin.label()).ok_or("no plug-in summary")?;
    let started = Instant::now();
    let quick = simulate::run_ci_experiment(&null_config().quick()).map_err(|e| e.to_string())?;
    let quick_secs = started.elapsed().as_secs_f64();
    let q = quick.summary(CiMethod::Plugin.label()).ok_or("no plug-in summary")?;
    let ok = (0.90..=0.985).contains(&s.coverage)
        && (s.mean_length - 0.063).abs() <= 0.2 * 0.063
        && full_secs < 900.0
        && (0.88..=0.99).contains(&q.coverage)
        && quick_secs < 240.0;
    check(
        ok,
        format!(
            "coverage {:.3} in [0.90, 0.985], length {:.4} in [0.0504, 0.0756]; quick coverage {:.3} in [0.88, 0.99] ({quick_secs:.1}s)",
            s.coverage, s.mean_length, q.coverage
        ),
    )
}

fn alternative_ci() -> Outcome {
    let cfg = SimConfig {
        scenario: Scenario::Alternative,
        n: 1000,
        n_outer: 10,
        n_reps: 200,
        m: 500,
        b: 500,
        delta: Some(0.0),
        methods: vec![CiMethod::Plugin, CiMethod::MOfNBs],
        estimators: vec![EstimatorKind::MleDebiased],
        seed: 1,
        ..SimConfig::default()
    };
    let rep = simulate::run_ci_experiment(&cfg).map_err(|e| e.to_string())?;
    let plugin = rep.summary(CiMethod::Plugin.label()).ok_or("no plug-in summary")?;
    let boot = rep.summary(CiMethod::MOfNBs.label()).ok_or("no m-of-N summary")?;
    check(
        (0.90..=0.985).contains(&plugin.coverage) && boot.coverage < 0.85,
        format!("plug-in coverage {:.3} in [0.90, 0.985], m-of-N coverage {:.3} (< 0.85)", plugin.coverage, boot.coverage),
    )
}

fn mle_vs_wls() -> Outcome {
    let cfg = SimConfig { k: 5, p: 500, n: 500, n_outer: 1000, n_reps: 10, m: 2000, delta: None, seed: 1, ..SimConfig::default() };
    let rep = simulate::run_mle_vs_wls_experiment(&cfg).map_err(|e| e.to_string())?;
    let mle = rep.summary(EstimatorKind::MleDebiased.label()).ok_or("no MLE summary")?;
    let wls = rep.summary(EstimatorKind::Wls.label()).ok_or("no WLS summary")?;
    let d = rep.paired.first().ok_or("no paired summary")?;
    check(
        d.n >= 1000 && mle.mean_length <= wls.mean_length && d.mean - 2.0 * d.stderr >= 0.0,
        format!(
            "mean length {:.4} vs {:.4}; paired difference {:.5} ± {:.5} over {} draws (≥ 0 at 2σ)",
            mle.mean_length, wls.mean_length, d.mean, d.stderr, d.n
        ),
    )
}

fn ks_convergence() -> Outcome {
    let started = Instant::now();
    let cfg = SimConfig { k: 10, p: 300, n: 1000, n_outer: 10, draws: 2000, seed: 1, ..SimConfig::default() };
    let rep = simulate::run_convergence_experiment(&cfg).map_err(|e| e.to_string())?;
    let avg = rep.ks_record("average").ok_or("no averaged KS record")?;
    let secs = started.elapsed().as_secs_f64();
    check(
        avg.distance <= 0.04 && secs < 600.0,
        format!("KS distance averaged over 10 mixtures {:.4} (≤ 0.04), mean p-value {:.3}", avg.distance, avg.p_value),
    )
}

fn property_suite() -> Outcome {
    let out = selftest::run(SelftestOptions::default());
    let failed: Vec<String> = out.iter().filter(|o| !o.passed).map(|o| format!("{}::{} ({})", o.module, o.name, o.detail)).collect();
    check(
        failed.is_empty(),
        if failed.is_empty() { format!("{} properties passed", out.len()) } else { failed.join("; ") },
    )
}
