use mixwass_core::estimators::{self, CountVector, MleOptions};
use mixwass_core::inference;
use mixwass_core::numlin;
use mixwass_core::simulate::{self, SimConfig};
use mixwass_core::transport;
use mixwass_core::{CostMatrix, DualPolytope, Error, Metric, ProbVec};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn simplex(k: usize) -> impl Strategy<Value = ProbVec> {
    (prop::collection::vec(0.0f64..1.0, k), prop::collection::vec(any::<bool>(), k)).prop_map(|(w, keep)| {
        let mut w: Vec<f64> = w.iter().zip(&keep).map(|(v, k)| if *k { *v } else { 0.0 }).collect();
        if w.iter().sum::<f64>() <= 1e-9 {
            w[0] = 1.0;
        }
        ProbVec::from_weights(&w).unwrap()
    })
}

fn instance() -> impl Strategy<Value = (CostMatrix, ProbVec, ProbVec)> {
    (2usize..=8, any::<u64>()).prop_flat_map(|(k, seed)| {
        let a = simulate::gen_topic_matrix(k + 3, k, seed).unwrap();
        let c = transport::cost_matrix(&a, &Metric::TotalVariation).unwrap();
        (Just(c), simplex(k), simplex(k))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn wasserstein_is_a_bounded_symmetric_distance((c, a, b) in instance()) {
        let ab = transport::wasserstein_primal(&a, &b, &c).unwrap().value;
        let ba = transport::wasserstein_primal(&b, &a, &c).unwrap().value;
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() < 1e-10);
        prop_assert!(ab <= c.max_entry() * transport::tv_distance(&a, &b).unwrap() + 1e-10);
    }

    #[test]
    fn primal_and_dual_agree((c, a, b) in instance()) {
        let plan = transport::wasserstein_primal(&a, &b, &c).unwrap();
        let u: Vec<f64> = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x - y).collect();
        let dual = transport::kr_dual_value(&u, &DualPolytope::new(c.clone())).unwrap();
        prop_assert!((plan.value - dual.value).abs() <= 1e-8 * plan.value.max(1.0));
        prop_assert!(DualPolytope::new(c).contains(&dual.argmax, 1e-9));
        // the plan is a coupling
        let k = a.dim();
        for i in 0..k {
            let row: f64 = (0..k).map(|j| plan.plan[(i, j)]).sum();
            let col: f64 = (0..k).map(|j| plan.plan[(j, i)]).sum();
            prop_assert!((row - a.as_slice()[i]).abs() < 1e-12);
            prop_assert!((col - b.as_slice()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn pseudo_inverse_satisfies_penrose(k in 1usize..8, entries in prop::collection::vec(-1.0f64..1.0, 64), rank in 0usize..8) {
        let rank = rank.min(k);
        let b = DMatrix::from_fn(k, rank, |i, j| entries[i * 8 + j]);
        let m = &b * b.transpose();
        let p = numlin::pinv(&m).unwrap();
        let scale = 1.0 + m.norm() + p.norm();
        prop_assert!((&m * &p * &m - &m).norm() < 1e-8 * scale);
        prop_assert!((&p * &m * &p - &p).norm() < 1e-8 * scale);
        prop_assert!((&m * &p - (&m * &p).transpose()).norm() < 1e-8 * scale);
    }

    #[test]
    fn mle_is_a_kkt_point_on_the_simplex(seed in any::<u64>(), k in 2usize..6, n in 1u64..2000) {
        let a = simulate::gen_topic_matrix(40, k, seed).unwrap();
        let alpha = simulate::gen_weights(k, 0, seed ^ 1).unwrap();
        let counts = simulate::gen_document(&ProbVec::from_weights(&a.mix(alpha.as_slice())).unwrap(), n, seed ^ 2).unwrap();
        let x = counts.frequencies();
        let est = estimators::mle_weights(&x, &a, &MleOptions::default()).unwrap();
        prop_assert!(est.converged);
        prop_assert!(est.alpha.iter().all(|&v| v >= 0.0));
        prop_assert!((est.alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(estimators::kkt_residual(&x, &a, &est.alpha).unwrap() <= estimators::KKT_TOL);
        let deb = estimators::debias(&est, &x, &a).unwrap();
        prop_assert!((deb.alpha.iter().sum::<f64>() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn intervals_nest_and_contain_the_point(samples in prop::collection::vec(0.0f64..3.0, 40..200), w in 0.0f64..1.0, ni in 1u64..5000, nj in 1u64..5000) {
        let set = inference::LimitSampleSet::new(samples, None, 0);
        let wide = inference::confidence_interval(w, set.sorted(), 0.5, ni, nj);
        // M ≥ 20/level must hold; 0.5 needs only 40 draws
        let wide = wide.unwrap();
        prop_assert!(wide.lower <= wide.upper);
        if set.len() >= 400 {
            let narrow = inference::confidence_interval(w, set.sorted(), 0.05, ni, nj).unwrap();
            prop_assert!(narrow.lower <= wide.lower && wide.upper <= narrow.upper);
        } else {
            prop_assert!(inference::confidence_interval(w, set.sorted(), 0.05, ni, nj).is_err());
        }
        for g in [0.0, 0.1, 0.5, 0.9, 1.0] {
            prop_assert!(set.quantile(g) <= set.quantile((g + 0.05f64).min(1.0)));
        }
    }

    #[test]
    fn ks_distance_is_symmetric_and_bounded(a in prop::collection::vec(-5.0f64..5.0, 1..60), b in prop::collection::vec(-5.0f64..5.0, 1..60)) {
        let d = inference::ks_distance(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, inference::ks_distance(&b, &a).unwrap());
        let p = inference::ks_two_sample_pvalue(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(matches!(ProbVec::new(vec![0.5, 0.6]), Err(Error::InvalidSimplex(_))));
    assert!(matches!(ProbVec::new(vec![1.2, -0.2]), Err(Error::InvalidSimplex(_))));
    assert!(CountVector::new(vec![0, 0]).is_err());
    let bad = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    assert!(CostMatrix::from_table(bad).is_err());
    let c = CostMatrix::from_table(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
    let three = ProbVec::uniform(3);
    assert!(matches!(
        transport::wasserstein_primal(&three, &three, &c),
        Err(Error::DimError { .. })
    ));
    assert!(SimConfig { k: 0, ..SimConfig::default() }.validate().is_err());
    assert!(SimConfig { level: 1.5, ..SimConfig::default() }.validate().is_err());
    assert!(SimConfig { m: 10, ..SimConfig::default() }.validate().is_err());
}
