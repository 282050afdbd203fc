//! Shared fixtures for the benchmarks.

use mixwass_core::estimators::CountVector;
use mixwass_core::simulate::{gen_document, gen_topic_matrix, gen_weights};
use mixwass_core::transport::cost_matrix;
use mixwass_core::{CostMatrix, Metric, ProbVec, TopicMatrix};

pub struct Pair {
    pub a: TopicMatrix,
    pub cost: CostMatrix,
    pub alpha: ProbVec,
    pub beta: ProbVec,
    pub docs: [CountVector; 2],
}

/// Two documents of length `n` over a random `p x k` topic matrix.
pub fn pair(p: usize, k: usize, n: u64, seed: u64) -> Pair {
    let a = gen_topic_matrix(p, k, seed).unwrap();
    let cost = cost_matrix(&a, &Metric::TotalVariation).unwrap();
    let alpha = gen_weights(k, 0, seed + 1).unwrap();
    let beta = gen_weights(k, 0, seed + 2).unwrap();
    let doc = |w: &ProbVec, s| gen_document(&ProbVec::from_weights(&a.mix(w.as_slice())).unwrap(), n, s).unwrap();
    let docs = [doc(&alpha, seed + 3), doc(&beta, seed + 4)];
    Pair { a, cost, alpha, beta, docs }
}
