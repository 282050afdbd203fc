use mixwass_core::CostMatrix;
use nalgebra::{DMatrix, DVector};

/// Min cost over all basic feasible solutions of the K x K transportation problem.
pub fn transport_by_vertices(a: &[f64], b: &[f64], c: &CostMatrix) -> f64 {
    let k = a.len();
    let n = k * k;
    // row sums, then column sums minus the last (redundant)
    let m = 2 * k - 1;
    let mut eq = DMatrix::zeros(m, n);
    let mut rhs = DVector::zeros(m);
    for i in 0..k {
        for j in 0..k {
            eq[(i, i * k + j)] = 1.0;
            if j < k - 1 {
                eq[(k + j, i * k + j)] = 1.0;
            }
        }
        rhs[i] = a[i];
    }
    for j in 0..k - 1 {
        rhs[k + j] = b[j];
    }
    let mut best = f64::INFINITY;
    for basis in subsets(n, m) {
        let sub = DMatrix::from_fn(m, m, |r, cidx| eq[(r, basis[cidx])]);
        let Some(x) = sub.clone().lu().solve(&rhs) else { continue };
        if (&sub * &x - &rhs).amax() > 1e-9 || x.iter().any(|&v| v < -1e-12) {
            continue;
        }
        let cost: f64 = basis.iter().zip(x.iter()).map(|(&v, &xv)| c.get(v / k, v % k) * xv).sum();
        best = best.min(cost);
    }
    best
}

fn subsets(n: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    let mut cur = vec![];
    fn rec(start: usize, n: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            cur.push(v);
            rec(v + 1, n, m, cur, out);
            cur.pop();
        }
    }
    rec(0, n, m, &mut cur, &mut out);
    out
}
