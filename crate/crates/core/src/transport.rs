//! Metrics on the probability simplex, cost matrices between mixture
//! components, the exact Wasserstein distance between K-atom mixing measures,
//! and support functions of the Kantorovich-Rubinstein dual polytope.
//!
//! Two independent routes compute the same distance: [`wasserstein_primal`]
//! runs a transportation simplex on couplings, [`kr_dual_value`] maximizes over
//! the Lipschitz polytope `{f : f_k - f_l ≤ c_kl, f_0 = 0}` with the dense LP
//! solver. Strong duality between the two is checked by the test suites.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram};

/// Tolerance on `Σ v = 1` for a point of the simplex.
pub const SIMPLEX_TOL: f64 = 1e-8;

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbVec(Vec<f64>);

impl ProbVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSimplex("empty vector".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidSimplex(format!("entry {v} is negative or not finite")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidSimplex(format!("entries sum to {sum}")));
        }
        Ok(ProbVec(values))
    }

    /// Normalizes non-negative weights to unit mass.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidSimplex("weights must be non-negative with positive sum".into()));
        }
        ProbVec::new(weights.iter().map(|w| w / sum).collect())
    }

    /// Standard basis vector `e_k` of `Δ_dim`.
    pub fn vertex(dim: usize, k: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[k] = 1.0;
        ProbVec(v)
    }

    pub fn uniform(dim: usize) -> Self {
        ProbVec(vec![1.0 / dim as f64; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// `p x K` matrix whose columns are the mixture components `A_k ∈ Δ_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicMatrix {
    cols: DMatrix<f64>,
    // row-major copy for the per-word loops of the estimators
    rows: Vec<f64>,
}

impl TopicMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let (p, k) = matrix.shape();
        if p == 0 || k == 0 {
            return Err(Error::InvalidSimplex("topic matrix has no entries".into()));
        }
        for (idx, col) in matrix.column_iter().enumerate() {
            ProbVec::new(col.iter().copied().collect())
                .map_err(|e| Error::InvalidSimplex(format!("column {idx}: {e}")))?;
        }
        let mut rows = Vec::with_capacity(p * k);
        for j in 0..p {
            rows.extend(matrix.row(j).iter());
        }
        Ok(TopicMatrix { cols: matrix, rows })
    }

    pub fn from_columns(columns: &[ProbVec]) -> Result<Self> {
        let k = columns.len();
        let p = columns.first().map_or(0, ProbVec::dim);
        if let Some(bad) = columns.iter().find(|c| c.dim() != p) {
            return Err(Error::DimError {
                expected: p,
                got: bad.dim(),
            });
        }
        TopicMatrix::new(DMatrix::from_fn(p, k, |j, c| columns[c].as_slice()[j]))
    }

    /// Dictionary size.
    pub fn p(&self) -> usize {
        self.cols.nrows()
    }

    /// Number of topics.
    pub fn k(&self) -> usize {
        self.cols.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.cols
    }

    /// Row `A_{j·}` (topic loadings of word `j`).
    #[inline]
    pub fn row(&self, j: usize) -> &[f64] {
        let k = self.k();
        &self.rows[j * k..(j + 1) * k]
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.cols.column(k).iter().copied().collect()
    }

    /// Mixture `r = A α`.
    pub fn mix(&self, alpha: &[f64]) -> Vec<f64> {
        (0..self.p())
            .map(|j| self.row(j).iter().zip(alpha).map(|(a, w)| a * w).sum())
            .collect()
    }
}

/// Base metric on `Δ_p` used to build a cost matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `‖u - v‖₁ / 2`
    TotalVariation,
    /// `‖u - v‖₂`
    Euclidean,
    /// User supplied K x K table of component distances.
    Table(Vec<Vec<f64>>),
}

impl Default for Metric {
    fn default() -> Self {
        Metric::TotalVariation
    }
}

/// Symmetric, zero-diagonal, non-negative K x K matrix of component distances.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix(DMatrix<f64>);

impl CostMatrix {
    pub fn from_table(entries: DMatrix<f64>) -> Result<Self> {
        let k = entries.nrows();
        if entries.ncols() != k {
            return Err(Error::InvalidCost(format!("{}x{} table is not square", k, entries.ncols())));
        }
        for r in 0..k {
            if entries[(r, r)] != 0.0 {
                return Err(Error::InvalidCost(format!("nonzero diagonal at {r}")));
            }
            for c in 0..k {
                let v = entries[(r, c)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidCost(format!("entry ({r},{c}) = {v}")));
                }
                if (v - entries[(c, r)]).abs() > 1e-12 * (1.0 + v.abs()) {
                    return Err(Error::InvalidCost(format!("asymmetric at ({r},{c})")));
                }
            }
        }
        Ok(CostMatrix(entries))
    }

    pub fn k(&self) -> usize {
        self.0.nrows()
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.0[(k, l)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn max_entry(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    /// Largest violation of `c_kl ≤ c_km + c_ml` (zero for a metric).
    pub fn triangle_violation(&self) -> f64 {
        let k = self.k();
        let mut worst = 0.0_f64;
        for a in 0..k {
            for b in 0..k {
                for m in 0..k {
                    worst = worst.max(self.get(a, b) - self.get(a, m) - self.get(m, b));
                }
            }
        }
        worst
    }
}

fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimError { expected, got });
    }
    Ok(())
}

pub fn tv_distance(u: &ProbVec, v: &ProbVec) -> Result<f64> {
    check_dims(u.dim(), v.dim())?;
    let l1: f64 = u.as_slice().iter().zip(v.as_slice()).map(|(a, b)| (a - b).abs()).sum();
    Ok((0.5 * l1).min(1.0))
}

fn l2_distance(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Pairwise distances between the columns of `a` under `metric`.
pub fn cost_matrix(a: &TopicMatrix, metric: &Metric) -> Result<CostMatrix> {
    let k = a.k();
    if let Metric::Table(rows) = metric {
        check_dims(k, rows.len())?;
        if let Some(bad) = rows.iter().find(|r| r.len() != k) {
            return Err(Error::InvalidCost(format!("row of length {} in a {k}x{k} table", bad.len())));
        }
        return CostMatrix::from_table(DMatrix::from_fn(k, k, |r, c| rows[r][c]));
    }
    let cols: Vec<Vec<f64>> = (0..k).map(|c| a.column(c)).collect();
    let mut m = DMatrix::zeros(k, k);
    for r in 0..k {
        for c in (r + 1)..k {
            let d = match metric {
                Metric::TotalVariation => {
                    0.5 * cols[r].iter().zip(&cols[c]).map(|(x, y)| (x - y).abs()).sum::<f64>()
                }
                Metric::Euclidean => l2_distance(&cols[r], &cols[c]),
                Metric::Table(_) => unreachable!(),
            };
            m[(r, c)] = d;
            m[(c, r)] = d;
        }
    }
    CostMatrix::from_table(m)
}

/// Optimal coupling and its cost.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub value: f64,
    pub plan: DMatrix<f64>,
}

/// Exact `W(α, β; d) = min_{γ ∈ Γ(α, β)} Σ γ_kl c_kl` via the transportation
/// simplex (MODI potentials with north-west corner start).
pub fn wasserstein_primal(alpha: &ProbVec, beta: &ProbVec, cost: &CostMatrix) -> Result<TransportPlan> {
    let k = cost.k();
    check_dims(k, alpha.dim())?;
    check_dims(k, beta.dim())?;
    let plan = transportation_simplex(alpha.as_slice(), beta.as_slice(), cost.matrix())?;
    let value = plan.iter().zip(cost.matrix().iter()).map(|(g, c)| g * c).sum();
    Ok(TransportPlan { value, plan })
}

fn transportation_simplex(supply: &[f64], demand: &[f64], cost: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = supply.len();
    let n = demand.len();
    let total_s: f64 = supply.iter().sum();
    let total_d: f64 = demand.iter().sum();
    let mut rs = supply.to_vec();
    let mut rd: Vec<f64> = demand.iter().map(|d| d * total_s / total_d).collect();

    // north-west corner: exactly m + n - 1 basic cells forming a spanning tree
    let mut basis: Vec<(usize, usize)> = Vec::with_capacity(m + n - 1);
    let mut flow = DMatrix::<f64>::zeros(m, n);
    let (mut i, mut j) = (0, 0);
    loop {
        let x = rs[i].min(rd[j]);
        flow[(i, j)] = x;
        basis.push((i, j));
        rs[i] -= x;
        rd[j] -= x;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if i == m - 1 {
            j += 1;
        } else if j == n - 1 || rs[i] <= rd[j] {
            i += 1;
        } else {
            j += 1;
        }
    }

    let scale = cost.iter().copied().fold(1.0_f64, |a, b| a.max(b.abs()));
    let eps = 1e-12 * scale;
    let mut in_basis = DMatrix::from_element(m, n, false);
    for &(r, c) in &basis {
        in_basis[(r, c)] = true;
    }
    let limit = 100 * (m + n) * (m + n) + 1000;
    let mut degenerate_run = 0usize;
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];

    for _ in 0..limit {
        // potentials u_i + v_j = c_ij on the tree, rooted at row 0
        let adj = tree_adjacency(&basis, m, n);
        let mut seen = vec![false; m + n];
        let mut stack = vec![0usize];
        seen[0] = true;
        u[0] = 0.0;
        while let Some(node) = stack.pop() {
            for &(other, cell) in &adj[node] {
                if seen[other] {
                    continue;
                }
                let (r, c) = basis[cell];
                if node < m {
                    v[c] = cost[(r, c)] - u[r];
                } else {
                    u[r] = cost[(r, c)] - v[c];
                }
                seen[other] = true;
                stack.push(other);
            }
        }

        let bland = degenerate_run >= 2 * (m + n);
        let mut entering = None;
        let mut best = -eps;
        'scan: for r in 0..m {
            for c in 0..n {
                if in_basis[(r, c)] {
                    continue;
                }
                let red = cost[(r, c)] - u[r] - v[c];
                if red < best {
                    entering = Some((r, c));
                    if bland {
                        break 'scan;
                    }
                    best = red;
                }
            }
        }
        let Some((er, ec)) = entering else {
            flow.iter_mut().for_each(|x| *x = x.max(0.0));
            return Ok(flow);
        };

        // cycle: entering cell plus the tree path from row `er` to column `ec`
        let path = tree_path(&adj, er, m + ec, m + n);
        let mut theta = f64::INFINITY;
        let mut leave_pos = usize::MAX;
        for (pos, &cell) in path.iter().enumerate().step_by(2) {
            let (r, c) = basis[cell];
            let f = flow[(r, c)];
            let take = leave_pos == usize::MAX
                || f < theta - 1e-15
                || (f <= theta + 1e-15 && (r, c) < basis[path[leave_pos]]);
            if take {
                theta = theta.min(f);
                leave_pos = pos;
            }
        }
        let theta = theta.max(0.0);
        if theta <= 1e-15 {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
        flow[(er, ec)] += theta;
        for (pos, &cell) in path.iter().enumerate() {
            let (r, c) = basis[cell];
            if pos % 2 == 0 {
                flow[(r, c)] -= theta;
            } else {
                flow[(r, c)] += theta;
            }
        }
        let leave_cell = path[leave_pos];
        let (lr, lc) = basis[leave_cell];
        flow[(lr, lc)] = 0.0;
        in_basis[(lr, lc)] = false;
        in_basis[(er, ec)] = true;
        basis[leave_cell] = (er, ec);
    }
    Err(Error::IterationLimit(limit))
}

/// Adjacency of the basis tree; nodes are rows `0..m` then columns `m..m+n`.
fn tree_adjacency(basis: &[(usize, usize)], m: usize, n: usize) -> Vec<Vec<(usize, usize)>> {
    let mut adj = vec![Vec::with_capacity(2); m + n];
    for (idx, &(r, c)) in basis.iter().enumerate() {
        adj[r].push((m + c, idx));
        adj[m + c].push((r, idx));
    }
    adj
}

/// Basis cells along the unique tree path from `from` to `to`, starting at `from`.
fn tree_path(
    adj: &[Vec<(usize, usize)>],
    from: usize,
    to: usize,
    nodes: usize,
) -> Vec<usize> {
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; nodes];
    let mut seen = vec![false; nodes];
    let mut queue = std::collections::VecDeque::from([from]);
    seen[from] = true;
    while let Some(node) = queue.pop_front() {
        if node == to {
            break;
        }
        for &(other, cell) in &adj[node] {
            if !seen[other] {
                seen[other] = true;
                parent[other] = Some((node, cell));
                queue.push_back(other);
            }
        }
    }
    let mut cells = Vec::new();
    let mut node = to;
    while let Some((prev, cell)) = parent[node] {
        cells.push(cell);
        node = prev;
    }
    cells.reverse();
    cells
}

/// Optional facet constraint `|fᵀu₀ - W| ≤ δ` restricting the dual polytope to
/// (a neighbourhood of) the optimal face for direction `u₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub direction: Vec<f64>,
    pub target: f64,
    pub slack: f64,
}

/// `F = {f ∈ ℝ^K : f_k - f_l ≤ c_kl, f_0 = 0}`, optionally intersected with a facet constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPolytope {
    cost: CostMatrix,
    facet: Option<Facet>,
}

impl DualPolytope {
    pub fn new(cost: CostMatrix) -> Self {
        DualPolytope { cost, facet: None }
    }

    pub fn with_facet(cost: CostMatrix, facet: Facet) -> Result<Self> {
        check_dims(cost.k(), facet.direction.len())?;
        if !(facet.slack >= 0.0) {
            return Err(Error::InvalidParam(format!("facet slack {} must be >= 0", facet.slack)));
        }
        Ok(DualPolytope {
            cost,
            facet: Some(facet),
        })
    }

    pub fn cost(&self) -> &CostMatrix {
        &self.cost
    }

    pub fn facet(&self) -> Option<&Facet> {
        self.facet.as_ref()
    }

    pub fn k(&self) -> usize {
        self.cost.k()
    }

    /// Whether `f` satisfies all constraints up to `tol`.
    pub fn contains(&self, f: &[f64], tol: f64) -> bool {
        let k = self.k();
        if f.len() != k || f.first().is_some_and(|f0| f0.abs() > tol) {
            return false;
        }
        for a in 0..k {
            for b in 0..k {
                if f[a] - f[b] > self.cost.get(a, b) + tol {
                    return false;
                }
            }
        }
        match &self.facet {
            Some(facet) => {
                let dot: f64 = f.iter().zip(&facet.direction).map(|(x, y)| x * y).sum();
                (dot - facet.target).abs() <= facet.slack + tol
            }
            None => true,
        }
    }
}

/// Value and a maximizer of a linear functional over a [`DualPolytope`].
#[derive(Debug, Clone)]
pub struct DualValue {
    pub value: f64,
    pub argmax: Vec<f64>,
    pub duality_gap: f64,
}

// Absorbs LP roundoff in the facet target so an exact (δ = 0) face stays feasible.
const FACET_FEASIBILITY_PAD: f64 = 1e-10;

/// `sup_{f ∈ polytope} fᵀu`, solved as an LP in the shifted variables
/// `x_k = f_k + c_0k ≥ 0`, `k = 1..K-1`.
pub fn kr_dual_value(u: &[f64], polytope: &DualPolytope) -> Result<DualValue> {
    let k = polytope.k();
    check_dims(k, u.len())?;
    if k <= 1 {
        return Ok(DualValue {
            value: 0.0,
            argmax: vec![0.0; k],
            duality_gap: 0.0,
        });
    }
    let cost = polytope.cost();
    let n = k - 1;
    let shift: Vec<f64> = (1..k).map(|a| cost.get(0, a)).collect();

    let mut rows = Vec::with_capacity(k * (k - 1) + 2);
    let mut rhs = Vec::with_capacity(k * (k - 1) + 2);
    for a in 1..k {
        // f_a - f_0 ≤ c_a0
        let mut row = vec![0.0; n];
        row[a - 1] = 1.0;
        rows.push(row);
        rhs.push(cost.get(a, 0) + shift[a - 1]);
        for b in 1..k {
            if a == b {
                continue;
            }
            let mut row = vec![0.0; n];
            row[a - 1] = 1.0;
            row[b - 1] = -1.0;
            rows.push(row);
            rhs.push(cost.get(a, b) + shift[a - 1] - shift[b - 1]);
        }
    }
    if let Some(facet) = polytope.facet() {
        let dir = &facet.direction;
        let offset: f64 = (1..k).map(|a| dir[a] * shift[a - 1]).sum();
        let pad = FACET_FEASIBILITY_PAD * (1.0 + facet.target.abs());
        let row: Vec<f64> = dir[1..].to_vec();
        rows.push(row.clone());
        rhs.push(facet.target + facet.slack + pad + offset);
        rows.push(row.iter().map(|x| -x).collect());
        rhs.push(facet.slack + pad - facet.target - offset);
    }
    let objective: Vec<f64> = u[1..].to_vec();
    let program = LinearProgram { objective, rows, rhs };
    let sol = lp::solve(&program)?;
    let constant: f64 = (1..k).map(|a| u[a] * shift[a - 1]).sum();
    let mut argmax = vec![0.0; k];
    for a in 1..k {
        argmax[a] = sol.x[a - 1] - shift[a - 1];
    }
    let value = sol.value - constant;
    Ok(DualValue {
        value,
        argmax,
        duality_gap: sol.duality_gap(&program),
    })
}

/// `F̂'_δ = F̂ ∩ {f : |fᵀ(α̂_i - α̂_j) - W(α̂_i, α̂_j)| ≤ δ}`.
///
/// `w_hat = None` computes the target as `sup_{F̂} fᵀ(α̂_i - α̂_j)`.
pub fn restricted_polytope(
    cost: &CostMatrix,
    alpha_hat: &[f64],
    beta_hat: &[f64],
    w_hat: Option<f64>,
    delta: f64,
) -> Result<DualPolytope> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidParam(format!("delta = {delta} must be >= 0")));
    }
    check_dims(cost.k(), alpha_hat.len())?;
    check_dims(cost.k(), beta_hat.len())?;
    let direction: Vec<f64> = alpha_hat.iter().zip(beta_hat).map(|(a, b)| a - b).collect();
    let target = match w_hat {
        Some(w) => w,
        None => kr_dual_value(&direction, &DualPolytope::new(cost.clone()))?.value,
    };
    DualPolytope::with_facet(
        cost.clone(),
        Facet {
            direction,
            target,
            slack: delta,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cost2(c: f64) -> CostMatrix {
        CostMatrix::from_table(DMatrix::from_row_slice(2, 2, &[0.0, c, c, 0.0])).unwrap()
    }

    #[test]
    fn probvec_validation() {
        assert!(ProbVec::new(vec![0.5, 0.5]).is_ok());
        assert!(ProbVec::new(vec![0.5, 0.6]).is_err());
        assert!(ProbVec::new(vec![1.5, -0.5]).is_err());
        assert!(ProbVec::new(vec![]).is_err());
    }

    #[test]
    fn tv_examples() {
        let u = ProbVec::new(vec![0.5, 0.5, 0.0]).unwrap();
        let v = ProbVec::new(vec![0.25, 0.25, 0.5]).unwrap();
        assert_eq!(tv_distance(&u, &u).unwrap(), 0.0);
        assert_abs_diff_eq!(tv_distance(&u, &v).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(tv_distance(&ProbVec::vertex(2, 0), &ProbVec::vertex(2, 1)).unwrap(), 1.0);
        assert!(matches!(
            tv_distance(&u, &ProbVec::uniform(2)),
            Err(Error::DimError { .. })
        ));
    }

    #[test]
    fn cost_matrix_examples() {
        let a = TopicMatrix::from_columns(&[ProbVec::vertex(2, 0), ProbVec::vertex(2, 1)]).unwrap();
        let c = cost_matrix(&a, &Metric::TotalVariation).unwrap();
        assert_eq!(c.matrix(), &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));

        let same = TopicMatrix::from_columns(&[ProbVec::uniform(3), ProbVec::uniform(3)]).unwrap();
        let c = cost_matrix(&same, &Metric::Euclidean).unwrap();
        assert_eq!(c.max_entry(), 0.0);

        let bad = Metric::Table(vec![vec![0.0, 1.0], vec![2.0, 0.0]]);
        assert!(matches!(cost_matrix(&a, &bad), Err(Error::InvalidCost(_))));
        let diag = Metric::Table(vec![vec![1.0, 1.0], vec![1.0, 0.0]]);
        assert!(matches!(cost_matrix(&a, &diag), Err(Error::InvalidCost(_))));
        let ok = Metric::Table(vec![vec![0.0, 0.3], vec![0.3, 0.0]]);
        assert_eq!(cost_matrix(&a, &ok).unwrap().get(0, 1), 0.3);
    }

    #[test]
    fn two_atoms_forced_transfer() {
        let c = cost2(0.7);
        let a = ProbVec::new(vec![0.8, 0.2]).unwrap();
        let b = ProbVec::new(vec![0.35, 0.65]).unwrap();
        let plan = wasserstein_primal(&a, &b, &c).unwrap();
        assert_abs_diff_eq!(plan.value, 0.45 * 0.7, epsilon = 1e-14);
        let dual = kr_dual_value(&[0.45, -0.45], &DualPolytope::new(c)).unwrap();
        assert_abs_diff_eq!(dual.value, 0.45 * 0.7, epsilon = 1e-12);
    }

    #[test]
    fn identical_marginals_cost_nothing() {
        let c = cost2(1.0);
        let a = ProbVec::new(vec![0.3, 0.7]).unwrap();
        let plan = wasserstein_primal(&a, &a, &c).unwrap();
        assert_eq!(plan.value, 0.0);
        assert_abs_diff_eq!(plan.plan[(0, 0)], 0.3, epsilon = 1e-15);
    }

    #[test]
    fn zero_direction_and_single_atom() {
        let c = cost2(1.0);
        assert_eq!(kr_dual_value(&[0.0, 0.0], &DualPolytope::new(c)).unwrap().value, 0.0);
        let one = CostMatrix::from_table(DMatrix::zeros(1, 1)).unwrap();
        let a = ProbVec::vertex(1, 0);
        assert_eq!(wasserstein_primal(&a, &a, &one).unwrap().value, 0.0);
        assert_eq!(kr_dual_value(&[0.3], &DualPolytope::new(one)).unwrap().value, 0.0);
    }

    #[test]
    fn restricted_null_case_is_unrestricted() {
        let c = CostMatrix::from_table(DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 0.4, 0.6, 0.4, 0.0, 0.3, 0.6, 0.3, 0.0],
        ))
        .unwrap();
        let a = [0.2, 0.3, 0.5];
        let poly = restricted_polytope(&c, &a, &a, None, 0.0).unwrap();
        let free = DualPolytope::new(c);
        for u in [[0.1, -0.3, 0.2], [-0.5, 0.25, 0.25], [0.0, 1.0, -1.0]] {
            let r = kr_dual_value(&u, &poly).unwrap().value;
            let f = kr_dual_value(&u, &free).unwrap().value;
            assert_abs_diff_eq!(r, f, epsilon = 1e-10);
        }
        assert!(restricted_polytope(poly.cost(), &a, &a, None, -1.0).is_err());
    }

    #[test]
    fn exact_face_makes_value_linear_in_unique_maximizer() {
        // K = 2, u0 = (1, -1): the optimal face is the single point f = (0, -c)
        let c = cost2(1.0);
        let poly = restricted_polytope(&c, &[1.0, 0.0], &[0.0, 1.0], None, 0.0).unwrap();
        let v = kr_dual_value(&[-1.0, 1.0], &poly).unwrap();
        assert_abs_diff_eq!(v.value, -1.0, epsilon = 1e-9);
        assert!(poly.contains(&v.argmax, 1e-8));
    }
}
