//! Mixture-weight estimators for a single document given a (known or
//! estimated) topic matrix: the simplex-constrained MLE, its one-step debiased
//! correction, weighted least squares, and the plug-in asymptotic covariances.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numlin;
use crate::transport::{ProbVec, TopicMatrix};

/// Fitted probabilities at or below this are treated as zero when forming `Ĵ`.
pub const SUPPORT_ZETA: f64 = 1e-12;
/// Weights above this count as active in KKT checks.
pub const ACTIVE_TAU: f64 = 1e-8;
/// Stationarity tolerance for KKT certificates.
pub const KKT_TOL: f64 = 1e-6;

/// Word counts of one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountVector {
    counts: Vec<u64>,
    total: u64,
}

impl CountVector {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        let total = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidParam("document has no words".into()));
        }
        Ok(CountVector { counts, total })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Document length `N`.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    /// Word frequencies `X = Y / N`.
    pub fn frequencies(&self) -> ProbVec {
        let n = self.total as f64;
        ProbVec::new(self.counts.iter().map(|&c| c as f64 / n).collect())
            .expect("normalized counts lie in the simplex")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMethod {
    Mle,
    Debiased,
    Wls,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightEstimate {
    /// In `Δ_K` for the MLE; unconstrained (but summing to one) otherwise.
    pub alpha: Vec<f64>,
    pub method: WeightMethod,
    /// Word indices the estimate was computed on.
    pub support: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

impl WeightEstimate {
    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovMethod {
    PluginMle,
    PluginWls,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovEstimate {
    pub sigma: DMatrix<f64>,
    pub method: CovMethod,
    pub rank: usize,
}

fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimError { expected, got });
    }
    Ok(())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MleSolver {
    /// Multiplicative EM updates `α_k ← α_k Σ_j X_j A_jk / (A_j·ᵀα)`.
    Em,
    /// Damped Newton on the faces of the simplex with an active set.
    ActiveSetNewton,
}

/// Options for [`mle_weights`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    /// Stop when successive iterates differ by at most this in ℓ₁.
    pub tol: f64,
    pub max_iter: usize,
    pub solver: MleSolver,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            tol: 1e-10,
            max_iter: 10_000,
            solver: MleSolver::ActiveSetNewton,
        }
    }
}

/// Rows of the topic matrix restricted to `supp(X)`, packed for the EM loop.
struct SupportProblem {
    k: usize,
    weights: Vec<f64>,
    rows: Vec<f64>,
    support: Vec<usize>,
}

impl SupportProblem {
    fn new(x: &ProbVec, a: &TopicMatrix) -> Result<Self> {
        check_dims(a.p(), x.dim())?;
        let k = a.k();
        let mut weights = Vec::new();
        let mut rows = Vec::new();
        let mut support = Vec::new();
        for (j, &xj) in x.as_slice().iter().enumerate() {
            if xj > 0.0 {
                let row = a.row(j);
                if row.iter().all(|&v| v <= 0.0) {
                    return Err(Error::InfeasibleRow(j));
                }
                weights.push(xj);
                rows.extend_from_slice(row);
                support.push(j);
            }
        }
        if support.is_empty() {
            return Err(Error::DegenerateSupport);
        }
        Ok(SupportProblem {
            k,
            weights,
            rows,
            support,
        })
    }

    fn objective(&self, alpha: &[f64]) -> f64 {
        self.rows
            .chunks_exact(self.k)
            .zip(&self.weights)
            .map(|(row, &x)| x * dot(row, alpha).ln())
            .sum()
    }

    /// `g_k = Σ_j X_j A_jk / (A_j·ᵀα)`, the gradient of the objective.
    fn gradient(&self, alpha: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
        for (row, &x) in self.rows.chunks_exact(self.k).zip(&self.weights) {
            let w = x / dot(row, alpha);
            for (g, a) in out.iter_mut().zip(row) {
                *g += w * a;
            }
        }
    }

    /// One multiplicative EM update `α_k ← α_k g_k(α)`.
    fn em_step(&self, alpha: &[f64], out: &mut [f64]) {
        self.gradient(alpha, out);
        for (o, a) in out.iter_mut().zip(alpha) {
            *o *= a;
        }
        let s: f64 = out.iter().sum();
        out.iter_mut().for_each(|o| *o /= s);
    }
}

fn l1_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Iterates of plain EM from the uniform start; exposed so monotonicity of the
/// objective can be checked step by step.
pub fn em_trace(x: &ProbVec, a: &TopicMatrix, steps: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    let prob = SupportProblem::new(x, a)?;
    let mut alpha = vec![1.0 / a.k() as f64; a.k()];
    let mut next = alpha.clone();
    let mut trace = vec![(alpha.clone(), prob.objective(&alpha))];
    for _ in 0..steps {
        prob.em_step(&alpha, &mut next);
        std::mem::swap(&mut alpha, &mut next);
        trace.push((alpha.clone(), prob.objective(&alpha)));
    }
    Ok(trace)
}

/// Log-likelihood `Σ_{j ∈ supp X} X_j log(A_j·ᵀα)`.
pub fn log_likelihood(x: &ProbVec, a: &TopicMatrix, alpha: &[f64]) -> Result<f64> {
    check_dims(a.k(), alpha.len())?;
    Ok(SupportProblem::new(x, a)?.objective(alpha))
}

/// Simplex-constrained MLE `argmax_{α ∈ Δ_K} Σ_j X_j log(A_j·ᵀα)` from the
/// uniform start. Both solvers only accept iterates that do not decrease the
/// objective.
pub fn mle_weights(x: &ProbVec, a: &TopicMatrix, opts: &MleOptions) -> Result<WeightEstimate> {
    let prob = SupportProblem::new(x, a)?;
    let (alpha, iterations, converged) = match opts.solver {
        MleSolver::Em => prob.solve_em(opts),
        MleSolver::ActiveSetNewton => prob.solve_newton(opts),
    };
    Ok(WeightEstimate {
        alpha,
        method: WeightMethod::Mle,
        support: prob.support,
        iterations,
        converged,
    })
}

impl SupportProblem {
    fn solve_em(&self, opts: &MleOptions) -> (Vec<f64>, usize, bool) {
        let k = self.k;
        let mut alpha = vec![1.0 / k as f64; k];
        let mut next = alpha.clone();
        for it in 1..=opts.max_iter {
            self.em_step(&alpha, &mut next);
            let step = l1_diff(&alpha, &next);
            std::mem::swap(&mut alpha, &mut next);
            if step <= opts.tol {
                return (alpha, it, true);
            }
        }
        (alpha, opts.max_iter, false)
    }

    /// Objective, or `-inf` when some observed word gets zero probability.
    fn objective_checked(&self, alpha: &[f64]) -> f64 {
        let mut total = 0.0;
        for (row, &x) in self.rows.chunks_exact(self.k).zip(&self.weights) {
            let r = dot(row, alpha);
            if r <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += x * r.ln();
        }
        total
    }

    /// Gradient and the negated Hessian `Σ_j X_j A_j·A_j·ᵀ / (A_j·ᵀα)²`.
    fn curvature(&self, alpha: &[f64], grad: &mut [f64], neg_hess: &mut DMatrix<f64>) {
        let k = self.k;
        grad.iter_mut().for_each(|g| *g = 0.0);
        neg_hess.fill(0.0);
        for (row, &x) in self.rows.chunks_exact(k).zip(&self.weights) {
            let r = dot(row, alpha);
            let w = x / r;
            let w2 = w / r;
            for c in 0..k {
                grad[c] += w * row[c];
                let wc = w2 * row[c];
                for rr in c..k {
                    neg_hess[(rr, c)] += wc * row[rr];
                }
            }
        }
        for c in 0..k {
            for rr in (c + 1)..k {
                neg_hess[(c, rr)] = neg_hess[(rr, c)];
            }
        }
    }

    fn solve_newton(&self, opts: &MleOptions) -> (Vec<f64>, usize, bool) {
        let k = self.k;
        let mut alpha = vec![1.0 / k as f64; k];
        let mut free = vec![true; k];
        let mut grad = vec![0.0; k];
        let mut neg_hess = DMatrix::zeros(k, k);
        let mut trial = vec![0.0; k];
        let mut value = self.objective_checked(&alpha);

        for it in 1..=opts.max_iter {
            self.curvature(&alpha, &mut grad, &mut neg_hess);
            let dir = newton_direction(&grad, &neg_hess, &free);
            let slope: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
            let size: f64 = dir.iter().map(|d| d.abs()).sum();

            // predicted gains below the objective's roundoff count as stationary
            let flat = slope <= 1e-14 * (1.0 + value.abs());
            let (dir, slope) = if size <= 1e-3 * opts.tol || flat {
                // stationary on the current face: release the most violated zero weight
                let scale: f64 = alpha.iter().zip(&grad).map(|(a, g)| a * g).sum();
                let best = (0..k)
                    .filter(|&c| !free[c])
                    .max_by(|&i, &j| grad[i].total_cmp(&grad[j]));
                match best {
                    Some(c) if grad[c] > scale * (1.0 + 1e-12) => {
                        free[c] = true;
                        // Newton on the enlarged face moves the released weight
                        // inward; the vertex direction is only a fallback
                        let d = newton_direction(&grad, &neg_hess, &free);
                        let s: f64 = d.iter().zip(&grad).map(|(d, g)| d * g).sum();
                        if d[c] > 0.0 && s > 0.0 {
                            (d, s)
                        } else {
                            let d: Vec<f64> = (0..k)
                                .map(|i| if i == c { 1.0 - alpha[i] } else { -alpha[i] })
                                .collect();
                            (d, grad[c] - scale)
                        }
                    }
                    _ => {
                        // below roundoff in the objective a full Newton step is
                        // still accurate in α; take it when it stays feasible
                        if alpha.iter().zip(&dir).all(|(a, d)| a + d >= 0.0) {
                            for c in 0..k {
                                trial[c] = alpha[c] + dir[c];
                            }
                            let s: f64 = trial.iter().sum();
                            trial.iter_mut().for_each(|v| *v /= s);
                            if self.objective_checked(&trial) >= value - 1e-14 * (1.0 + value.abs()) {
                                alpha.copy_from_slice(&trial);
                            }
                        }
                        return (alpha, it, true);
                    }
                }
            } else {
                (dir, slope)
            };

            // longest feasible step along `dir`
            let mut t_max = f64::INFINITY;
            let mut blocking = None;
            for c in 0..k {
                if dir[c] < 0.0 {
                    let t = alpha[c] / -dir[c];
                    if t < t_max {
                        t_max = t;
                        blocking = Some(c);
                    }
                }
            }
            let mut t = t_max.min(1.0);
            let mut accepted = false;
            for _ in 0..60 {
                for c in 0..k {
                    trial[c] = (alpha[c] + t * dir[c]).max(0.0);
                }
                if t == t_max {
                    if let Some(b) = blocking {
                        trial[b] = 0.0;
                    }
                }
                let s: f64 = trial.iter().sum();
                trial.iter_mut().for_each(|v| *v /= s);
                let cand = self.objective_checked(&trial);
                if cand >= value + 1e-4 * t * slope || (cand >= value && t < 1e-8) {
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                let ok = self.kkt_ok(&alpha);
                return (alpha, it, ok);
            }
            let moved = l1_diff(&alpha, &trial);
            alpha.copy_from_slice(&trial);
            value = self.objective_checked(&alpha);
            for c in 0..k {
                free[c] = alpha[c] > 0.0;
            }
            if moved <= opts.tol && self.kkt_ok(&alpha) {
                return (alpha, it, true);
            }
        }
        let ok = self.kkt_ok(&alpha);
        (alpha, opts.max_iter, ok)
    }

    fn kkt_ok(&self, alpha: &[f64]) -> bool {
        let mut g = vec![0.0; self.k];
        self.gradient(alpha, &mut g);
        g.iter().zip(alpha).all(|(&gk, &ak)| {
            if ak > ACTIVE_TAU {
                (gk - 1.0).abs() <= KKT_TOL
            } else {
                gk <= 1.0 + KKT_TOL
            }
        })
    }
}

/// Newton ascent direction restricted to the free coordinates and to `Σ d = 0`:
/// solves `[Q 1; 1ᵀ 0][d; ν] = [g; 0]` on the free block.
fn newton_direction(grad: &[f64], neg_hess: &DMatrix<f64>, free: &[bool]) -> Vec<f64> {
    let idx: Vec<usize> = (0..grad.len()).filter(|&c| free[c]).collect();
    let n = idx.len();
    let mut dir = vec![0.0; grad.len()];
    if n <= 1 {
        return dir;
    }
    let trace: f64 = idx.iter().map(|&c| neg_hess[(c, c)]).sum();
    let ridge = 1e-12 * trace.max(1e-300);
    let mut sys = DMatrix::zeros(n + 1, n + 1);
    let mut rhs = DVector::zeros(n + 1);
    for (a, &ca) in idx.iter().enumerate() {
        for (b, &cb) in idx.iter().enumerate() {
            sys[(a, b)] = neg_hess[(ca, cb)];
        }
        sys[(a, a)] += ridge;
        sys[(a, n)] = 1.0;
        sys[(n, a)] = 1.0;
        rhs[a] = grad[ca];
    }
    if let Some(sol) = numlin::solve(&sys, &rhs) {
        for (a, &ca) in idx.iter().enumerate() {
            dir[ca] = sol[a];
        }
    }
    dir
}

/// Largest violation of the KKT conditions of the MLE at `alpha`: with
/// `g = ∇` of the objective, `g_k ≤ 1` for all `k` and `g_k = 1` on active weights.
pub fn kkt_residual(x: &ProbVec, a: &TopicMatrix, alpha: &[f64]) -> Result<f64> {
    let prob = SupportProblem::new(x, a)?;
    let mut g = vec![0.0; a.k()];
    prob.gradient(alpha, &mut g);
    Ok(g.iter()
        .zip(alpha)
        .map(|(&gk, &ak)| {
            if ak > ACTIVE_TAU {
                (gk - 1.0).abs()
            } else {
                (gk - 1.0).max(0.0)
            }
        })
        .fold(0.0, f64::max))
}

/// `Ĵ = {j : Â_j·ᵀα > ζ}` together with the fitted probabilities on it.
fn fitted_support(a: &TopicMatrix, alpha: &[f64]) -> Vec<(usize, f64)> {
    (0..a.p())
        .filter_map(|j| {
            let r = dot(a.row(j), alpha);
            (r > SUPPORT_ZETA).then_some((j, r))
        })
        .collect()
}

/// `Σ_{j ∈ Ĵ} Â_j· Â_j·ᵀ / r̂_j`.
fn information_matrix(a: &TopicMatrix, support: &[(usize, f64)]) -> DMatrix<f64> {
    let k = a.k();
    let mut h = DMatrix::zeros(k, k);
    for &(j, r) in support {
        let row = a.row(j);
        for c in 0..k {
            let w = row[c] / r;
            if w == 0.0 {
                continue;
            }
            for rr in c..k {
                h[(rr, c)] += row[rr] * w;
            }
        }
    }
    for c in 0..k {
        for rr in (c + 1)..k {
            h[(c, rr)] = h[(rr, c)];
        }
    }
    h
}

/// One-step correction `α̃ = α̂ + V̂⁺ Ψ(α̂)` of the simplex MLE, with
/// `Ψ(α) = Σ_{j∈Ĵ} (X_j - Â_j·ᵀα)/(Â_j·ᵀα) Â_j·` and
/// `V̂ = Σ_{j∈Ĵ} Â_j·Â_j·ᵀ / (Â_j·ᵀα̂)`.
pub fn debias(alpha_hat: &WeightEstimate, x: &ProbVec, a_hat: &TopicMatrix) -> Result<WeightEstimate> {
    check_dims(a_hat.k(), alpha_hat.k())?;
    check_dims(a_hat.p(), x.dim())?;
    let support = fitted_support(a_hat, &alpha_hat.alpha);
    if support.is_empty() {
        return Err(Error::DegenerateSupport);
    }
    let k = a_hat.k();
    let xs = x.as_slice();
    let mut psi = DVector::zeros(k);
    for &(j, r) in &support {
        let w = (xs[j] - r) / r;
        for (c, &av) in a_hat.row(j).iter().enumerate() {
            psi[c] += w * av;
        }
    }
    let v = information_matrix(a_hat, &support);
    let step = numlin::pinv(&v)? * psi;
    let alpha = alpha_hat.alpha.iter().zip(step.iter()).map(|(a, s)| a + s).collect();
    Ok(WeightEstimate {
        alpha,
        method: WeightMethod::Debiased,
        support: support.into_iter().map(|(j, _)| j).collect(),
        iterations: alpha_hat.iterations,
        converged: alpha_hat.converged,
    })
}

fn finish_cov(mut sigma: DMatrix<f64>, method: CovMethod) -> Result<CovEstimate> {
    numlin::symmetrize(&mut sigma);
    let sigma = numlin::clip_psd(&sigma)?;
    let rank = numlin::sym_eig(&sigma)?.rank;
    Ok(CovEstimate { sigma, method, rank })
}

/// Plug-in covariance `(Σ_{j∈Ĵ} Â_j·Â_j·ᵀ / r̂_j)⁻¹ - ααᵀ` with `r̂ = Âα`.
pub fn sigma_hat(alpha: &WeightEstimate, a_hat: &TopicMatrix) -> Result<CovEstimate> {
    sigma_from_weights(&alpha.alpha, a_hat)
}

/// [`sigma_hat`] for a bare weight vector (e.g. the true `α` in simulations).
pub fn sigma_from_weights(alpha: &[f64], a: &TopicMatrix) -> Result<CovEstimate> {
    let k = a.k();
    check_dims(k, alpha.len())?;
    let support = fitted_support(a, alpha);
    if support.is_empty() {
        return Err(Error::DegenerateSupport);
    }
    let h = information_matrix(a, &support);
    let eig = numlin::sym_eig(&h)?;
    let inv = eig.inverse().ok_or(Error::SingularInformation {
        rank: eig.rank,
        dim: k,
    })?;
    let av = DVector::from_column_slice(alpha);
    finish_cov(inv - &av * av.transpose(), CovMethod::PluginMle)
}

/// `Â⁺ = (ÂᵀD̂⁻¹Â)⁻¹ÂᵀD̂⁻¹` over the rows of `Â` with positive mass.
#[derive(Debug, Clone)]
pub struct WlsDesign {
    /// K x p' left inverse.
    pub left_inverse: DMatrix<f64>,
    /// Word indices kept (rows with nonzero sum).
    pub rows: Vec<usize>,
}

pub fn wls_design(a_hat: &TopicMatrix) -> Result<WlsDesign> {
    let k = a_hat.k();
    let rows: Vec<usize> = (0..a_hat.p())
        .filter(|&j| a_hat.row(j).iter().sum::<f64>() > 0.0)
        .collect();
    let mut m = DMatrix::zeros(k, k);
    let mut weighted = DMatrix::zeros(k, rows.len());
    for (col, &j) in rows.iter().enumerate() {
        let row = a_hat.row(j);
        let d: f64 = row.iter().sum();
        for c in 0..k {
            weighted[(c, col)] = row[c] / d;
            for rr in 0..k {
                m[(rr, c)] += row[rr] * row[c] / d;
            }
        }
    }
    let eig = numlin::sym_eig(&m)?;
    let inv = eig.inverse().ok_or(Error::SingularDesign {
        rank: eig.rank,
        dim: k,
    })?;
    Ok(WlsDesign {
        left_inverse: inv * weighted,
        rows,
    })
}

impl WlsDesign {
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let k = self.left_inverse.nrows();
        (0..k)
            .map(|c| self.rows.iter().enumerate().map(|(col, &j)| self.left_inverse[(c, col)] * v[j]).sum())
            .collect()
    }
}

/// Weighted least squares `α̃_LS = Â⁺ X`.
pub fn wls_weights(x: &ProbVec, a_hat: &TopicMatrix) -> Result<WeightEstimate> {
    check_dims(a_hat.p(), x.dim())?;
    let design = wls_design(a_hat)?;
    let alpha = design.apply(x.as_slice());
    Ok(WeightEstimate {
        alpha,
        method: WeightMethod::Wls,
        support: design.rows,
        iterations: 0,
        converged: true,
    })
}

/// `Σ_LS = Â⁺ diag(r) Â⁺ᵀ - ααᵀ`, with `r` the plug-in mixture (`X` or `Âα`).
pub fn sigma_ls(alpha: &WeightEstimate, r: &[f64], a_hat: &TopicMatrix) -> Result<CovEstimate> {
    check_dims(a_hat.k(), alpha.k())?;
    check_dims(a_hat.p(), r.len())?;
    let design = wls_design(a_hat)?;
    let k = a_hat.k();
    let l = &design.left_inverse;
    let mut s = DMatrix::zeros(k, k);
    for (col, &j) in design.rows.iter().enumerate() {
        let rj = r[j];
        if rj == 0.0 {
            continue;
        }
        for c in 0..k {
            let w = l[(c, col)] * rj;
            for rr in 0..k {
                s[(rr, c)] += l[(rr, col)] * w;
            }
        }
    }
    let av = alpha.to_dvector();
    finish_cov(s - &av * av.transpose(), CovMethod::PluginWls)
}
