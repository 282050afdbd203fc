//! Dense two-phase tableau simplex for small LPs of the form
//!
//! ```text
//! maximize  cᵀx   subject to  A x ≤ b,  x ≥ 0
//! ```
//!
//! Sizes here are at most a few hundred rows (the Lipschitz polytope for
//! K ≤ 20), so a full tableau is simpler and fast enough. Pivoting uses
//! Dantzig's rule and switches to Bland's rule after a run of degenerate
//! pivots, which rules out cycling.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;
const DEGENERATE_SWITCH: usize = 50;

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
    /// Dual multipliers `y ≥ 0` of the `A x ≤ b` rows.
    pub duals: Vec<f64>,
    pub pivots: usize,
}

impl LpSolution {
    /// `bᵀy - cᵀx`; zero at an optimal pair up to roundoff.
    pub fn duality_gap(&self, lp: &LinearProgram) -> f64 {
        let dual: f64 = lp.rhs.iter().zip(&self.duals).map(|(b, y)| b * y).sum();
        dual - self.value
    }
}

struct Tableau {
    m: usize,
    width: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width - 1)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let inv = 1.0 / self.data[pr * w + pc];
        for c in 0..w {
            self.data[pr * w + c] *= inv;
        }
        self.data[pr * w + pc] = 1.0;
        let (before, rest) = self.data.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        let eliminate = |row: &mut [f64]| {
            let f = row[pc];
            if f != 0.0 {
                for (x, p) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
                row[pc] = 0.0;
            }
        };
        before.chunks_mut(w).for_each(eliminate);
        after.chunks_mut(w).for_each(eliminate);
        self.basis[pr] = pc;
    }

    /// Runs simplex iterations on the objective stored in row `m`, considering
    /// only columns `< allowed`.
    fn optimize(&mut self, allowed: usize, pivots: &mut usize, limit: usize) -> Result<()> {
        let m = self.m;
        let mut degenerate_run = 0usize;
        loop {
            let bland = degenerate_run >= DEGENERATE_SWITCH;
            let mut enter = None;
            let mut best = -PIVOT_EPS;
            for c in 0..allowed {
                let rc = self.at(m, c);
                if rc < best {
                    enter = Some(c);
                    if bland {
                        break;
                    }
                    best = rc;
                }
            }
            let Some(pc) = enter else { return Ok(()) };

            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for r in 0..m {
                let a = self.at(r, pc);
                if a > PIVOT_EPS {
                    let ratio = self.rhs(r).max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            ratio < best_ratio - 1e-14
                                || (ratio <= best_ratio + 1e-14 && self.basis[r] < self.basis[l])
                        }
                    };
                    if better {
                        leave = Some(r);
                        best_ratio = best_ratio.min(ratio);
                    }
                }
            }
            let Some(pr) = leave else {
                return Err(Error::Unbounded);
            };
            if best_ratio <= 1e-14 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(pr, pc);
            *pivots += 1;
            if *pivots > limit {
                return Err(Error::IterationLimit(*pivots));
            }
        }
    }
}

/// Solves the LP. `Infeasible` and `Unbounded` are reported as errors.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    let n = lp.objective.len();
    let m = lp.rows.len();
    if lp.rhs.len() != m {
        return Err(Error::DimError {
            expected: m,
            got: lp.rhs.len(),
        });
    }
    if let Some(bad) = lp.rows.iter().find(|r| r.len() != n) {
        return Err(Error::DimError {
            expected: n,
            got: bad.len(),
        });
    }

    let negative: Vec<usize> = (0..m).filter(|&i| lp.rhs[i] < 0.0).collect();
    let n_art = negative.len();
    // columns: x (n) | slacks (m) | artificials (n_art) | rhs
    let width = n + m + n_art + 1;
    let mut t = Tableau {
        m,
        width,
        data: vec![0.0; (m + 1) * width],
        basis: vec![0; m],
    };
    let mut art_of_row = vec![usize::MAX; m];
    for (a, &row) in negative.iter().enumerate() {
        art_of_row[row] = n + m + a;
    }
    for i in 0..m {
        let sign = if lp.rhs[i] < 0.0 { -1.0 } else { 1.0 };
        let base = i * width;
        for j in 0..n {
            t.data[base + j] = sign * lp.rows[i][j];
        }
        t.data[base + n + i] = sign;
        t.data[base + width - 1] = sign * lp.rhs[i];
        if sign < 0.0 {
            t.data[base + art_of_row[i]] = 1.0;
            t.basis[i] = art_of_row[i];
        } else {
            t.basis[i] = n + i;
        }
    }

    let limit = 50 * (n + m + 10);
    let mut pivots = 0;
    let obj = m * width;

    if n_art > 0 {
        // phase 1: maximize -(sum of artificials)
        for &row in &negative {
            for c in 0..width {
                let v = t.data[row * width + c];
                t.data[obj + c] -= v;
            }
            t.data[obj + art_of_row[row]] = 0.0;
        }
        t.optimize(width - 1, &mut pivots, limit)?;
        let infeas = -t.at(m, width - 1);
        let scale = 1.0 + lp.rhs.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        if infeas > 1e-9 * scale {
            return Err(Error::Infeasible);
        }
        // drive remaining artificials out of the basis
        for r in 0..m {
            if t.basis[r] >= n + m {
                if let Some(c) = (0..n + m).find(|&c| t.at(r, c).abs() > 1e-9) {
                    t.pivot(r, c);
                    pivots += 1;
                }
            }
        }
    }

    // phase 2 objective row: reduced costs -c_j, priced out against the basis
    for c in 0..width {
        t.data[obj + c] = 0.0;
    }
    for j in 0..n {
        t.data[obj + j] = -lp.objective[j];
    }
    for r in 0..m {
        let b = t.basis[r];
        if b < n {
            let cb = lp.objective[b];
            if cb != 0.0 {
                for c in 0..width {
                    let v = t.data[r * width + c];
                    t.data[obj + c] += cb * v;
                }
            }
        }
    }
    t.optimize(n + m, &mut pivots, limit)?;

    let mut x = vec![0.0; n];
    for r in 0..m {
        let b = t.basis[r];
        if b < n {
            x[b] = t.rhs(r).max(0.0);
        }
    }
    let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    let duals = (0..m).map(|i| t.at(m, n + i).max(0.0)).collect();
    Ok(LpSolution {
        value,
        x,
        duals,
        pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18  ->  36 at (2, 6)
        let lp = LinearProgram {
            objective: vec![3.0, 5.0],
            rows: vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
            rhs: vec![4.0, 12.0, 18.0],
        };
        let sol = solve(&lp).unwrap();
        assert_abs_diff_eq!(sol.value, 36.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.x[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.x[1], 6.0, epsilon = 1e-12);
        assert!(sol.duality_gap(&lp).abs() < 1e-10);
    }

    #[test]
    fn needs_phase_one() {
        // max -x - y, x + y ≥ 1 (as -x - y ≤ -1), x ≤ 3
        let lp = LinearProgram {
            objective: vec![-1.0, -1.0],
            rows: vec![vec![-1.0, -1.0], vec![1.0, 0.0]],
            rhs: vec![-1.0, 3.0],
        };
        let sol = solve(&lp).unwrap();
        assert_abs_diff_eq!(sol.value, -1.0, epsilon = 1e-12);
        assert!(sol.duality_gap(&lp).abs() < 1e-10);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let lp = LinearProgram {
            objective: vec![1.0],
            rows: vec![vec![1.0], vec![-1.0]],
            rhs: vec![1.0, -2.0],
        };
        assert_eq!(solve(&lp).unwrap_err(), Error::Infeasible);
        let lp = LinearProgram {
            objective: vec![1.0, 0.0],
            rows: vec![vec![0.0, 1.0]],
            rhs: vec![1.0],
        };
        assert_eq!(solve(&lp).unwrap_err(), Error::Unbounded);
    }

    #[test]
    fn empty_program() {
        let lp = LinearProgram {
            objective: vec![],
            rows: vec![],
            rhs: vec![],
        };
        assert_eq!(solve(&lp).unwrap().value, 0.0);
    }
}
