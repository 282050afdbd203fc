//! Dense symmetric linear algebra for the small (K x K) matrices that show up
//! in the weight estimators: eigendecomposition, Moore-Penrose inverse and PSD
//! square roots.
//!
//! The eigensolver is cyclic Jacobi. It is slower than tridiagonal QR for large
//! matrices, but K stays below ~100 here and Jacobi gives small eigenvalues
//! with good relative accuracy, which matters for the rank-(K-1) covariances.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative factor (per unit of dimension) used for the default rank threshold.
pub const RANK_EPS: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

/// Eigendecomposition `M = U diag(λ) Uᵀ` of a symmetric matrix, eigenvalues in
/// descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEigen {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
    /// Number of eigenvalues above `rank_tolerance * max(λ_1, 0)`.
    pub rank: usize,
    /// Relative rank threshold; defaults to `K * 1e-12`.
    pub rank_tolerance: f64,
}

impl SymEigen {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Absolute threshold below which an eigenvalue is treated as zero.
    pub fn threshold(&self) -> f64 {
        let top = self.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
        self.rank_tolerance * top
    }

    /// `U f(λ) Uᵀ`, applying `f` to every eigenvalue.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let k = self.dim();
        let u = &self.eigenvectors;
        let mut out = DMatrix::zeros(k, k);
        for (idx, &lambda) in self.eigenvalues.iter().enumerate() {
            let w = f(lambda);
            if w == 0.0 {
                continue;
            }
            let col = u.column(idx);
            for c in 0..k {
                let wc = w * col[c];
                for r in 0..k {
                    out[(r, c)] += col[r] * wc;
                }
            }
        }
        symmetrize(&mut out);
        out
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.map_spectrum(|l| l)
    }

    /// Moore-Penrose inverse; eigenvalues at or below the rank threshold are dropped.
    pub fn pinv(&self) -> DMatrix<f64> {
        let tol = self.threshold();
        self.map_spectrum(|l| if l > tol { 1.0 / l } else { 0.0 })
    }

    /// Inverse of a matrix that must be of full rank; `None` otherwise.
    pub fn inverse(&self) -> Option<DMatrix<f64>> {
        (self.rank == self.dim()).then(|| self.pinv())
    }
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let k = m.nrows();
    for r in 0..k {
        for c in (r + 1)..k {
            let avg = 0.5 * (m[(r, c)] + m[(c, r)]);
            m[(r, c)] = avg;
            m[(c, r)] = avg;
        }
    }
}

fn check_square_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidMatrix(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    Ok(())
}

/// Symmetric eigendecomposition with the default rank tolerance.
pub fn sym_eig(m: &DMatrix<f64>) -> Result<SymEigen> {
    let tol = RANK_EPS * m.nrows().max(1) as f64;
    sym_eig_with_tolerance(m, tol)
}

pub fn sym_eig_with_tolerance(m: &DMatrix<f64>, rank_tolerance: f64) -> Result<SymEigen> {
    check_square_finite(m)?;
    let n = m.nrows();
    let mut a = m.clone();
    symmetrize(&mut a);
    let mut v = DMatrix::<f64>::identity(n, n);

    let total: f64 = a.iter().map(|x| x * x).sum();
    let stop = (1e-30 * total).max(f64::MIN_POSITIVE);

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // total order on the diagonal keeps the output bitwise reproducible
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| a[(i, i)]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &v.column(src));
    }

    let top = eigenvalues.iter().copied().fold(0.0_f64, f64::max);
    let rank = eigenvalues.iter().filter(|&&l| l > rank_tolerance * top).count();
    Ok(SymEigen {
        eigenvalues,
        eigenvectors,
        rank,
        rank_tolerance,
    })
}

pub fn pinv(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(sym_eig(m)?.pinv())
}

/// Square root of the pseudo-inverse of a PSD matrix: `S` with `S S = M⁺`.
/// Roundoff-negative eigenvalues are clipped to zero first.
pub fn psd_sqrt_pinv(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = sym_eig(m)?;
    let tol = eig.threshold();
    Ok(eig.map_spectrum(|l| if l > tol { 1.0 / l.sqrt() } else { 0.0 }))
}

/// PSD square root `S` with `S S = M`, negative eigenvalues clipped to zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = sym_eig(m)?;
    Ok(eig.map_spectrum(|l| l.max(0.0).sqrt()))
}

/// Projection onto the PSD cone by clipping negative eigenvalues.
pub fn clip_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = sym_eig(m)?;
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        let mut out = m.clone();
        symmetrize(&mut out);
        return Ok(out);
    }
    Ok(eig.map_spectrum(|l| l.max(0.0)))
}

/// Solves a small square system by Gaussian elimination with partial
/// pivoting; `None` when a pivot vanishes.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut x = b.clone();
    let scale = m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))?;
        if m[(piv, col)].abs() <= 1e-300_f64.max(1e-15 * scale * 1e-6) {
            return None;
        }
        if piv != col {
            m.swap_rows(piv, col);
            x.swap_rows(piv, col);
        }
        let d = m[(col, col)];
        for r in (col + 1)..n {
            let f = m[(r, col)] / d;
            if f != 0.0 {
                for c in col..n {
                    m[(r, c)] -= f * m[(col, c)];
                }
                x[r] -= f * x[col];
            }
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for c in (col + 1)..n {
            s -= m[(col, c)] * x[c];
        }
        x[col] = s / m[(col, col)];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn frob(m: &DMatrix<f64>) -> f64 {
        m.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn identity() {
        let eig = sym_eig(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(eig.eigenvalues.as_slice(), &[1.0, 1.0, 1.0]);
        assert_eq!(eig.rank, 3);
        assert_eq!(pinv(&DMatrix::identity(4, 4)).unwrap(), DMatrix::identity(4, 4));
        assert_eq!(
            psd_sqrt_pinv(&DMatrix::identity(4, 4)).unwrap(),
            DMatrix::identity(4, 4)
        );
    }

    #[test]
    fn diagonal_rank_deficient() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let eig = sym_eig(&m).unwrap();
        assert_eq!(eig.eigenvalues.as_slice(), &[2.0, 0.0]);
        assert_eq!(eig.rank, 1);
        let p = pinv(&m).unwrap();
        assert_abs_diff_eq!(p, DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]), epsilon = 1e-15);

        let m4 = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 0.0]);
        let s = psd_sqrt_pinv(&m4).unwrap();
        assert_abs_diff_eq!(s, DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]), epsilon = 1e-15);
    }

    #[test]
    fn rank_one_projection_is_its_own_pinv() {
        let v = DVector::from_vec(vec![1.0, 2.0, -2.0]) / 3.0;
        let m = &v * v.transpose();
        let p = pinv(&m).unwrap();
        // Penrose conditions
        assert!(frob(&(&m * &p * &m - &m)) < 1e-12);
        assert!(frob(&(&p * &m * &p - &p)) < 1e-12);
        assert!(frob(&(&p - &m)) < 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, f64::NAN, 1.0]);
        assert!(matches!(sym_eig(&m), Err(Error::InvalidMatrix(_))));
        let rect = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(pinv(&rect), Err(Error::InvalidMatrix(_))));
    }

    #[test]
    fn two_by_two_closed_form() {
        // eigenvalues of [[a, b], [b, c]] are (a+c)/2 ± sqrt(((a-c)/2)^2 + b^2)
        let (a, b, c) = (0.3, -1.7, 2.2);
        let m = DMatrix::from_row_slice(2, 2, &[a, b, b, c]);
        let eig = sym_eig(&m).unwrap();
        let mid = 0.5 * (a + c);
        let rad = ((0.5 * (a - c)).powi(2) + b * b).sqrt();
        assert_abs_diff_eq!(eig.eigenvalues[0], mid + rad, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.eigenvalues[1], mid - rad, epsilon = 1e-14);
    }

    #[test]
    fn clip_removes_negative_roundoff() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-14]);
        let c = clip_psd(&m).unwrap();
        assert!(sym_eig(&c).unwrap().eigenvalues.iter().all(|&l| l >= 0.0));
        assert_abs_diff_eq!(c[(0, 0)], 1.0, epsilon = 1e-15);
    }
}
