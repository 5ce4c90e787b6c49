//! Dense linear algebra for the small symmetric problems used throughout the
//! crate: Cholesky factorisation, SPD solves, quadratic forms and a cyclic
//! Jacobi eigensolver.
//!
//! Everything here targets dimensions of at most a few dozen, so storage is a
//! plain row-major `Vec<f64>` and no blocking is attempted.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Relative tolerance used when deciding whether a matrix is symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Jacobi stops once the off-diagonal Frobenius norm falls below this
/// fraction of the full Frobenius norm.
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major storage.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from a list of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Matrix product. Panics if the inner dimensions disagree.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul: inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = out.row_mut(i);
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec: dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn scaled(&self, alpha: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| alpha * x).collect(),
        }
    }

    /// `alpha * self + beta * other`.
    pub fn lin_comb(&self, alpha: f64, other: &Matrix, beta: f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                found: other.rows * other.cols,
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Checks symmetry relative to the largest entry and returns the
    /// exactly symmetrised copy.
    pub fn symmetrized(&self) -> Result<Matrix> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: self.cols,
            });
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let (a, b) = (self[(i, j)], self[(j, i)]);
                let diff = (a - b).abs();
                if !(diff <= SYMMETRY_TOL * scale) {
                    return Err(Error::NotSymmetric {
                        row: i,
                        col: j,
                        diff,
                    });
                }
                let avg = 0.5 * (a + b);
                out[(i, j)] = avg;
                out[(j, i)] = avg;
            }
        }
        Ok(out)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

// ---------------------------------------------------------------------------
// Cholesky and SPD matrices
// ---------------------------------------------------------------------------

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = m`.
///
/// Only the lower triangle of `m` is read. Fails with
/// [`Error::NotPositiveDefinite`] on the first pivot that is not strictly
/// positive.
pub fn cholesky(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.rows,
            found: m.cols,
        });
    }
    let n = m.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `L y = b` in place for lower-triangular `L`.
pub fn forward_substitute(l: &Matrix, b: &mut [f64]) {
    let n = l.rows;
    for i in 0..n {
        let row = l.row(i);
        let mut s = b[i];
        for k in 0..i {
            s -= row[k] * b[k];
        }
        b[i] = s / row[i];
    }
}

/// Solves `Lᵀ x = y` in place for lower-triangular `L`.
pub fn backward_substitute(l: &Matrix, y: &mut [f64]) {
    let n = l.rows;
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
}

/// Symmetric positive definite matrix together with its Cholesky factor.
///
/// Construction is the positive-definiteness test: a matrix is accepted
/// exactly when it is symmetric and its Cholesky factorisation succeeds.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix {
    matrix: Matrix,
    chol: Matrix,
}

impl SpdMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        let matrix = m.symmetrized()?;
        let chol = cholesky(&matrix)?;
        Ok(SpdMatrix { matrix, chol })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        SpdMatrix::new(Matrix::from_rows(rows)?)
    }

    pub fn identity(p: usize) -> Self {
        SpdMatrix {
            matrix: Matrix::identity(p),
            chol: Matrix::identity(p),
        }
    }

    /// Builds `L Lᵀ` from a lower-triangular factor with positive diagonal,
    /// reusing `L` as the Cholesky factor.
    pub fn from_cholesky_factor(l: Matrix) -> Result<Self> {
        if !l.is_square() {
            return Err(Error::DimensionMismatch {
                expected: l.rows,
                found: l.cols,
            });
        }
        let n = l.rows;
        for i in 0..n {
            let d = l[(i, i)];
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: i, value: d });
            }
            for j in (i + 1)..n {
                if l[(i, j)] != 0.0 {
                    return Err(Error::Domain("factor is not lower triangular".into()));
                }
            }
        }
        let mut matrix = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..=j).map(|k| l[(i, k)] * l[(j, k)]).sum();
                matrix[(i, j)] = s;
                matrix[(j, i)] = s;
            }
        }
        Ok(SpdMatrix { matrix, chol: l })
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    /// The lower-triangular Cholesky factor.
    pub fn chol(&self) -> &Matrix {
        &self.chol
    }

    /// Solves `self · x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), b.len())?;
        let mut x = b.to_vec();
        forward_substitute(&self.chol, &mut x);
        backward_substitute(&self.chol, &mut x);
        Ok(x)
    }

    /// Returns `L⁻¹ A L⁻ᵀ` where `L` is this matrix's Cholesky factor. The
    /// result is symmetric and similar to `A · self⁻¹`.
    pub fn whiten(&self, a: &Matrix) -> Result<Matrix> {
        check_dim(self.dim(), a.rows)?;
        check_dim(self.dim(), a.cols)?;
        let n = self.dim();
        // tmp = (L⁻¹ A)ᵀ = A L⁻ᵀ since A is symmetric.
        let mut tmp = Matrix::zeros(n, n);
        for j in 0..n {
            let mut col = a.column(j);
            forward_substitute(&self.chol, &mut col);
            for i in 0..n {
                tmp[(j, i)] = col[i];
            }
        }
        let mut out = Matrix::zeros(n, n);
        for j in 0..n {
            let mut col = tmp.column(j);
            forward_substitute(&self.chol, &mut col);
            for i in 0..n {
                out[(i, j)] = col[i];
            }
        }
        out.symmetrized_unchecked();
        Ok(out)
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.diag().iter().map(|d| d.ln()).sum::<f64>()
    }
}

impl Matrix {
    fn symmetrized_unchecked(&mut self) {
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `vᵀ m⁻¹ v`, computed as `‖L⁻¹ v‖²`.
pub fn quad_form_inv(v: &[f64], m: &SpdMatrix) -> Result<f64> {
    check_dim(m.dim(), v.len())?;
    let mut y = v.to_vec();
    forward_substitute(m.chol(), &mut y);
    Ok(y.iter().map(|x| x * x).sum())
}

pub fn trace(m: &Matrix) -> f64 {
    m.diag().iter().sum()
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &Matrix, b: &Matrix) -> Result<f64> {
    check_dim(a.cols, b.rows)?;
    check_dim(a.rows, b.cols)?;
    let mut s = 0.0;
    for i in 0..a.rows {
        for j in 0..a.cols {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    Ok(s)
}

/// `alpha·A + beta·B`, re-validated as SPD.
pub fn mat_add_scaled(a: &SpdMatrix, alpha: f64, b: &SpdMatrix, beta: f64) -> Result<SpdMatrix> {
    SpdMatrix::new(a.matrix.lin_comb(alpha, &b.matrix, beta)?)
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition
// ---------------------------------------------------------------------------

/// Eigenvalues in descending order with matching orthonormal eigenvectors
/// stored as the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct EigenDecomp {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenDecomp {
    /// `Γ diag(d) Γᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.values.len();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = (0..n)
                    .map(|k| self.vectors[(i, k)] * self.values[k] * self.vectors[(j, k)])
                    .sum();
            }
        }
        out
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k)
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps over all off-diagonal pairs until the off-diagonal Frobenius norm
/// drops below `1e-12` of the matrix norm. Eigenvalues are returned in
/// descending order; ties keep their original diagonal order.
pub fn sym_eigen(m: &Matrix) -> Result<EigenDecomp> {
    let mut a = m.symmetrized()?;
    let n = a.rows;
    let mut v = Matrix::identity(n);
    let norm = a.frobenius_norm();

    let off_norm = |a: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += 2.0 * a[(i, j)] * a[(i, j)];
            }
        }
        s.sqrt()
    };

    let mut converged = norm == 0.0 || off_norm(&a) <= JACOBI_TOL * norm;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::ConvergenceFailure { sweeps });
        }
        sweeps += 1;
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
                a[(p, p)] -= t * apq;
                a[(q, q)] += t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let arp = a[(r, p)];
                        let arq = a[(r, q)];
                        a[(r, p)] = c * arp - s * arq;
                        a[(p, r)] = a[(r, p)];
                        a[(r, q)] = s * arp + c * arq;
                        a[(q, r)] = a[(r, q)];
                    }
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = c * vrp - s * vrq;
                    v[(r, q)] = s * vrp + c * vrq;
                }
            }
        }
        converged = off_norm(&a) <= JACOBI_TOL * norm;
    }

    let raw = a.diag();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort: equal eigenvalues keep their diagonal order.
    order.sort_by(|&i, &j| raw[j].total_cmp(&raw[i]));
    let values = order.iter().map(|&i| raw[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, dst)] = v[(r, src)];
        }
    }
    Ok(EigenDecomp { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    /// Explicit inverse of a 3x3 matrix via the adjugate.
    fn adjugate_inverse(m: &Matrix) -> Matrix {
        let a = |i: usize, j: usize| m[(i, j)];
        let cof = |i: usize, j: usize| {
            let r: Vec<usize> = (0..3).filter(|&x| x != i).collect();
            let c: Vec<usize> = (0..3).filter(|&x| x != j).collect();
            let minor = a(r[0], c[0]) * a(r[1], c[1]) - a(r[0], c[1]) * a(r[1], c[0]);
            if (i + j).is_multiple_of(2) {
                minor
            } else {
                -minor
            }
        };
        let det: f64 = (0..3).map(|j| a(0, j) * cof(0, j)).sum();
        let mut inv = Matrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                inv[(i, j)] = cof(j, i) / det;
            }
        }
        inv
    }

    fn pseudo_random_spd(n: usize, seed: u64) -> Matrix {
        // Small LCG so these tests do not depend on the rng module.
        let mut state = seed;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut b = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                b[(i, j)] = next();
            }
        }
        let mut m = b.matmul(&b.transpose());
        for i in 0..n {
            m[(i, i)] += 0.5;
        }
        m
    }

    #[test]
    fn cholesky_identity_and_2x2() {
        let l = cholesky(&Matrix::identity(3)).unwrap();
        assert_eq!(l, Matrix::identity(3));

        let m = Matrix::from_rows(&[[4.0, 2.0], [2.0, 5.0]]).unwrap();
        let l = cholesky(&m).unwrap();
        let expected = Matrix::from_rows(&[[2.0, 0.0], [1.0, 2.0]]).unwrap();
        assert!(l.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(matches!(
            cholesky(&m),
            Err(Error::NotPositiveDefinite { pivot: 1, .. })
        ));
        assert!(matches!(
            SpdMatrix::new(m),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn spd_rejects_asymmetric() {
        let m = Matrix::from_rows(&[[2.0, 1.0], [0.5, 2.0]]).unwrap();
        assert!(matches!(SpdMatrix::new(m), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn quad_form_small_cases() {
        let v = [1.0, 1.0];
        assert_close(
            quad_form_inv(&v, &SpdMatrix::identity(2)).unwrap(),
            2.0,
            1e-15,
        );

        let m = SpdMatrix::from_rows(&[[4.0, 0.0], [0.0, 9.0]]).unwrap();
        assert_close(quad_form_inv(&[1.0, 0.0], &m).unwrap(), 0.25, 1e-15);
        assert_eq!(quad_form_inv(&[0.0, 0.0], &m).unwrap(), 0.0);
        assert!(matches!(
            quad_form_inv(&[1.0], &m),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn quad_form_matches_adjugate_inverse() {
        for seed in 1..20 {
            let m = pseudo_random_spd(3, seed);
            let inv = adjugate_inverse(&m);
            let v = [0.3 * seed as f64 - 2.0, 1.1, -0.7 + 0.05 * seed as f64];
            let w = inv.matvec(&v);
            let oracle: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
            let spd = SpdMatrix::new(m).unwrap();
            let got = quad_form_inv(&v, &spd).unwrap();
            assert!((got - oracle).abs() <= 1e-10 * oracle.abs().max(1.0));
        }
    }

    #[test]
    fn eigen_small_cases() {
        let m = Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let e = sym_eigen(&m).unwrap();
        assert_close(e.values[0], 3.0, 1e-14);
        assert_close(e.values[1], 1.0, 1e-14);

        let e = sym_eigen(&Matrix::identity(5)).unwrap();
        assert!(e.values.iter().all(|&v| v == 1.0));
        assert_eq!(e.vectors, Matrix::identity(5));
    }

    #[test]
    fn eigen_round_trip_random_spd() {
        for seed in 0..25 {
            let m = pseudo_random_spd(5, seed);
            let e = sym_eigen(&m).unwrap();
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
            assert!(e.reconstruct().max_abs_diff(&m) < 1e-10);
            let gtg = e.vectors.transpose().matmul(&e.vectors);
            assert!(gtg.max_abs_diff(&Matrix::identity(5)) < 1e-10);
        }
    }

    #[test]
    fn eigen_ties_keep_diagonal_order() {
        let m = Matrix::from_diag(&[1.0, 3.0, 3.0, 2.0]);
        let e = sym_eigen(&m).unwrap();
        assert_eq!(e.values, vec![3.0, 3.0, 2.0, 1.0]);
        assert_eq!(e.vector(0), vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(e.vector(1), vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn traces_and_combinations() {
        assert_eq!(trace(&Matrix::identity(4)), 4.0);
        let a = pseudo_random_spd(4, 7);
        assert_close(
            trace_product(&Matrix::identity(4), &a).unwrap(),
            trace(&a),
            1e-14,
        );
        let spd = SpdMatrix::new(a.clone()).unwrap();
        let half = mat_add_scaled(&spd, 0.5, &spd, 0.5).unwrap();
        assert!(half.matrix().max_abs_diff(&a) < 1e-14);
        let neg = mat_add_scaled(&spd, 1.0, &spd, -2.0);
        assert!(matches!(neg, Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn whiten_is_similar_to_product_with_inverse() {
        let a = pseudo_random_spd(4, 3);
        let b = SpdMatrix::new(pseudo_random_spd(4, 9)).unwrap();
        let w = b.whiten(&a).unwrap();
        // tr(A B⁻¹) through solves, column by column.
        let mut tr = 0.0;
        for j in 0..4 {
            let e: Vec<f64> = (0..4).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
            let col = b.solve(&e).unwrap();
            tr += a.row(j).iter().zip(&col).map(|(x, y)| x * y).sum::<f64>();
        }
        assert!((trace(&w) - tr).abs() < 1e-10);
    }

    #[test]
    fn from_cholesky_factor_round_trip() {
        let m = pseudo_random_spd(4, 11);
        let l = cholesky(&m).unwrap();
        let spd = SpdMatrix::from_cholesky_factor(l.clone()).unwrap();
        assert!(spd.matrix().max_abs_diff(&m) < 1e-12);
        assert!(cholesky(spd.matrix()).unwrap().max_abs_diff(&l) < 1e-10);
    }
}
