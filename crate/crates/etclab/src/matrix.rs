//! Dense matrix kernels used across the toolkit.
//!
//! Everything here is plain row-major `f64` storage with hand-rolled
//! factorizations: a cyclic Jacobi eigensolver for symmetric matrices,
//! partially pivoted LU for linear solves, and Cholesky as a positive
//! definiteness probe. The sizes in play (state dimension 6, fleets of
//! tens of agents, Kronecker-lifted Lyapunov systems up to a few hundred
//! rows) are small enough that clarity and exact reproducibility matter
//! more than cache tuning.
//!
//! Shape mismatches in arithmetic are programmer errors and panic.
//! Data-dependent failures (singularity, asymmetry, lost convergence)
//! are reported through [`MatrixError`].

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

/// Errors from matrix construction and factorization.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatrixError {
    #[error("invalid matrix data: {0}")]
    InvalidData(String),
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("matrix contains non-finite entries")]
    NotFinite,
    #[error("matrix is not symmetric (max |a_ij - a_ji| = {max_asymmetry:.3e})")]
    NotSymmetric { max_asymmetry: f64 },
    #[error("eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("matrix is singular to working precision")]
    Singular,
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Eigendecomposition of a symmetric matrix.
///
/// Eigenvalues are sorted ascending; `eigenvectors` holds the matching
/// orthonormal eigenvectors as columns. Each column is normalized so that
/// its entry of largest magnitude (lowest index on ties) is positive,
/// which makes decompositions reproducible across runs and platforms.
#[derive(Debug, Clone)]
pub struct SymEigResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from nested rows, rejecting empty or ragged input.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Matrix, MatrixError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(MatrixError::InvalidData(
                "matrix needs at least one row and one column".into(),
            ));
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(MatrixError::InvalidData(format!(
                    "row {} has {} entries, expected {}",
                    i,
                    row.len(),
                    cols
                )));
            }
            data.extend_from_slice(row);
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(MatrixError::NotFinite);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Matrix {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Matrix {
        let mut m = Matrix::zeros(entries.len(), entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// All entries in row-major order.
    pub fn row_major_data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn symmetrized(&self) -> Matrix {
        assert_eq!(self.rows, self.cols, "cannot symmetrize a non-square matrix");
        Matrix::from_fn(self.rows, self.cols, |i, j| {
            0.5 * (self[(i, j)] + self[(j, i)])
        })
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        assert_eq!(self.rows, self.cols, "trace needs a square matrix");
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    /// Largest entrywise difference to `other`; both shapes must match.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in comparison");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Copies `block` into this matrix with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        assert!(
            r0 + block.rows <= self.rows && c0 + block.cols <= self.cols,
            "block does not fit at ({}, {})",
            r0,
            c0
        );
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    /// Extracts the `rows x cols` submatrix whose top-left corner is `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
        assert!(
            r0 + rows <= self.rows && c0 + cols <= self.cols,
            "block exceeds matrix bounds"
        );
        Matrix::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = self.row(i);
            out[i] = row.iter().zip(v).map(|(a, x)| a * x).sum();
        }
        out
    }

    /// Evaluates the quadratic form `x' * self * x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        assert_eq!(self.rows, self.cols, "quadratic form needs a square matrix");
        assert_eq!(self.rows, x.len(), "quadratic form dimension mismatch");
        let mut acc = 0.0;
        for i in 0..self.rows {
            let row = self.row(i);
            let mut inner = 0.0;
            for j in 0..self.cols {
                inner += row[j] * x[j];
            }
            acc += x[i] * inner;
        }
        acc
    }

    /// Kronecker product `self (x) other`.
    pub fn kron(&self, other: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let f = self[(i, j)];
                if f == 0.0 {
                    continue;
                }
                for p in 0..other.rows {
                    for q in 0..other.cols {
                        out[(i * other.rows + p, j * other.cols + q)] = f * other[(p, q)];
                    }
                }
            }
        }
        out
    }

    /// Eigendecomposition by cyclic Jacobi sweeps.
    ///
    /// The input must be square, finite, and symmetric within
    /// `1e-10 * (1 + max|a_ij|)`; tiny asymmetries from accumulated
    /// floating-point noise are averaged away before iterating.
    pub fn sym_eig(&self) -> Result<SymEigResult, MatrixError> {
        let n = self.require_square()?;
        if !self.is_finite() {
            return Err(MatrixError::NotFinite);
        }
        let asym = self.max_asymmetry();
        if asym > 1e-10 * (1.0 + self.max_abs()) {
            return Err(MatrixError::NotSymmetric {
                max_asymmetry: asym,
            });
        }
        let mut b = self.symmetrized();
        let mut v = Matrix::identity(n);
        let tol = 1e-14 * (1.0 + b.frobenius_norm());
        const MAX_SWEEPS: usize = 100;
        let mut converged = false;
        for _ in 0..MAX_SWEEPS {
            if b.off_diagonal_norm() <= tol {
                converged = true;
                break;
            }
            for p in 0..n - 1 {
                for q in p + 1..n {
                    let apq = b[(p, q)];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (b[(q, q)] - b[(p, p)]) / (2.0 * apq);
                    let t = if theta.abs() > 1e12 {
                        1.0 / (2.0 * theta)
                    } else {
                        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                    };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    let tau = s / (1.0 + c);
                    let bpp = b[(p, p)];
                    let bqq = b[(q, q)];
                    b[(p, p)] = bpp - t * apq;
                    b[(q, q)] = bqq + t * apq;
                    b[(p, q)] = 0.0;
                    b[(q, p)] = 0.0;
                    for r in 0..n {
                        if r == p || r == q {
                            continue;
                        }
                        let brp = b[(r, p)];
                        let brq = b[(r, q)];
                        b[(r, p)] = brp - s * (brq + tau * brp);
                        b[(p, r)] = b[(r, p)];
                        b[(r, q)] = brq + s * (brp - tau * brq);
                        b[(q, r)] = b[(r, q)];
                    }
                    for r in 0..n {
                        let vrp = v[(r, p)];
                        let vrq = v[(r, q)];
                        v[(r, p)] = vrp - s * (vrq + tau * vrp);
                        v[(r, q)] = vrq + s * (vrp - tau * vrq);
                    }
                }
            }
        }
        if !converged && b.off_diagonal_norm() > tol {
            return Err(MatrixError::NoConvergence { sweeps: MAX_SWEEPS });
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| b[(i, i)].total_cmp(&b[(j, j)]));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| b[(i, i)]).collect();
        let mut eigenvectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
        for c in 0..n {
            let mut lead = 0;
            for r in 1..n {
                if eigenvectors[(r, c)].abs() > eigenvectors[(lead, c)].abs() {
                    lead = r;
                }
            }
            if eigenvectors[(lead, c)] < 0.0 {
                for r in 0..n {
                    eigenvectors[(r, c)] = -eigenvectors[(r, c)];
                }
            }
        }
        Ok(SymEigResult {
            eigenvalues,
            eigenvectors,
        })
    }

    /// Eigenvalues only, sorted ascending.
    pub fn sym_eigenvalues(&self) -> Result<Vec<f64>, MatrixError> {
        Ok(self.sym_eig()?.eigenvalues)
    }

    /// Largest eigenvalue of the symmetric part `(self + self') / 2`.
    ///
    /// A strictly negative return value certifies that the matrix is
    /// negative definite, which is how linear matrix inequality margins
    /// are measured throughout the gain verifier.
    pub fn definiteness_margin(&self) -> Result<f64, MatrixError> {
        let eig = self.symmetrized().sym_eig()?;
        Ok(*eig
            .eigenvalues
            .last()
            .expect("square matrices have at least one eigenvalue"))
    }

    /// Solves `self * X = rhs` for a multi-column right-hand side by
    /// LU factorization with partial pivoting.
    pub fn solve_linear(&self, rhs: &Matrix) -> Result<Matrix, MatrixError> {
        let n = self.require_square()?;
        if rhs.rows != n {
            return Err(MatrixError::DimensionMismatch {
                expected: (n, rhs.cols),
                got: rhs.shape(),
            });
        }
        if !self.is_finite() || !rhs.is_finite() {
            return Err(MatrixError::NotFinite);
        }
        let mut a = self.clone();
        let mut x = rhs.clone();
        let floor = 1e-12 * self.max_abs();
        for k in 0..n {
            let mut piv = k;
            let mut best = a[(k, k)].abs();
            for i in k + 1..n {
                let m = a[(i, k)].abs();
                if m > best {
                    best = m;
                    piv = i;
                }
            }
            if best <= floor {
                return Err(MatrixError::Singular);
            }
            if piv != k {
                a.swap_rows(k, piv);
                x.swap_rows(k, piv);
            }
            let pivot = a[(k, k)];
            for i in k + 1..n {
                let f = a[(i, k)] / pivot;
                if f == 0.0 {
                    continue;
                }
                a[(i, k)] = 0.0;
                for j in k + 1..n {
                    a[(i, j)] -= f * a[(k, j)];
                }
                for j in 0..x.cols {
                    x[(i, j)] -= f * x[(k, j)];
                }
            }
        }
        for k in (0..n).rev() {
            for j in 0..x.cols {
                let mut sum = x[(k, j)];
                for i in k + 1..n {
                    sum -= a[(k, i)] * x[(i, j)];
                }
                x[(k, j)] = sum / a[(k, k)];
            }
        }
        Ok(x)
    }

    pub fn solve_vec(&self, rhs: &[f64]) -> Result<Vec<f64>, MatrixError> {
        let col = Matrix {
            rows: rhs.len(),
            cols: 1,
            data: rhs.to_vec(),
        };
        Ok(self.solve_linear(&col)?.data)
    }

    pub fn inverse(&self) -> Result<Matrix, MatrixError> {
        let n = self.require_square()?;
        self.solve_linear(&Matrix::identity(n))
    }

    /// Lower-triangular Cholesky factor, or `None` when the matrix is not
    /// square, not symmetric, or not positive definite.
    pub fn cholesky(&self) -> Option<Matrix> {
        if self.rows != self.cols || !self.is_finite() {
            return None;
        }
        if self.max_asymmetry() > 1e-10 * (1.0 + self.max_abs()) {
            return None;
        }
        let n = self.rows;
        let mut l = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut sum = self[(i, j)];
                for k in 0..j {
                    sum -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return None;
                    }
                    l[(i, i)] = sum.sqrt();
                } else {
                    l[(i, j)] = sum / l[(j, j)];
                }
            }
        }
        Some(l)
    }

    fn require_square(&self) -> Result<usize, MatrixError> {
        if self.rows == self.cols {
            Ok(self.rows)
        } else {
            Err(MatrixError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    fn off_diagonal_norm(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                if i != j {
                    acc += self[(i, j)] * self[(i, j)];
                }
            }
        }
        acc.sqrt()
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(i * self.cols + c, j * self.cols + c);
        }
    }
}

/// Concatenates equally tall matrices left to right.
pub fn hstack(parts: &[&Matrix]) -> Matrix {
    assert!(!parts.is_empty(), "hstack needs at least one matrix");
    let rows = parts[0].rows;
    assert!(
        parts.iter().all(|m| m.rows == rows),
        "hstack needs equal row counts"
    );
    let cols = parts.iter().map(|m| m.cols).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut c0 = 0;
    for m in parts {
        out.set_block(0, c0, m);
        c0 += m.cols;
    }
    out
}

/// Concatenates equally wide matrices top to bottom.
pub fn vstack(parts: &[&Matrix]) -> Matrix {
    assert!(!parts.is_empty(), "vstack needs at least one matrix");
    let cols = parts[0].cols;
    assert!(
        parts.iter().all(|m| m.cols == cols),
        "vstack needs equal column counts"
    );
    let rows = parts.iter().map(|m| m.rows).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut r0 = 0;
    for m in parts {
        out.set_block(r0, 0, m);
        r0 += m.rows;
    }
    out
}

/// Assembles `[[a, b], [c, d]]` from four conforming blocks.
pub fn block2x2(a: &Matrix, b: &Matrix, c: &Matrix, d: &Matrix) -> Matrix {
    assert_eq!(a.rows, b.rows, "top blocks need equal row counts");
    assert_eq!(c.rows, d.rows, "bottom blocks need equal row counts");
    assert_eq!(a.cols, c.cols, "left blocks need equal column counts");
    assert_eq!(b.cols, d.cols, "right blocks need equal column counts");
    let mut out = Matrix::zeros(a.rows + c.rows, a.cols + b.cols);
    out.set_block(0, 0, a);
    out.set_block(0, a.cols, b);
    out.set_block(a.rows, 0, c);
    out.set_block(a.rows, a.cols, d);
    out
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl std::ops::Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix sum shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl std::ops::Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix difference shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl std::ops::Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matrix product mismatch: {}x{} times {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let f = self[(i, k)];
                if f == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += f * rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl std::ops::Mul<f64> for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: f64) -> Matrix {
        self.scale(rhs)
    }
}

impl std::ops::Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<&[f64]> = (0..self.rows).map(|i| self.row(i)).collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        Matrix::from_rows(rows).map_err(de::Error::custom)
    }
}
