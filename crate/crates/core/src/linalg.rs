//! Dense linear algebra kernel: a row-major matrix, symmetric matrices with a
//! cyclic Jacobi eigensolver, operator norms, diagonal scaling and a
//! partial-pivoting linear solve.

use std::fmt::Write as _;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Hard cap on Jacobi sweeps before reporting [`Error::NoConvergence`].
pub const MAX_SWEEPS: usize = 64;

const SYMMETRY_TOL: f64 = 1e-12;
const JACOBI_TOL: f64 = 1e-14;
const SINGULAR_TOL: f64 = 1e-13;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d = *d + a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: x.len(),
            });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// Row-major CSV dump, one matrix row per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Square symmetric matrix. Construction checks symmetry to within
/// `1e-12 * max|entry|` and then symmetrizes exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T>(Matrix<T>);

impl<T: Scalar> SymMatrix<T> {
    pub fn new(m: Matrix<T>) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::DimensionMismatch {
                expected: m.rows,
                found: m.cols,
            });
        }
        let scale = m.max_abs();
        let mut asym = T::zero();
        for i in 0..m.rows {
            for j in i + 1..m.cols {
                asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        if asym > T::lit(SYMMETRY_TOL) * scale {
            return Err(Error::NotSymmetric {
                asymmetry: asym.as_f64(),
            });
        }
        Ok(Self::from_upper(m))
    }

    /// Mirrors the upper triangle of `m` (assumed square) into the lower one.
    pub(crate) fn from_upper(mut m: Matrix<T>) -> Self {
        let two = T::lit(2.0);
        for i in 0..m.rows {
            for j in i + 1..m.cols {
                let v = (m[(i, j)] + m[(j, i)]) / two;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self(m)
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn zeros(p: usize) -> Self {
        Self(Matrix::zeros(p, p))
    }

    pub fn identity(p: usize) -> Self {
        Self(Matrix::identity(p))
    }

    pub fn from_diag(d: &[T]) -> Self {
        Self(Matrix::from_diag(d))
    }

    pub fn order(&self) -> usize {
        self.0.rows
    }

    pub fn as_matrix(&self) -> &Matrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.0
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        self.0.column(j)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: T) -> Self {
        Self(Matrix {
            data: self.0.data.iter().map(|&v| v * c).collect(),
            ..self.0
        })
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.order() != other.order() {
            return Err(Error::DimensionMismatch {
                expected: self.order(),
                found: other.order(),
            });
        }
        Ok(Self(Matrix {
            data: self
                .0
                .data
                .iter()
                .zip(&other.0.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            ..self.0
        }))
    }
}

impl<T> Index<(usize, usize)> for SymMatrix<T> {
    type Output = T;

    fn index(&self, idx: (usize, usize)) -> &T {
        &self.0[idx]
    }
}

/// Eigenvalues in non-increasing order with unit eigenvectors as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition<T> {
    pub eigenvalues: Vec<T>,
    pub eigenvectors: Matrix<T>,
}

impl<T: Scalar> EigenDecomposition<T> {
    pub fn vector(&self, j: usize) -> Vec<T> {
        self.eigenvectors.column(j)
    }

    /// `max |QᵀQ - I|`.
    pub fn orthonormality_residual(&self) -> T {
        let q = &self.eigenvectors;
        let qtq = q.transpose().matmul(q).expect("square");
        let mut worst = T::zero();
        for i in 0..qtq.rows() {
            for j in 0..qtq.cols() {
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((qtq[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// `max |Q Diag(λ) Qᵀ - A|`.
    pub fn reconstruction_residual(&self, a: &SymMatrix<T>) -> T {
        let p = a.order();
        let mut worst = T::zero();
        for i in 0..p {
            for j in 0..p {
                let v: T = (0..p)
                    .map(|k| {
                        self.eigenvectors[(i, k)] * self.eigenvalues[k] * self.eigenvectors[(j, k)]
                    })
                    .sum();
                worst = worst.max((v - a[(i, j)]).abs());
            }
        }
        worst
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Sweeps stop once the off-diagonal Frobenius mass is at most
/// `1e-14 * ‖A‖_F` (or a few machine epsilons for `f32`). Eigenvalues are
/// sorted non-increasing with a stable sort; each eigenvector is signed so its
/// largest-magnitude coordinate (lowest index on ties) is positive.
pub fn sym_eig<T: Scalar>(a: &SymMatrix<T>) -> Result<EigenDecomposition<T>> {
    let (diag, vectors) = jacobi(a, true)?;
    let p = a.order();
    let vectors = vectors.expect("vectors requested");
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| {
        diag[y]
            .partial_cmp(&diag[x])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut eigenvectors = Matrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: Vec<T> = (0..p).map(|r| vectors[(r, src)]).collect();
        let mut lead = 0;
        for (r, v) in col.iter().enumerate() {
            if v.abs() > col[lead].abs() {
                lead = r;
            }
        }
        if col[lead] < T::zero() {
            col.iter_mut().for_each(|v| *v = -*v);
        }
        for (r, v) in col.into_iter().enumerate() {
            eigenvectors[(r, dst)] = v;
        }
    }
    Ok(EigenDecomposition {
        eigenvalues: order.iter().map(|&k| diag[k]).collect(),
        eigenvectors,
    })
}

/// Eigenvalues only, sorted non-increasing.
pub fn sym_eigvals<T: Scalar>(a: &SymMatrix<T>) -> Result<Vec<T>> {
    let (mut diag, _) = jacobi(a, false)?;
    diag.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    Ok(diag)
}

fn jacobi<T: Scalar>(a: &SymMatrix<T>, want_vectors: bool) -> Result<(Vec<T>, Option<Matrix<T>>)> {
    let p = a.order();
    let mut m = a.as_matrix().clone();
    let mut v = want_vectors.then(|| Matrix::identity(p));
    let tol = T::lit(JACOBI_TOL).max(T::lit(4.0) * T::epsilon()) * m.frobenius();
    let two = T::lit(2.0);
    let huge = T::lit(1e150).min(T::max_value().sqrt());

    let off_norm = |m: &Matrix<T>| -> T {
        let mut s = T::zero();
        for i in 0..p {
            for j in i + 1..p {
                s = s + m[(i, j)] * m[(i, j)];
            }
        }
        (two * s).sqrt()
    };

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_norm(&m) <= tol {
            converged = true;
            break;
        }
        for r in 0..p.saturating_sub(1) {
            for c in r + 1..p {
                let arc = m[(r, c)];
                if arc == T::zero() {
                    continue;
                }
                let arr = m[(r, r)];
                let acc = m[(c, c)];
                let theta = (acc - arr) / (two * arc);
                let t = if theta.abs() > huge {
                    T::one() / (two * theta)
                } else {
                    let sign = if theta < T::zero() {
                        -T::one()
                    } else {
                        T::one()
                    };
                    sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let cos = T::one() / (t * t + T::one()).sqrt();
                let sin = t * cos;
                for k in 0..p {
                    let akr = m[(k, r)];
                    let akc = m[(k, c)];
                    m[(k, r)] = cos * akr - sin * akc;
                    m[(k, c)] = sin * akr + cos * akc;
                }
                for k in 0..p {
                    let ark = m[(r, k)];
                    let ack = m[(c, k)];
                    m[(r, k)] = cos * ark - sin * ack;
                    m[(c, k)] = sin * ark + cos * ack;
                }
                m[(r, r)] = arr - t * arc;
                m[(c, c)] = acc + t * arc;
                m[(r, c)] = T::zero();
                m[(c, r)] = T::zero();
                if let Some(v) = v.as_mut() {
                    for k in 0..p {
                        let vkr = v[(k, r)];
                        let vkc = v[(k, c)];
                        v[(k, r)] = cos * vkr - sin * vkc;
                        v[(k, c)] = sin * vkr + cos * vkc;
                    }
                }
            }
        }
    }
    if !converged && off_norm(&m) > tol {
        return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
    }
    let diag = (0..p).map(|i| m[(i, i)]).collect();
    Ok((diag, v))
}

/// Operator (spectral) norm `max_j |λ_j(A)|`.
pub fn op_norm<T: Scalar>(a: &SymMatrix<T>) -> Result<T> {
    let vals = sym_eigvals(a)?;
    Ok(vals.iter().fold(T::zero(), |m, v| m.max(v.abs())))
}

/// `Diag(ν) A Diag(ν)`, entry `(i, j)` equal to `ν_i ν_j a_ij`.
pub fn diag_scale<T: Scalar>(a: &SymMatrix<T>, nu: &[T]) -> Result<SymMatrix<T>> {
    let p = a.order();
    if nu.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: nu.len(),
        });
    }
    let mut out = Matrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = nu[i] * nu[j] * a[(i, j)];
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(SymMatrix(out))
}

/// Solves `a x = b` by LU factorization with partial pivoting. A pivot below
/// `1e-13 * max|a|` is reported as [`Error::Singular`].
pub fn solve_linear<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.cols(),
        });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    let threshold = T::lit(SINGULAR_TOL) * a.max_abs();
    let mut lu = a.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| {
                lu[(i, col)]
                    .abs()
                    .partial_cmp(&lu[(j, col)].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("non-empty range");
        let pivot = lu[(pivot_row, col)];
        if !(pivot.abs() > threshold) {
            return Err(Error::Singular);
        }
        if pivot_row != col {
            for k in 0..n {
                let tmp = lu[(col, k)];
                lu[(col, k)] = lu[(pivot_row, k)];
                lu[(pivot_row, k)] = tmp;
            }
            x.swap(col, pivot_row);
        }
        for r in col + 1..n {
            let factor = lu[(r, col)] / pivot;
            if factor == T::zero() {
                continue;
            }
            for k in col..n {
                lu[(r, k)] = lu[(r, k)] - factor * lu[(col, k)];
            }
            x[r] = x[r] - factor * x[col];
        }
    }
    for r in (0..n).rev() {
        let s: T = (r + 1..n).map(|k| lu[(r, k)] * x[k]).sum();
        x[r] = (x[r] - s) / lu[(r, r)];
    }
    Ok(x)
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm2<T: Scalar>(x: &[T]) -> T {
    dot(x, x).sqrt()
}
