//! Small dense linear algebra: row-major matrices, LU with partial pivoting,
//! and Perron root estimation for non-negative matrices.

use std::ops::{Index, IndexMut};

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is singular (pivot {pivot:e} in column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("power iteration did not converge after {iterations} iterations (bracket [{lower}, {upper}])")]
    NoConvergence {
        iterations: usize,
        lower: f64,
        upper: f64,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
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

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn mul(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, other.rows, "matrix product dimensions");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "matrix-vector dimensions");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// `I - self`.
    pub fn identity_minus(&self) -> Matrix<T> {
        Matrix::from_fn(
            self.rows,
            self.cols,
            |r, c| if r == c { T::one() } else { T::zero() } - self[(r, c)],
        )
    }

    pub fn lu(&self) -> Result<Lu<T>, LinalgError> {
        Lu::factor(self.clone())
    }

    pub fn solve(&self, rhs: &[T]) -> Result<Vec<T>, LinalgError> {
        Ok(self.lu()?.solve(rhs))
    }

    /// Determinant via LU; exact zero for singular input.
    pub fn determinant(&self) -> T {
        match self.lu() {
            Ok(lu) => lu.determinant(),
            Err(_) => T::zero(),
        }
    }

    /// Pattern matrix: 1 where the entry is strictly positive, else 0.
    pub fn positivity_pattern(&self) -> Vec<bool> {
        self.data.iter().map(|&x| x > T::zero()).collect()
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

/// `PA = LU` with unit lower-triangular `L`, stored compactly.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
    parity_odd: bool,
}

impl<T: Scalar> Lu<T> {
    fn factor(mut a: Matrix<T>) -> Result<Self, LinalgError> {
        if a.rows != a.cols {
            return Err(LinalgError::Dimension(format!(
                "{}x{} is not square",
                a.rows, a.cols
            )));
        }
        let n = a.rows;
        let mut perm: Vec<usize> = (0..n).collect();
        let mut parity_odd = false;
        for col in 0..n {
            let (pivot_row, pivot_abs) =
                (col..n)
                    .map(|r| (r, a[(r, col)].abs()))
                    .fold(
                        (col, -T::one()),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if !(pivot_abs > T::zero()) {
                return Err(LinalgError::Singular {
                    column: col,
                    pivot: pivot_abs.to_f64_lossy(),
                });
            }
            if pivot_row != col {
                for c in 0..n {
                    a.data.swap(col * n + c, pivot_row * n + c);
                }
                perm.swap(col, pivot_row);
                parity_odd = !parity_odd;
            }
            let pivot = a[(col, col)];
            for r in col + 1..n {
                let factor = a[(r, col)] / pivot;
                a[(r, col)] = factor;
                if factor != T::zero() {
                    for c in col + 1..n {
                        let delta = factor * a[(col, c)];
                        a[(r, c)] -= delta;
                    }
                }
            }
        }
        Ok(Lu {
            lu: a,
            perm,
            parity_odd,
        })
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let n = self.lu.rows;
        assert_eq!(rhs.len(), n, "right-hand side length");
        let mut x: Vec<T> = self.perm.iter().map(|&p| rhs[p]).collect();
        for r in 0..n {
            for c in 0..r {
                let delta = self.lu[(r, c)] * x[c];
                x[r] -= delta;
            }
        }
        for r in (0..n).rev() {
            for c in r + 1..n {
                let delta = self.lu[(r, c)] * x[c];
                x[r] -= delta;
            }
            x[r] /= self.lu[(r, r)];
        }
        x
    }

    pub fn determinant(&self) -> T {
        let d = (0..self.lu.rows)
            .map(|i| self.lu[(i, i)])
            .fold(T::one(), |a, b| a * b);
        if self.parity_odd {
            -d
        } else {
            d
        }
    }
}

/// Result of [`perron_root`]: Collatz–Wielandt bracket and the positive
/// eigenvector estimate.
#[derive(Debug, Clone)]
pub struct PerronEstimate<T> {
    pub root: T,
    pub lower: T,
    pub upper: T,
    pub vector: Vec<T>,
    pub iterations: usize,
}

/// Perron root of a non-negative primitive matrix by power iteration.
///
/// Stops once the Collatz–Wielandt bracket `min_i (Av)_i/v_i <= rho <=
/// max_i (Av)_i/v_i` is narrower than `rel_tol * upper`. Imprimitive
/// (periodic) matrices must be squared by the caller first.
pub fn perron_root<T: Scalar>(
    a: &Matrix<T>,
    rel_tol: T,
    max_iter: usize,
) -> Result<PerronEstimate<T>, LinalgError> {
    let n = a.rows();
    if n != a.cols() {
        return Err(LinalgError::Dimension(
            "Perron root needs a square matrix".into(),
        ));
    }
    if a.data.iter().all(|&x| x == T::zero()) {
        return Ok(PerronEstimate {
            root: T::zero(),
            lower: T::zero(),
            upper: T::zero(),
            vector: vec![T::one(); n],
            iterations: 0,
        });
    }
    let mut v = vec![T::one(); n];
    let (mut lower, mut upper) = (T::zero(), T::infinity());
    for it in 1..=max_iter {
        let w = a.mul_vec(&v);
        lower = T::infinity();
        upper = T::zero();
        for (wi, vi) in w.iter().zip(&v) {
            let ratio = *wi / *vi;
            lower = lower.min(ratio);
            upper = upper.max(ratio);
        }
        let norm = w.iter().fold(T::zero(), |m, &x| m.max(x));
        if !(norm > T::zero()) {
            return Err(LinalgError::NoConvergence {
                iterations: it,
                lower: 0.0,
                upper: 0.0,
            });
        }
        v = w.iter().map(|&x| x / norm).collect();
        if v.iter().any(|&x| !(x > T::zero())) {
            // not yet positive: keep iterating, a primitive matrix fills in
            v.iter_mut().for_each(|x| *x += T::epsilon());
            continue;
        }
        if upper - lower <= rel_tol * upper {
            let root = (upper + lower) * T::of(0.5);
            return Ok(PerronEstimate {
                root,
                lower,
                upper,
                vector: v,
                iterations: it,
            });
        }
    }
    Err(LinalgError::NoConvergence {
        iterations: max_iter,
        lower: lower.to_f64_lossy(),
        upper: upper.to_f64_lossy(),
    })
}

/// Boolean product pattern of `Γ(A)` and `Γ(B)`.
pub fn pattern_product(a: &[bool], b: &[bool], n: usize) -> Vec<bool> {
    let mut out = vec![false; n * n];
    for i in 0..n {
        for k in 0..n {
            if a[i * n + k] {
                for j in 0..n {
                    out[i * n + j] |= b[k * n + j];
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_and_determinant() {
        let a = Matrix::from_fn(3, 3, |r, c| {
            [[2.0f64, 1.0, 1.0], [4.0, -6.0, 0.0], [-2.0, 7.0, 2.0]][r][c]
        });
        let x = a.solve(&[5.0, -2.0, 9.0]).unwrap();
        for (xi, want) in x.iter().zip([1.0, 1.0, 2.0]) {
            assert!((xi - want).abs() < 1e-12);
        }
        assert!((a.determinant() - (-16.0)).abs() < 1e-12);
    }

    #[test]
    fn singular_is_reported() {
        let a = Matrix::from_fn(2, 2, |r, _| if r == 0 { 1.0 } else { 2.0 });
        assert!(matches!(
            a.solve(&[1.0, 2.0]),
            Err(LinalgError::Singular { .. })
        ));
        assert_eq!(a.determinant(), 0.0);
    }

    #[test]
    fn row_swap_flips_sign() {
        let a = Matrix::from_fn(2, 2, |r, c| if r == c { 0.0 } else { 1.0 });
        assert_eq!(a.determinant(), -1.0);
    }

    #[test]
    fn perron_root_of_known_matrices() {
        let a = Matrix::from_fn(2, 2, |r, c| [[2.0f64, 1.0], [1.0, 2.0]][r][c]);
        let est = perron_root(&a, 1e-12, 1000).unwrap();
        assert!((est.root - 3.0).abs() < 1e-10);
        assert_eq!(
            perron_root(&Matrix::<f64>::zeros(3, 3), 1e-12, 10)
                .unwrap()
                .root,
            0.0
        );
    }

    #[test]
    fn pattern_product_fills() {
        // 3-cycle: Γ(A^3) is the identity pattern
        let n = 3;
        let a: Vec<bool> = (0..9).map(|k| k / 3 == (k % 3 + 2) % 3).collect();
        let a3 = pattern_product(&pattern_product(&a, &a, n), &a, n);
        for i in 0..n {
            for j in 0..n {
                assert_eq!(a3[i * n + j], i == j);
            }
        }
    }
}
