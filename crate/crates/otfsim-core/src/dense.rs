//! Minimal dense complex matrix support.
//!
//! This is the oracle and desk-scale path: structural expansions of block
//! matrices, the conventional receivers, and reference inverses via
//! partial-pivot elimination. Nothing here is operation-counted and nothing
//! here exploits the delay-Doppler structure.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Cplx;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMat<T: Scalar> {
    rows: usize,
    cols: usize,
    data: Vec<Cplx<T>>,
}

impl<T: Scalar> DenseMat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Cplx::new(T::zero(), T::zero()); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            out[(i, i)] = Cplx::new(T::one(), T::zero());
        }
        out
    }

    pub fn from_rows(rows: Vec<Vec<Cplx<T>>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[Cplx<T>] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self * other`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.norm_sqr() == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    /// `self * v` for a vector.
    pub fn mul_vec(&self, v: &[Cplx<T>]) -> Vec<Cplx<T>> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(Cplx::new(T::zero(), T::zero()), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    /// `self + scale * other`.
    pub fn add_scaled(&self, other: &Self, scale: Cplx<T>) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
        out
    }

    /// Add `rho` to every diagonal entry.
    pub fn add_diagonal(&mut self, rho: T) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            self[(i, i)] += Cplx::new(rho, T::zero());
        }
    }

    pub fn fro_norm(&self) -> T {
        self.data
            .iter()
            .map(|v| v.norm_sqr())
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .map(|v| v.norm())
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Solve `self * X = rhs` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, rhs: &Self) -> Result<Self> {
        assert_eq!(self.rows, self.cols, "solve requires a square matrix");
        assert_eq!(self.rows, rhs.rows);
        let n = self.rows;
        let mut a = self.clone();
        let mut b = rhs.clone();
        let tiny =
            T::epsilon() * T::of_usize(n.max(1)) * self.max_abs().max(T::min_positive_value());
        for col in 0..n {
            let (pivot_row, pivot_mag) =
                (col..n)
                    .map(|r| (r, a[(r, col)].norm()))
                    .fold(
                        (col, T::zero()),
                        |best, cand| if cand.1 > best.1 { cand } else { best },
                    );
            if pivot_mag <= tiny {
                return Err(Error::SingularDense(col));
            }
            if pivot_row != col {
                for j in 0..n {
                    a.data.swap(col * n + j, pivot_row * n + j);
                }
                for j in 0..b.cols {
                    b.data.swap(col * b.cols + j, pivot_row * b.cols + j);
                }
            }
            let inv_pivot = Cplx::new(T::one(), T::zero()) / a[(col, col)];
            for r in (col + 1)..n {
                let factor = a[(r, col)] * inv_pivot;
                if factor.norm_sqr() == T::zero() {
                    continue;
                }
                for j in col..n {
                    let v = a[(col, j)];
                    a[(r, j)] -= factor * v;
                }
                for j in 0..b.cols {
                    let v = b[(col, j)];
                    b[(r, j)] -= factor * v;
                }
            }
        }
        // Back substitution.
        for col in (0..n).rev() {
            let inv_pivot = Cplx::new(T::one(), T::zero()) / a[(col, col)];
            for j in 0..b.cols {
                let mut acc = b[(col, j)];
                for k in (col + 1)..n {
                    acc -= a[(col, k)] * b[(k, j)];
                }
                b[(col, j)] = acc * inv_pivot;
            }
        }
        Ok(b)
    }

    /// Dense inverse via [`DenseMat::solve`] against the identity.
    pub fn invert(&self) -> Result<Self> {
        self.solve(&Self::identity(self.rows))
    }
}

impl<T: Scalar> Index<(usize, usize)> for DenseMat<T> {
    type Output = Cplx<T>;
    fn index(&self, (r, c): (usize, usize)) -> &Cplx<T> {
        &self.data[r * self.cols + c]
    }
}

impl<T: Scalar> IndexMut<(usize, usize)> for DenseMat<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Cplx<T> {
        &mut self.data[r * self.cols + c]
    }
}
