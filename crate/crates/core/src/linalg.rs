//! Small dense complex matrices (the r×r and 2r×2r objects of the model).
//!
//! N×N work goes through `faer`; these helpers exist for matrices of size a
//! handful, where allocation-free elimination matters more than blocking.

use num_complex::Complex64 as C;
use std::ops::{Index, IndexMut};

#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat { rows, cols, data: vec![C::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C::new(1.0, 0.0);
        }
        m
    }

    /// Builds from row vectors; `None` if the rows are ragged.
    pub fn from_rows(rows: &[Vec<C>]) -> Option<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if rows.iter().any(|x| x.len() != c) {
            return None;
        }
        Some(CMat { rows: r, cols: c, data: rows.iter().flatten().copied().collect() })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> C) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn to_rows(&self) -> Vec<Vec<C>> {
        self.data.chunks(self.cols.max(1)).take(self.rows).map(|c| c.to_vec()).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, rhs: &CMat) -> Self {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[C]) -> Vec<C> {
        assert_eq!(self.cols, x.len());
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * x[j]).sum())
            .collect()
    }

    /// `x* A y`.
    pub fn form(&self, x: &[C], y: &[C]) -> C {
        let ay = self.matvec(y);
        x.iter().zip(&ay).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn scale(&self, s: C) -> Self {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn sub(&self, rhs: &CMat) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add(&self, rhs: &CMat) -> Self {
        self.sub(&rhs.scale(C::new(-1.0, 0.0)))
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn det(&self) -> C {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        let mut buf = self.data.clone();
        det_in_place(&mut buf, self.rows)
    }

    /// Inverse by Gauss-Jordan with partial pivoting; `None` when a pivot
    /// vanishes.
    pub fn inverse(&self) -> Option<Self> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[(i, k)].norm().total_cmp(&a[(j, k)].norm()))?;
            if a[(p, k)].norm() == 0.0 || !a[(p, k)].is_finite() {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(p * n + j, k * n + j);
                    inv.data.swap(p * n + j, k * n + j);
                }
            }
            let piv = a[(k, k)].inv();
            for j in 0..n {
                a[(k, j)] *= piv;
                inv[(k, j)] *= piv;
            }
            for i in 0..n {
                if i == k {
                    continue;
                }
                let f = a[(i, k)];
                if f == C::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    let akj = a[(k, j)];
                    let ikj = inv[(k, j)];
                    a[(i, j)] -= f * akj;
                    inv[(i, j)] -= f * ikj;
                }
            }
        }
        Some(inv)
    }

    /// Matrix with row `i` and column `j` removed.
    pub fn minor(&self, i: usize, j: usize) -> Self {
        let mut out = Vec::with_capacity((self.rows - 1) * (self.cols - 1));
        for a in (0..self.rows).filter(|&a| a != i) {
            for b in (0..self.cols).filter(|&b| b != j) {
                out.push(self[(a, b)]);
            }
        }
        CMat { rows: self.rows - 1, cols: self.cols - 1, data: out }
    }

    pub fn as_slice(&self) -> &[C] {
        &self.data
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C;
    fn index(&self, (i, j): (usize, usize)) -> &C {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C {
        &mut self.data[i * self.cols + j]
    }
}

/// Determinant of the row-major n×n matrix in `a` (destroyed).
pub fn det_in_place(a: &mut [C], n: usize) -> C {
    let mut det = C::new(1.0, 0.0);
    for k in 0..n {
        let mut p = k;
        let mut best = a[k * n + k].norm_sqr();
        for i in k + 1..n {
            let v = a[i * n + k].norm_sqr();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            return C::new(0.0, 0.0);
        }
        if p != k {
            for j in k..n {
                a.swap(p * n + j, k * n + j);
            }
            det = -det;
        }
        let piv = a[k * n + k];
        det *= piv;
        let inv = piv.inv();
        for i in k + 1..n {
            let f = a[i * n + k] * inv;
            if f == C::new(0.0, 0.0) {
                continue;
            }
            for j in k + 1..n {
                let akj = a[k * n + j];
                a[i * n + j] -= f * akj;
            }
        }
    }
    det
}

pub fn dot(x: &[C], y: &[C]) -> C {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm2(x: &[C]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}
