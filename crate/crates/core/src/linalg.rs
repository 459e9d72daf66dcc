//! Small dense complex matrices and vector helpers for qudit-sized problems.

use std::ops::{Index, IndexMut, Mul};

use crate::scalar::{one, zero, Real, C};

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<C<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = one();
        }
        m
    }

    pub fn from_diagonal(diag: &[C<T>]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> C<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<C<T>>]) -> Self {
        let rows = columns.first().map_or(0, Vec::len);
        Self::from_fn(rows, columns.len(), |r, c| columns[c][r])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, c: usize) -> Vec<C<T>> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn mul_vec(&self, v: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(v.len(), self.cols, "dimension mismatch in mul_vec");
        (0..self.rows)
            .map(|r| {
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .fold(zero(), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        Self::from_fn(self.rows * other.rows, self.cols * other.cols, |r, c| {
            self[(r / other.rows, c / other.cols)] * other[(r % other.rows, c % other.cols)]
        })
    }

    pub fn trace(&self) -> C<T> {
        (0..self.rows.min(self.cols)).fold(zero(), |acc, i| acc + self[(i, i)])
    }

    pub fn scale(&self, s: C<T>) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(T::zero(), T::max)
    }

    /// `max |(M†M − I)_ij|`.
    pub fn unitarity_defect(&self) -> T {
        (&self.adjoint() * self).max_abs_diff(&Self::identity(self.cols))
    }

    pub fn is_diagonal(&self, tol: T) -> bool {
        (0..self.rows).all(|r| (0..self.cols).all(|c| r == c || self[(r, c)].norm() <= tol))
    }
}

impl<T: Real> Index<(usize, usize)> for CMatrix<T> {
    type Output = C<T>;
    fn index(&self, (r, c): (usize, usize)) -> &C<T> {
        &self.data[r * self.cols + c]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for CMatrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C<T> {
        &mut self.data[r * self.cols + c]
    }
}

impl<T: Real> Mul for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn mul(self, rhs: &CMatrix<T>) -> CMatrix<T> {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in matrix product");
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a.norm_sqr() == T::zero() {
                    continue;
                }
                for c in 0..rhs.cols {
                    out[(r, c)] += a * rhs[(k, c)];
                }
            }
        }
        out
    }
}

/// `⟨a|b⟩`.
pub fn inner<T: Real>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    a.iter().zip(b).fold(zero(), |acc, (x, y)| acc + x.conj() * y)
}

pub fn norm_sqr<T: Real>(v: &[C<T>]) -> T {
    v.iter().fold(T::zero(), |acc, x| acc + x.norm_sqr())
}

pub fn normalized<T: Real>(v: &[C<T>]) -> Vec<C<T>> {
    let n = norm_sqr(v).sqrt();
    v.iter().map(|x| x / n).collect()
}

/// Removes the global phase of `candidate` relative to `reference`.
///
/// The phase is taken from the component with the largest overlap
/// `|conj(reference_i) candidate_i|`.
pub fn align_global_phase<T: Real>(reference: &[C<T>], candidate: &[C<T>]) -> Vec<C<T>> {
    let best = reference
        .iter()
        .zip(candidate)
        .map(|(r, c)| r.conj() * c)
        .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap_or(std::cmp::Ordering::Equal));
    match best {
        Some(z) if z.norm() > T::zero() => {
            let rot = z.conj() / z.norm();
            candidate.iter().map(|x| x * rot).collect()
        }
        _ => candidate.to_vec(),
    }
}

/// `|⟨a|b⟩|²` for normalized vectors.
pub fn fidelity<T: Real>(a: &[C<T>], b: &[C<T>]) -> T {
    inner(a, b).norm_sqr()
}

/// Largest elementwise distance after global-phase alignment.
pub fn max_diff_up_to_phase<T: Real>(reference: &[C<T>], candidate: &[C<T>]) -> T {
    align_global_phase(reference, candidate)
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).norm())
        .fold(T::zero(), T::max)
}
