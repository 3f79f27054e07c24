//! Small dense linear-algebra kernels: a column-major matrix, vector helpers,
//! an incrementally grown QR factorization and a dominant singular pair.

use crate::error::{ensure, Result};
use crate::scalar::Real;

/// Dense column-major matrix. Column `j` occupies `data[j*rows..(j+1)*rows]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_column_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        ensure!(
            data.len() == rows * cols,
            "matrix data length {} does not match {}x{}",
            data.len(),
            rows,
            cols
        );
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix whose columns are the given vectors, in order.
    pub fn from_columns<C: AsRef<[T]>>(rows: usize, columns: &[C]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * columns.len());
        for (j, c) in columns.iter().enumerate() {
            let c = c.as_ref();
            ensure!(
                c.len() == rows,
                "column {} has length {}, expected {}",
                j,
                c.len(),
                rows
            );
            data.extend_from_slice(c);
        }
        Ok(Matrix {
            rows,
            cols: columns.len(),
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[c * self.rows + r]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[c * self.rows + r] = v;
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn column_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[T]> {
        // chunks_exact panics on a zero chunk size
        let rows = self.rows.max(1);
        self.data.chunks_exact(rows).take(self.cols)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// `self * x` for a length-`cols` vector.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.cols);
        let mut out = vec![T::zero(); self.rows];
        for (col, &xj) in self.columns().zip(x) {
            if xj != T::zero() {
                axpy(xj, col, &mut out);
            }
        }
        out
    }

    /// `selfᵀ * y` for a length-`rows` vector.
    pub fn tr_mul_vec(&self, y: &[T]) -> Vec<T> {
        self.columns().map(|c| dot(c, y)).collect()
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm_sq<T: Real>(a: &[T]) -> T {
    dot(a, a)
}

#[inline]
pub fn norm<T: Real>(a: &[T]) -> T {
    norm_sq(a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Thin QR factorization grown one column at a time by modified Gram-Schmidt
/// with a second re-orthogonalization pass.
#[derive(Debug, Clone)]
pub(crate) struct IncrementalQr<T> {
    dim: usize,
    q: Vec<Vec<T>>,
    // upper-triangular R stored column by column: r[k] holds R[0..=k, k]
    r: Vec<Vec<T>>,
}

impl<T: Real> IncrementalQr<T> {
    pub fn new(dim: usize) -> Self {
        IncrementalQr {
            dim,
            q: Vec::new(),
            r: Vec::new(),
        }
    }

    /// Appends column `a`. Returns `false` (leaving the factorization
    /// untouched) when `a` is numerically inside the current span.
    pub fn push(&mut self, a: &[T]) -> bool {
        debug_assert_eq!(a.len(), self.dim);
        let a_norm = norm(a);
        if a_norm == T::zero() {
            return false;
        }
        let mut v = a.to_vec();
        let mut coeffs = vec![T::zero(); self.q.len() + 1];
        for _ in 0..2 {
            for (qi, ci) in self.q.iter().zip(coeffs.iter_mut()) {
                let proj = dot(qi, &v);
                axpy(-proj, qi, &mut v);
                *ci += proj;
            }
        }
        let diag = norm(&v);
        if diag <= a_norm * T::epsilon() * T::lit(64.0) {
            return false;
        }
        for x in v.iter_mut() {
            *x /= diag;
        }
        *coeffs.last_mut().expect("non-empty") = diag;
        self.q.push(v);
        self.r.push(coeffs);
        true
    }

    /// Least-squares coefficients `argmin_c ‖A c − y‖` for the pushed columns `A`.
    pub fn solve(&self, y: &[T]) -> Vec<T> {
        let k = self.q.len();
        let mut z: Vec<T> = self.q.iter().map(|qi| dot(qi, y)).collect();
        // back substitution R c = Qᵀ y
        for i in (0..k).rev() {
            let mut s = z[i];
            for (j, zj) in z.iter().enumerate().take(k).skip(i + 1) {
                s -= self.r[j][i] * *zj;
            }
            z[i] = s / self.r[i][i];
        }
        z
    }
}

/// Dominant left singular vector of the matrix whose columns are `cols`,
/// found by power iteration on `E Eᵀ` started from `start`.
///
/// Returns `None` when every column is zero. Starting from `start` makes the
/// captured energy `‖Eᵀu‖²` no smaller than `‖Eᵀ start‖² / ‖start‖²`.
pub(crate) fn dominant_left_singular<T: Real>(cols: &[&[T]], start: &[T]) -> Option<Vec<T>> {
    let p = start.len();
    // Gram matrix G = E Eᵀ (p×p, symmetric), row-major
    let mut gram = vec![T::zero(); p * p];
    for c in cols {
        for i in 0..p {
            let ci = c[i];
            if ci == T::zero() {
                continue;
            }
            let row = &mut gram[i * p..(i + 1) * p];
            for (g, &cj) in row.iter_mut().zip(c.iter()) {
                *g += ci * cj;
            }
        }
    }
    let trace: T = (0..p).map(|i| gram[i * p + i]).sum();
    if trace == T::zero() {
        return None;
    }

    let mut v = start.to_vec();
    let n0 = norm(&v);
    if n0 == T::zero() || !n0.is_finite() {
        v = vec![T::zero(); p];
        v[0] = T::one();
    } else {
        v.iter_mut().for_each(|x| *x /= n0);
    }
    let tol = T::iter_tolerance();
    let mut next = vec![T::zero(); p];
    for _ in 0..500 {
        for (i, ni) in next.iter_mut().enumerate() {
            *ni = dot(&gram[i * p..(i + 1) * p], &v);
        }
        let nn = norm(&next);
        if nn <= trace * T::epsilon() {
            // start is orthogonal to the column space; restart from the
            // largest-energy column
            let best = cols
                .iter()
                .max_by(|a, b| norm_sq(a).partial_cmp(&norm_sq(b)).expect("finite"))
                .expect("non-empty");
            let bn = norm(best);
            v = best.iter().map(|&x| x / bn).collect();
            continue;
        }
        next.iter_mut().for_each(|x| *x /= nn);
        let delta = next
            .iter()
            .zip(&v)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()));
        std::mem::swap(&mut v, &mut next);
        if delta <= tol {
            break;
        }
    }
    Some(v)
}

/// Flips `v` so that its first non-zero component is positive. Returns the
/// applied sign.
pub(crate) fn canonical_sign<T: Real>(v: &mut [T]) -> T {
    match v.iter().find(|x| **x != T::zero()) {
        Some(&first) if first < T::zero() => {
            v.iter_mut().for_each(|x| *x = -*x);
            -T::one()
        }
        _ => T::one(),
    }
}
