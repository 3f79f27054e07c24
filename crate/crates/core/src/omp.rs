//! Orthogonal Matching Pursuit.
//!
//! Each step picks the atom with the largest absolute correlation with the
//! current residual (lowest index on ties), re-fits all selected coefficients
//! by least squares through an incrementally grown QR factorization, and
//! recomputes the residual. Coding stops once `‖r‖² ≤ error_bound` or the
//! support reaches `max_sparsity`.

use rayon::prelude::*;

use crate::dict::KsvdConfig;
use crate::error::{ensure, Result};
use crate::linalg::{dot, norm, IncrementalQr, Matrix};
use crate::scalar::Real;

/// Sparse coefficient vector over a dictionary of `length` atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode<T> {
    pub length: usize,
    /// Atom indices in selection order.
    pub support: Vec<usize>,
    pub coefficients: Vec<T>,
    /// `‖y − D·code‖₂`
    pub residual_norm: T,
}

impl<T: Real> SparseCode<T> {
    pub fn empty(length: usize, residual_norm: T) -> Self {
        SparseCode {
            length,
            support: Vec::new(),
            coefficients: Vec::new(),
            residual_norm,
        }
    }

    pub fn nnz(&self) -> usize {
        self.support.len()
    }

    pub fn coefficient_of(&self, atom: usize) -> Option<T> {
        self.support
            .iter()
            .position(|&a| a == atom)
            .map(|k| self.coefficients[k])
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.length];
        for (&a, &c) in self.support.iter().zip(&self.coefficients) {
            out[a] = c;
        }
        out
    }

    /// `D · code`
    pub fn reconstruct(&self, atoms: &Matrix<T>) -> Vec<T> {
        let mut out = vec![T::zero(); atoms.rows()];
        for (&a, &c) in self.support.iter().zip(&self.coefficients) {
            for (o, &d) in out.iter_mut().zip(atoms.column(a)) {
                *o += c * d;
            }
        }
        out
    }

    /// `y − D · code`
    pub fn residual(&self, atoms: &Matrix<T>, y: &[T]) -> Vec<T> {
        let rec = self.reconstruct(atoms);
        y.iter().zip(rec).map(|(&a, b)| a - b).collect()
    }
}

/// Sparse-codes `y` over the columns of `atoms` (assumed unit-norm).
pub fn omp_solve<T: Real, D: AsRef<Matrix<T>> + ?Sized>(
    dict: &D,
    y: &[T],
    max_sparsity: usize,
    error_bound: T,
) -> Result<SparseCode<T>> {
    let atoms = dict.as_ref();
    let (p, m) = (atoms.rows(), atoms.cols());
    ensure!(
        y.len() == p,
        "signal length {} does not match dictionary dimension {}",
        y.len(),
        p
    );
    ensure!(max_sparsity >= 1, "max_sparsity must be >= 1");
    ensure!(
        error_bound >= T::zero() && !error_bound.is_nan(),
        "error_bound must be >= 0"
    );
    ensure!(
        y.iter().all(|v| v.is_finite()),
        "signal contains non-finite values"
    );

    let mut residual = y.to_vec();
    let mut res_sq = dot(&residual, &residual);
    // an exact fit leaves only rounding noise; treat that as zero
    let floor = res_sq * (T::lit(64.0) * T::epsilon()).powi(2);
    let bound = error_bound.max(floor);
    let mut support: Vec<usize> = Vec::with_capacity(max_sparsity);
    let mut coefficients: Vec<T> = Vec::new();
    let mut selected = vec![false; m];
    let mut qr = IncrementalQr::new(p);
    let limit = max_sparsity.min(m).min(p);

    while support.len() < limit && res_sq > bound {
        let mut best: Option<(usize, T)> = None;
        for (j, col) in atoms.columns().enumerate() {
            if selected[j] {
                continue;
            }
            let c = dot(col, &residual).abs();
            if best.map_or(true, |(_, b)| c > b) {
                best = Some((j, c));
            }
        }
        let Some((j, corr)) = best else { break };
        if corr == T::zero() || !qr.push(atoms.column(j)) {
            break;
        }
        selected[j] = true;
        support.push(j);
        coefficients = qr.solve(y);

        residual.copy_from_slice(y);
        for (&a, &c) in support.iter().zip(&coefficients) {
            for (r, &d) in residual.iter_mut().zip(atoms.column(a)) {
                *r -= c * d;
            }
        }
        res_sq = dot(&residual, &residual);
    }

    Ok(SparseCode {
        length: m,
        support,
        coefficients,
        residual_norm: res_sq.sqrt(),
    })
}

/// Codes every column of `signals`; element `i` equals
/// `omp_solve(dict, signals[:, i], config.max_sparsity, config.error_bound)`.
pub fn omp_batch<T: Real, D: AsRef<Matrix<T>> + Sync + ?Sized>(
    dict: &D,
    signals: &Matrix<T>,
    config: &KsvdConfig<T>,
) -> Result<Vec<SparseCode<T>>> {
    let atoms = dict.as_ref();
    ensure!(
        signals.rows() == atoms.rows() || signals.cols() == 0,
        "signal dimension {} does not match dictionary dimension {}",
        signals.rows(),
        atoms.rows()
    );
    (0..signals.cols())
        .into_par_iter()
        .map(|i| {
            omp_solve(
                atoms,
                signals.column(i),
                config.max_sparsity,
                config.error_bound,
            )
        })
        .collect()
}

/// Sequential variant of [`omp_batch`], used to check thread independence.
pub fn omp_batch_sequential<T: Real, D: AsRef<Matrix<T>> + ?Sized>(
    dict: &D,
    signals: &Matrix<T>,
    config: &KsvdConfig<T>,
) -> Result<Vec<SparseCode<T>>> {
    (0..signals.cols())
        .map(|i| {
            omp_solve(
                dict,
                signals.column(i),
                config.max_sparsity,
                config.error_bound,
            )
        })
        .collect()
}

/// Largest absolute inner product between distinct columns.
pub fn mutual_coherence<T: Real>(atoms: &Matrix<T>) -> T {
    let mut best = T::zero();
    for i in 0..atoms.cols() {
        for j in i + 1..atoms.cols() {
            let c = dot(atoms.column(i), atoms.column(j)).abs()
                / (norm(atoms.column(i)) * norm(atoms.column(j)));
            best = best.max(c);
        }
    }
    best
}

impl<T> AsRef<Matrix<T>> for Matrix<T> {
    fn as_ref(&self) -> &Matrix<T> {
        self
    }
}
