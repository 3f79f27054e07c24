//! Overcomplete DCT dictionaries, K-SVD learning and the `SSDICT01` file format.

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{ensure, Result};
use crate::io::{read_bytes, write_bytes, LeReader};
use crate::linalg::{axpy, canonical_sign, dominant_left_singular, dot, norm, norm_sq, Matrix};
use crate::omp::{omp_batch, SparseCode};
use crate::scalar::Real;

pub const DICT_MAGIC: &[u8; 8] = b"SSDICT01";

/// Tolerance on unit atom norms at precision `T`.
pub(crate) fn unit_norm_tolerance<T: Real>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(64.0))
}

/// Column-normalized `p × m` atom matrix with `m ≥ p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary<T> {
    atoms: Matrix<T>,
}

impl<T: Real> Dictionary<T> {
    /// Validates the atom matrix: overcomplete, finite, unit-norm columns.
    pub fn new(atoms: Matrix<T>) -> Result<Self> {
        ensure!(
            atoms.rows() >= 1 && atoms.cols() >= atoms.rows(),
            "dictionary must be overcomplete: {} atoms for dimension {}",
            atoms.cols(),
            atoms.rows()
        );
        ensure!(
            atoms.as_slice().iter().all(|v| v.is_finite()),
            "dictionary contains non-finite entries"
        );
        let tol = unit_norm_tolerance::<T>();
        for (j, col) in atoms.columns().enumerate() {
            let n = norm(col);
            ensure!(
                (n - T::one()).abs() <= tol,
                "atom {} has norm {}, expected 1",
                j,
                n
            );
        }
        Ok(Dictionary { atoms })
    }

    /// Normalizes every column, then validates.
    pub fn from_unnormalized(mut atoms: Matrix<T>) -> Result<Self> {
        for j in 0..atoms.cols() {
            let n = norm(atoms.column(j));
            ensure!(n > T::zero(), "atom {} is the zero vector", j);
            atoms.column_mut(j).iter_mut().for_each(|v| *v /= n);
        }
        Dictionary::new(atoms)
    }

    pub fn patch_dim(&self) -> usize {
        self.atoms.rows()
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.cols()
    }

    pub fn atoms(&self) -> &Matrix<T> {
        &self.atoms
    }

    pub fn atom(&self, j: usize) -> &[T] {
        self.atoms.column(j)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.atoms.as_slice().len());
        out.extend_from_slice(DICT_MAGIC);
        out.extend_from_slice(&(self.patch_dim() as u32).to_le_bytes());
        out.extend_from_slice(&(self.atom_count() as u32).to_le_bytes());
        for v in self.atoms.as_slice() {
            out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut rd = LeReader::new("dictionary", bytes, DICT_MAGIC)?;
        let p = rd.u32()? as usize;
        let m = rd.u32()? as usize;
        let expected = 16 + 8 * p * m;
        if bytes.len() != expected {
            return Err(crate::Error::format(
                "dictionary",
                format!(
                    "expected {} bytes for {}x{}, found {}",
                    expected,
                    p,
                    m,
                    bytes.len()
                ),
            ));
        }
        let mut data = Vec::with_capacity(p * m);
        for _ in 0..p * m {
            data.push(T::lit(rd.f64()?));
        }
        rd.finish()?;
        Dictionary::new(Matrix::from_column_major(p, m, data)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_bytes(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Dictionary::from_bytes(&read_bytes(path.as_ref())?)
    }
}

impl<T> AsRef<Matrix<T>> for Dictionary<T> {
    fn as_ref(&self) -> &Matrix<T> {
        &self.atoms
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsvdConfig<T> {
    pub iterations: usize,
    /// Maximum atoms per signal.
    pub max_sparsity: usize,
    /// OMP stops once the squared residual is at most this value.
    pub error_bound: T,
    /// Per-atom cost in the traced objective `Σ λ‖α‖₀ + ½‖Dα − x‖²`.
    pub sparsity_weight: T,
    pub seed: u64,
}

impl<T: Real> KsvdConfig<T> {
    /// Sparsity weight defaults to half the error bound: one atom costs as
    /// much as a residual sitting exactly on the bound.
    pub fn new(iterations: usize, max_sparsity: usize, error_bound: T) -> Self {
        KsvdConfig {
            iterations,
            max_sparsity,
            error_bound,
            sparsity_weight: error_bound * T::lit(0.5),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.iterations >= 1, "K-SVD iterations must be >= 1");
        ensure!(self.max_sparsity >= 1, "max_sparsity must be >= 1");
        ensure!(
            self.error_bound >= T::zero() && self.error_bound.is_finite(),
            "error_bound must be finite and >= 0"
        );
        ensure!(
            self.sparsity_weight >= T::zero() && self.sparsity_weight.is_finite(),
            "sparsity weight must be finite and >= 0"
        );
        Ok(())
    }
}

impl Default for KsvdConfig<f64> {
    fn default() -> Self {
        KsvdConfig::new(10, 3, 0.0)
    }
}

/// 1-D overcomplete DCT: `n` samples, `k` frequencies, non-DC columns made
/// zero-mean, every column unit-norm.
fn overcomplete_dct_1d(n: usize, k: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|j| {
            let mut col: Vec<f64> = (0..n)
                .map(|i| (i as f64 * j as f64 * PI / k as f64).cos())
                .collect();
            if j > 0 {
                let mean = col.iter().sum::<f64>() / n as f64;
                col.iter_mut().for_each(|v| *v -= mean);
            }
            let nrm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            col.iter_mut().for_each(|v| *v /= nrm);
            col
        })
        .collect()
}

/// Separable overcomplete DCT dictionary for `patch_side²`-pixel patches,
/// built as the Kronecker product of two `patch_side × √m` 1-D dictionaries.
/// Atom `a*√m + b` is the outer product of vertical frequency `a` and
/// horizontal frequency `b`, laid out row by row like [`crate::Patch`].
pub fn init_overcomplete_dct<T: Real>(
    patch_side: usize,
    atom_count: usize,
) -> Result<Dictionary<T>> {
    ensure!(patch_side >= 1, "patch side must be >= 1");
    let k = (atom_count as f64).sqrt().round() as usize;
    ensure!(
        k * k == atom_count,
        "atom count {} is not a perfect square",
        atom_count
    );
    ensure!(
        k >= patch_side,
        "sqrt(atom count) = {} is smaller than the patch side {}",
        k,
        patch_side
    );
    let base = overcomplete_dct_1d(patch_side, k);
    let p = patch_side * patch_side;
    let mut atoms = Matrix::zeros(p, atom_count);
    for a in 0..k {
        for b in 0..k {
            let col = atoms.column_mut(a * k + b);
            for r in 0..patch_side {
                for c in 0..patch_side {
                    col[r * patch_side + c] = T::lit(base[a][r] * base[b][c]);
                }
            }
        }
    }
    Dictionary::from_unnormalized(atoms)
}

/// `Σ_k ‖D α_k − x_k‖²`
pub fn representation_error<T: Real>(
    dict: &Dictionary<T>,
    signals: &Matrix<T>,
    codes: &[SparseCode<T>],
) -> T {
    codes
        .iter()
        .enumerate()
        .map(|(i, c)| norm_sq(&c.residual(&dict.atoms, signals.column(i))))
        .sum()
}

/// `Σ_k λ‖α_k‖₀ + ½‖D α_k − x_k‖²`, the patch term of the global objective
/// with the image held at the measurement.
pub fn sparse_objective<T: Real>(
    dict: &Dictionary<T>,
    signals: &Matrix<T>,
    codes: &[SparseCode<T>],
    sparsity_weight: T,
) -> T {
    codes
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let r = norm_sq(&c.residual(&dict.atoms, signals.column(i)));
            sparsity_weight * T::lit(c.nnz() as f64) + T::lit(0.5) * r
        })
        .sum()
}

fn check_codes<T: Real>(
    dict: &Dictionary<T>,
    signals: &Matrix<T>,
    codes: &[SparseCode<T>],
) -> Result<()> {
    ensure!(
        signals.rows() == dict.patch_dim(),
        "signal dimension {} does not match dictionary dimension {}",
        signals.rows(),
        dict.patch_dim()
    );
    ensure!(
        codes.len() == signals.cols(),
        "{} codes for {} signals",
        codes.len(),
        signals.cols()
    );
    for (i, c) in codes.iter().enumerate() {
        ensure!(
            c.length == dict.atom_count()
                && c.support.len() == c.coefficients.len()
                && c.support.iter().all(|&a| a < dict.atom_count()),
            "code {} is inconsistent with a {}-atom dictionary",
            i,
            dict.atom_count()
        );
    }
    Ok(())
}

/// One K-SVD dictionary update pass.
///
/// Atoms are visited in ascending order. For atom `j` the signals whose
/// support contains `j` form the error matrix `E` (their residuals with `j`'s
/// contribution added back); the atom becomes the dominant left singular
/// vector of `E` (first non-zero component positive) and the corresponding
/// coefficients become `Eᵀ u`. Supports never change, so the representation
/// error cannot increase. An atom no signal uses is replaced by the
/// normalized signal with the largest current residual.
///
/// `codes` are updated in place, including every `residual_norm`.
pub fn ksvd_sweep<T: Real>(
    dict: &Dictionary<T>,
    signals: &Matrix<T>,
    codes: &mut [SparseCode<T>],
) -> Result<Dictionary<T>> {
    check_codes(dict, signals, codes)?;
    let (m, n) = (dict.atom_count(), signals.cols());
    let mut atoms = dict.atoms.clone();

    let mut users: Vec<Vec<(usize, usize)>> = vec![Vec::new(); m];
    for (i, code) in codes.iter().enumerate() {
        for (k, &a) in code.support.iter().enumerate() {
            users[a].push((i, k));
        }
    }
    let mut residuals: Vec<Vec<T>> = codes
        .par_iter()
        .enumerate()
        .map(|(i, c)| c.residual(&atoms, signals.column(i)))
        .collect();
    let mut donated = vec![false; n];

    for j in 0..m {
        if users[j].is_empty() {
            let mut best: Option<(usize, T)> = None;
            for (i, r) in residuals.iter().enumerate() {
                if donated[i] {
                    continue;
                }
                let e = norm_sq(r);
                if e > T::zero()
                    && norm_sq(signals.column(i)) > T::zero()
                    && best.map_or(true, |(_, b)| e > b)
                {
                    best = Some((i, e));
                }
            }
            if let Some((i, _)) = best {
                let x = signals.column(i);
                let nx = norm(x);
                for (d, &v) in atoms.column_mut(j).iter_mut().zip(x) {
                    *d = v / nx;
                }
                donated[i] = true;
            }
            continue;
        }

        let old = atoms.column(j).to_vec();
        let errors: Vec<Vec<T>> = users[j]
            .iter()
            .map(|&(i, k)| {
                let mut e = residuals[i].clone();
                axpy(codes[i].coefficients[k], &old, &mut e);
                e
            })
            .collect();
        let refs: Vec<&[T]> = errors.iter().map(|e| e.as_slice()).collect();
        let atom = match dominant_left_singular(&refs, &old) {
            Some(mut u) => {
                canonical_sign(&mut u);
                u
            }
            None => old,
        };
        for (&(i, k), e) in users[j].iter().zip(errors) {
            let coef = dot(&atom, &e);
            codes[i].coefficients[k] = coef;
            let mut r = e;
            axpy(-coef, &atom, &mut r);
            residuals[i] = r;
        }
        atoms.column_mut(j).copy_from_slice(&atom);
    }

    codes.par_iter_mut().enumerate().for_each(|(i, c)| {
        c.residual_norm = norm(&c.residual(&atoms, signals.column(i)));
    });
    Dictionary::new(atoms)
}

#[derive(Debug, Clone)]
pub struct KsvdOutcome<T> {
    pub dictionary: Dictionary<T>,
    pub codes: Vec<SparseCode<T>>,
    /// [`sparse_objective`] after each full iteration.
    pub objective_trace: Vec<T>,
}

/// Alternates batch OMP coding and [`ksvd_sweep`] for `config.iterations`
/// rounds and records the objective after each round.
///
/// From the second round on, a freshly coded signal keeps its previous code
/// when that code scores better under the traced objective, so every round is
/// a descent step.
pub fn train_ksvd_traced<T: Real>(
    signals: &Matrix<T>,
    config: &KsvdConfig<T>,
    init: &Dictionary<T>,
) -> Result<KsvdOutcome<T>> {
    config.validate()?;
    ensure!(signals.cols() >= 1, "K-SVD needs at least one signal");
    ensure!(
        signals.rows() == init.patch_dim(),
        "signal dimension {} does not match dictionary dimension {}",
        signals.rows(),
        init.patch_dim()
    );
    let lambda = config.sparsity_weight;
    let score = |c: &SparseCode<T>| {
        lambda * T::lit(c.nnz() as f64) + T::lit(0.5) * c.residual_norm * c.residual_norm
    };

    let mut dictionary = init.clone();
    let mut codes: Option<Vec<SparseCode<T>>> = None;
    let mut trace = Vec::with_capacity(config.iterations);
    for it in 0..config.iterations {
        let fresh = omp_batch(&dictionary, signals, config)?;
        let mut current = match codes.take() {
            None => fresh,
            Some(prev) => fresh
                .into_par_iter()
                .zip(prev)
                .map(|(new, old)| if score(&new) <= score(&old) { new } else { old })
                .collect(),
        };
        dictionary = ksvd_sweep(&dictionary, signals, &mut current)?;
        let obj = sparse_objective(&dictionary, signals, &current, lambda);
        log::debug!("k-svd iteration {}: objective {}", it + 1, obj);
        trace.push(obj);
        codes = Some(current);
    }
    Ok(KsvdOutcome {
        dictionary,
        codes: codes.expect("at least one iteration"),
        objective_trace: trace,
    })
}

/// Learns a dictionary adapted to `signals` starting from `init`.
pub fn train_ksvd<T: Real>(
    signals: &Matrix<T>,
    config: &KsvdConfig<T>,
    init: &Dictionary<T>,
) -> Result<(Dictionary<T>, Vec<SparseCode<T>>)> {
    let out = train_ksvd_traced(signals, config, init)?;
    Ok((out.dictionary, out.codes))
}
