//! Linear soft-margin SVM with one-vs-one multiclass voting.
//!
//! Binary models minimize `½(‖w‖² + b²) + C Σ max(0, 1 − yᵢ(w·xᵢ + b))` by dual
//! coordinate descent over the box `0 ≤ αᵢ ≤ C`, treating the bias as an
//! extra constant feature. Features are standardized with training-set
//! statistics stored in the ensemble.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{ensure, Error, Result};
use crate::features::FeatureVector;
use crate::io::{self, LeReader};
use crate::linalg::dot;
use crate::scalar::Real;

pub const SVM_MAGIC: &[u8; 8] = b"SSSVM001";

const MAX_EPOCHS: usize = 20_000;
const TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvmModel<T> {
    pub weights: Vec<T>,
    pub bias: T,
    /// Positive decisions vote for `.0`, negative for `.1`.
    pub class_pair: (usize, usize),
}

impl<T: Real> LinearSvmModel<T> {
    /// `w·x + b`
    pub fn decision(&self, x: &[T]) -> T {
        dot(&self.weights, x) + self.bias
    }

    pub fn vote(&self, x: &[T]) -> usize {
        if self.decision(x) >= T::zero() {
            self.class_pair.0
        } else {
            self.class_pair.1
        }
    }
}

/// Primal objective `½(‖w‖² + b²) + C Σ hinge`.
pub fn svm_objective<T: Real>(
    model: &LinearSvmModel<T>,
    features: &[FeatureVector<T>],
    labels: &[i8],
    c: T,
) -> T {
    let reg = T::lit(0.5) * (dot(&model.weights, &model.weights) + model.bias * model.bias);
    let loss: T = features
        .iter()
        .zip(labels)
        .map(|(f, &y)| (T::one() - T::lit(y as f64) * model.decision(&f.values)).max(T::zero()))
        .sum();
    reg + c * loss
}

/// Trains a binary model on labels in `{+1, −1}`; `+1` maps to class 0 of
/// the returned pair `(0, 1)`.
pub fn train_binary<T: Real>(
    features: &[FeatureVector<T>],
    labels: &[i8],
    c: T,
    seed: u64,
) -> Result<LinearSvmModel<T>> {
    ensure!(
        c > T::zero() && c.is_finite(),
        "SVM C must be finite and > 0"
    );
    ensure!(
        features.len() == labels.len(),
        "{} feature vectors but {} labels",
        features.len(),
        labels.len()
    );
    ensure!(
        labels.iter().all(|&y| y == 1 || y == -1),
        "binary labels must be +1 or -1"
    );
    ensure!(
        labels.contains(&1) && labels.contains(&-1),
        "binary training needs samples of both labels"
    );
    let dim = features[0].len();
    ensure!(
        features.iter().all(|f| f.len() == dim),
        "feature vectors differ in length"
    );
    ensure!(
        features
            .iter()
            .all(|f| f.values.iter().all(|v| v.is_finite())),
        "features contain non-finite values"
    );

    let n = features.len();
    let ys: Vec<T> = labels.iter().map(|&y| T::lit(y as f64)).collect();
    let qii: Vec<T> = features
        .iter()
        .map(|f| dot(&f.values, &f.values) + T::one())
        .collect();
    let mut alpha = vec![T::zero(); n];
    let mut w = vec![T::zero(); dim];
    let mut b = T::zero();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = T::lit(TOLERANCE);

    for _ in 0..MAX_EPOCHS {
        order.shuffle(&mut rng);
        let mut worst = T::zero();
        for &i in &order {
            let x = &features[i].values;
            let g = ys[i] * (dot(&w, x) + b) - T::one();
            let pg = if alpha[i] == T::zero() {
                g.min(T::zero())
            } else if alpha[i] == c {
                g.max(T::zero())
            } else {
                g
            };
            worst = worst.max(pg.abs());
            if pg == T::zero() {
                continue;
            }
            let old = alpha[i];
            alpha[i] = (old - g / qii[i]).max(T::zero()).min(c);
            let step = (alpha[i] - old) * ys[i];
            if step != T::zero() {
                for (wk, &xk) in w.iter_mut().zip(x) {
                    *wk += step * xk;
                }
                b += step;
            }
        }
        if worst <= tol {
            break;
        }
    }
    Ok(LinearSvmModel {
        weights: w,
        bias: b,
        class_pair: (0, 1),
    })
}

/// Indices of samples labeled `i` or `j`, ascending.
pub fn pair_indices(labels: &[usize], i: usize, j: usize) -> Vec<usize> {
    labels
        .iter()
        .enumerate()
        .filter(|&(_, &l)| l == i || l == j)
        .map(|(k, _)| k)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OvoEnsemble<T> {
    pub class_count: usize,
    /// Ordered by `(i, j)` lexicographically.
    pub models: Vec<LinearSvmModel<T>>,
    pub means: Vec<T>,
    pub stds: Vec<T>,
}

impl<T: Real> OvoEnsemble<T> {
    pub fn feature_dim(&self) -> usize {
        self.means.len()
    }

    pub fn standardize(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let m = self.feature_dim();
        let mut out = Vec::with_capacity(16 + self.models.len() * (16 + 8 * m) + 16 * m);
        out.extend_from_slice(SVM_MAGIC);
        out.extend_from_slice(&(self.class_count as u32).to_le_bytes());
        out.extend_from_slice(&(m as u32).to_le_bytes());
        for model in &self.models {
            out.extend_from_slice(&(model.class_pair.0 as u32).to_le_bytes());
            out.extend_from_slice(&(model.class_pair.1 as u32).to_le_bytes());
            out.extend_from_slice(&model.bias.to_f64_lossy().to_le_bytes());
            for w in &model.weights {
                out.extend_from_slice(&w.to_f64_lossy().to_le_bytes());
            }
        }
        for v in self.means.iter().chain(&self.stds) {
            out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = LeReader::new("SVM model", bytes, SVM_MAGIC)?;
        let k = r.u32()? as usize;
        let m = r.u32()? as usize;
        if k < 2 {
            return Err(Error::format("SVM model", format!("class count {k} < 2")));
        }
        let mut models = Vec::with_capacity(k * (k - 1) / 2);
        for _ in 0..k * (k - 1) / 2 {
            let i = r.u32()? as usize;
            let j = r.u32()? as usize;
            if i >= j || j >= k {
                return Err(Error::format(
                    "SVM model",
                    format!("bad class pair ({i}, {j})"),
                ));
            }
            let bias = T::lit(r.f64()?);
            let weights = (0..m).map(|_| r.f64().map(T::lit)).collect::<Result<_>>()?;
            models.push(LinearSvmModel {
                weights,
                bias,
                class_pair: (i, j),
            });
        }
        let means = (0..m).map(|_| r.f64().map(T::lit)).collect::<Result<_>>()?;
        let stds: Vec<T> = (0..m).map(|_| r.f64().map(T::lit)).collect::<Result<_>>()?;
        r.finish()?;
        if stds.iter().any(|&s| !(s > T::zero())) {
            return Err(Error::format(
                "SVM model",
                "non-positive standard deviation",
            ));
        }
        Ok(OvoEnsemble {
            class_count: k,
            models,
            means,
            stds,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_bytes(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        OvoEnsemble::from_bytes(&io::read_bytes(path.as_ref())?)
    }
}

fn pair_seed(seed: u64, i: usize, j: usize) -> u64 {
    seed ^ ((i as u64) << 32 | j as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Standardizes the features, then trains one model per class pair `i < j`
/// on that pair's samples only.
pub fn train_ovo<T: Real>(
    features: &[FeatureVector<T>],
    labels: &[usize],
    class_count: usize,
    c: T,
    seed: u64,
) -> Result<OvoEnsemble<T>> {
    ensure!(class_count >= 2, "one-vs-one needs at least 2 classes");
    ensure!(
        features.len() == labels.len(),
        "{} feature vectors but {} labels",
        features.len(),
        labels.len()
    );
    for k in 0..class_count {
        ensure!(labels.contains(&k), "class {} has no training samples", k);
    }
    ensure!(
        labels.iter().all(|&l| l < class_count),
        "label out of range for {} classes",
        class_count
    );
    let dim = features[0].len();
    ensure!(
        features.iter().all(|f| f.len() == dim),
        "feature vectors differ in length"
    );

    let n = T::lit(features.len() as f64);
    let means: Vec<T> = (0..dim)
        .map(|d| features.iter().map(|f| f.values[d]).sum::<T>() / n)
        .collect();
    let stds: Vec<T> = (0..dim)
        .map(|d| {
            let var = features
                .iter()
                .map(|f| (f.values[d] - means[d]).powi(2))
                .sum::<T>()
                / n;
            let s = var.sqrt();
            if s > T::lit(1e-12) {
                s
            } else {
                T::one()
            }
        })
        .collect();
    let mut ensemble = OvoEnsemble {
        class_count,
        models: Vec::new(),
        means,
        stds,
    };
    let scaled: Vec<FeatureVector<T>> = features
        .iter()
        .map(|f| FeatureVector::new(ensemble.standardize(&f.values)))
        .collect();

    let pairs: Vec<(usize, usize)> = (0..class_count)
        .flat_map(|i| (i + 1..class_count).map(move |j| (i, j)))
        .collect();
    ensemble.models = pairs
        .par_iter()
        .map(|&(i, j)| {
            let idx = pair_indices(labels, i, j);
            let xs: Vec<FeatureVector<T>> = idx.iter().map(|&k| scaled[k].clone()).collect();
            let ys: Vec<i8> = idx
                .iter()
                .map(|&k| if labels[k] == i { 1 } else { -1 })
                .collect();
            let mut model = train_binary(&xs, &ys, c, pair_seed(seed, i, j))?;
            model.class_pair = (i, j);
            Ok(model)
        })
        .collect::<Result<_>>()?;
    Ok(ensemble)
}

/// Majority vote over all pairwise models; ties go to the lowest class.
pub fn predict<T: Real>(ensemble: &OvoEnsemble<T>, x: &FeatureVector<T>) -> Result<usize> {
    ensure!(
        x.len() == ensemble.feature_dim(),
        "feature length {} does not match model dimension {}",
        x.len(),
        ensemble.feature_dim()
    );
    let z = ensemble.standardize(&x.values);
    let mut votes = vec![0usize; ensemble.class_count];
    for model in &ensemble.models {
        votes[model.vote(&z)] += 1;
    }
    let mut best = 0;
    for (k, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = k;
        }
    }
    Ok(best)
}
