#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sparsescene::Matrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Random unit columns, redrawing any column whose absolute inner product
/// with an earlier one reaches `max_coherence`; starts over when a column
/// cannot be placed.
pub fn incoherent_columns(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    max_coherence: f64,
) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(cols);
    let mut misses = 0;
    while out.len() < cols {
        let c = unit(gaussian_vec(rng, rows));
        if out.iter().all(|o| dot(o, &c).abs() < max_coherence) {
            out.push(c);
            misses = 0;
        } else {
            misses += 1;
            if misses > 20_000 {
                out.clear();
                misses = 0;
            }
        }
    }
    out
}

pub fn random_columns(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..cols).map(|_| unit(gaussian_vec(rng, rows))).collect()
}

pub fn matrix(rows: usize, cols: &[Vec<f64>]) -> Matrix<f64> {
    Matrix::from_columns(rows, cols).unwrap()
}

/// Coefficient magnitude in `[0.5, 2]` with random sign.
pub fn coefficient(rng: &mut ChaCha8Rng) -> f64 {
    let m: f64 = rng.random_range(0.5..2.0);
    if rng.random_bool(0.5) {
        m
    } else {
        -m
    }
}

/// Least-squares residual norm of `y` on the given columns, solved through
/// the normal equations (at most two columns).
pub fn ls_residual(cols: &[&[f64]], y: &[f64]) -> f64 {
    let coef = match cols.len() {
        0 => vec![],
        1 => vec![dot(cols[0], y) / dot(cols[0], cols[0])],
        2 => {
            let (a, b, c) = (
                dot(cols[0], cols[0]),
                dot(cols[0], cols[1]),
                dot(cols[1], cols[1]),
            );
            let (p, q) = (dot(cols[0], y), dot(cols[1], y));
            let det = a * c - b * b;
            vec![(c * p - b * q) / det, (a * q - b * p) / det]
        }
        _ => panic!("oracle handles at most two columns"),
    };
    let mut r = y.to_vec();
    for (col, k) in cols.iter().zip(coef) {
        for (ri, ci) in r.iter_mut().zip(col.iter()) {
            *ri -= k * ci;
        }
    }
    norm(&r)
}

/// Smallest support (size ≤ 2) that explains `y` to within `tol`, picking
/// the least residual among equal sizes.
pub fn exhaustive_support(cols: &[Vec<f64>], y: &[f64], tol: f64) -> Option<Vec<usize>> {
    let n = cols.len();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for i in 0..n {
        let r = ls_residual(&[&cols[i]], y);
        if r <= tol && best.as_ref().map_or(true, |(b, _)| r < *b) {
            best = Some((r, vec![i]));
        }
    }
    if best.is_some() {
        return best.map(|(_, s)| s);
    }
    for i in 0..n {
        for j in i + 1..n {
            let r = ls_residual(&[&cols[i], &cols[j]], y);
            if r <= tol && best.as_ref().map_or(true, |(b, _)| r < *b) {
                best = Some((r, vec![i, j]));
            }
        }
    }
    best.map(|(_, s)| s)
}

/// `max_{j ∉ S} ‖D_S⁺ d_j‖₁` for a support of one or two columns; OMP is
/// guaranteed to recover every signal on `S` when this is below 1.
pub fn exact_recovery_coefficient(cols: &[Vec<f64>], support: &[usize]) -> f64 {
    let mut worst: f64 = 0.0;
    for (j, d) in cols.iter().enumerate() {
        if support.contains(&j) {
            continue;
        }
        let l1 = match support {
            [a] => dot(&cols[*a], d).abs(),
            [a, b] => {
                let (p, q) = (&cols[*a], &cols[*b]);
                let (aa, ab, bb) = (dot(p, p), dot(p, q), dot(q, q));
                let (u, v) = (dot(p, d), dot(q, d));
                let det = aa * bb - ab * ab;
                ((bb * u - ab * v) / det).abs() + ((aa * v - ab * u) / det).abs()
            }
            _ => panic!("support of one or two columns expected"),
        };
        worst = worst.max(l1);
    }
    worst
}

/// One noiseless sparse-recovery instance.
pub struct SparseInstance {
    pub cols: Vec<Vec<f64>>,
    pub support: Vec<usize>,
    pub y: Vec<f64>,
}

/// 8×16 unit-column dictionary with coherence below 0.5 and a 1- or
/// 2-sparse signal with coefficient magnitudes in `[0.5, 2]`. With
/// `certified`, supports are redrawn until they satisfy the exact recovery
/// condition.
pub fn sparse_instance(rng: &mut ChaCha8Rng, certified: bool) -> SparseInstance {
    sparse_instance_with(rng, None, certified)
}

/// As [`sparse_instance`], with the support size fixed when `k` is given.
pub fn sparse_instance_with(rng: &mut ChaCha8Rng, k: Option<usize>, certified: bool) -> SparseInstance {
    loop {
        let cols = incoherent_columns(rng, 8, 16, 0.5);
        let k = k.unwrap_or_else(|| rng.random_range(1..=2));
        let mut support: Vec<usize> = Vec::new();
        while support.len() < k {
            let j = rng.random_range(0..16);
            if !support.contains(&j) {
                support.push(j);
            }
        }
        support.sort_unstable();
        if certified && exact_recovery_coefficient(&cols, &support) >= 1.0 {
            continue;
        }
        let mut y = vec![0.0; 8];
        for &j in &support {
            let c = coefficient(rng);
            for (yi, dj) in y.iter_mut().zip(&cols[j]) {
                *yi += c * dj;
            }
        }
        return SparseInstance { cols, support, y };
    }
}
