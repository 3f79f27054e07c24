mod common;

use common::*;
use proptest::prelude::*;
use sparsescene::svm::{pair_indices, svm_objective};
use sparsescene::{
    predict, train_binary, train_ovo, Ensemble, EnsembleF32, Features, LinearSvmModel, OvoEnsemble,
};

fn blobs(rng: &mut rand_chacha::ChaCha8Rng, centers: &[(f64, f64)], per: usize, spread: f64) -> (Vec<Features>, Vec<usize>) {
    let mut xs = Vec::new();
    let mut ls = Vec::new();
    for (k, &(cx, cy)) in centers.iter().enumerate() {
        for _ in 0..per {
            let g = gaussian_vec(rng, 2);
            xs.push(Features::new(vec![cx + spread * g[0], cy + spread * g[1]]));
            ls.push(k);
        }
    }
    (xs, ls)
}

fn signs(labels: &[usize]) -> Vec<i8> {
    labels.iter().map(|&l| if l == 0 { 1 } else { -1 }).collect()
}

/// Projected gradient ascent on the dual `Σα − ½αᵀQα`, `0 ≤ α ≤ C`, with
/// `Q_ij = y_i y_j (x_i·x_j + 1)`; returns the primal objective at the
/// resulting `(w, b)`.
fn reference_objective(xs: &[Features], ys: &[i8], c: f64, iterations: usize) -> f64 {
    let n = xs.len();
    let y: Vec<f64> = ys.iter().map(|&v| v as f64).collect();
    let q: Vec<f64> = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            y[i] * y[j] * (dot(&xs[i].values, &xs[j].values) + 1.0)
        })
        .collect();
    let lipschitz = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let step = 1.0 / lipschitz;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![0.0; n];
    for _ in 0..iterations {
        for i in 0..n {
            grad[i] = 1.0 - (0..n).map(|j| q[i * n + j] * alpha[j]).sum::<f64>();
        }
        for i in 0..n {
            alpha[i] = (alpha[i] + step * grad[i]).clamp(0.0, c);
        }
    }
    let dim = xs[0].len();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    for i in 0..n {
        for d in 0..dim {
            w[d] += alpha[i] * y[i] * xs[i].values[d];
        }
        b += alpha[i] * y[i];
    }
    let model = LinearSvmModel { weights: w, bias: b, class_pair: (0, 1) };
    svm_objective(&model, xs, ys, c)
}

#[test]
fn objective_matches_long_reference_run() {
    let mut rng = rng(20);
    let (xs, ls) = blobs(&mut rng, &[(0.0, 0.0), (1.5, 1.0)], 10, 0.8);
    let ys = signs(&ls);
    let model = train_binary(&xs, &ys, 1.0, 0).unwrap();
    let ours = svm_objective(&model, &xs, &ys, 1.0);
    let reference = reference_objective(&xs, &ys, 1.0, 1_000_000);
    assert!(
        (ours - reference).abs() <= 1e-3 * reference,
        "ours {ours}, reference {reference}"
    );
}

#[test]
fn separable_blobs_train_perfectly() {
    let mut rng = rng(1);
    let (xs, ls) = blobs(&mut rng, &[(0.0, 0.0), (5.0, 5.0)], 30, 0.1);
    let ys = signs(&ls);
    let m = train_binary(&xs, &ys, 1.0, 3).unwrap();
    for (x, &y) in xs.iter().zip(&ys) {
        assert_eq!(m.decision(&x.values) > 0.0, y == 1);
    }
}

#[test]
fn flipped_labels_flip_decisions() {
    let mut rng = rng(2);
    let (xs, ls) = blobs(&mut rng, &[(0.0, 0.0), (2.0, 1.0)], 25, 0.7);
    let ys = signs(&ls);
    let flipped: Vec<i8> = ys.iter().map(|y| -y).collect();
    let a = train_binary(&xs, &ys, 1.0, 4).unwrap();
    let b = train_binary(&xs, &flipped, 1.0, 4).unwrap();
    for (wa, wb) in a.weights.iter().zip(&b.weights) {
        assert!((wa + wb).abs() < 1e-4);
    }
    assert!((a.bias + b.bias).abs() < 1e-4);
    for x in &xs {
        let (da, db) = (a.decision(&x.values), b.decision(&x.values));
        if da.abs() > 1e-3 {
            assert_eq!(da > 0.0, db < 0.0);
        }
    }
}

#[test]
fn binary_training_errors() {
    let xs = vec![Features::new(vec![0.0, 1.0]), Features::new(vec![1.0, 0.0])];
    assert!(train_binary(&xs, &[1, 1], 1.0, 0).is_err());
    assert!(train_binary(&xs, &[1, -1], 0.0, 0).is_err());
    assert!(train_binary(&xs, &[1, 2], 1.0, 0).is_err());
    assert!(train_binary(&xs, &[1], 1.0, 0).is_err());
}

#[test]
fn four_classes_give_six_models() {
    let mut rng = rng(3);
    let (xs, ls) = blobs(&mut rng, &[(0.0, 0.0), (5.0, 0.0), (0.0, 5.0), (5.0, 5.0)], 15, 0.3);
    let e = train_ovo(&xs, &ls, 4, 1.0, 7).unwrap();
    assert_eq!(e.models.len(), 6);
    let pairs: Vec<_> = e.models.iter().map(|m| m.class_pair).collect();
    assert_eq!(pairs, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
    for (x, &l) in xs.iter().zip(&ls) {
        assert_eq!(predict(&e, x).unwrap(), l);
    }
    assert_eq!(e, train_ovo(&xs, &ls, 4, 1.0, 7).unwrap());
    assert!(train_ovo(&xs, &ls, 5, 1.0, 7).is_err());
    assert!(predict(&e, &Features::new(vec![1.0])).is_err());
}

#[test]
fn pair_models_see_only_their_classes() {
    let labels = vec![0, 2, 1, 2, 0, 3, 1, 1];
    assert_eq!(pair_indices(&labels, 1, 2), vec![1, 2, 3, 6, 7]);
    assert_eq!(pair_indices(&labels, 0, 3), vec![0, 4, 5]);

    // each pair's model equals a binary model trained on exactly that pair
    let mut rng = rng(6);
    let (xs, ls) = blobs(&mut rng, &[(0.0, 0.0), (3.0, 0.0), (0.0, 3.0)], 10, 0.5);
    let e = train_ovo(&xs, &ls, 3, 1.0, 2).unwrap();
    let z: Vec<Features> = xs.iter().map(|x| Features::new(e.standardize(&x.values))).collect();
    let m = &e.models[2];
    assert_eq!(m.class_pair, (1, 2));
    let idx = pair_indices(&ls, 1, 2);
    assert_eq!(idx.len(), 20);
    let sub: Vec<Features> = idx.iter().map(|&k| z[k].clone()).collect();
    let ys: Vec<i8> = idx.iter().map(|&k| if ls[k] == 1 { 1 } else { -1 }).collect();
    let alone = train_binary(&sub, &ys, 1.0, 0).unwrap();
    assert!(svm_objective(m, &sub, &ys, 1.0) <= svm_objective(&alone, &sub, &ys, 1.0) * (1.0 + 1e-4));
}

#[test]
fn two_classes_match_binary_prediction() {
    let mut rng = rng(4);
    let (xs, ls) = blobs(&mut rng, &[(0.0, 0.0), (2.0, 2.0)], 20, 0.9);
    let e = train_ovo(&xs, &ls, 2, 1.0, 5).unwrap();
    assert_eq!(e.models.len(), 1);
    for x in &xs {
        let z = e.standardize(&x.values);
        let binary = if e.models[0].decision(&z) >= 0.0 { 0 } else { 1 };
        assert_eq!(predict(&e, x).unwrap(), binary);
    }
}

fn fixed_ensemble(models: Vec<LinearSvmModel<f64>>, k: usize) -> Ensemble {
    OvoEnsemble { class_count: k, models, means: vec![0.0], stds: vec![1.0] }
}

fn constant(pair: (usize, usize), sign: f64) -> LinearSvmModel<f64> {
    LinearSvmModel { weights: vec![0.0], bias: sign, class_pair: pair }
}

#[test]
fn vote_fixtures() {
    let x = Features::new(vec![0.3]);
    let e = fixed_ensemble(vec![constant((0, 1), 1.0)], 2);
    assert_eq!(predict(&e, &x).unwrap(), 0);
    let e = fixed_ensemble(
        vec![
            constant((0, 1), 1.0),
            constant((0, 2), 1.0),
            constant((0, 3), -1.0),
            constant((1, 2), 1.0),
            constant((1, 3), -1.0),
            constant((2, 3), -1.0),
        ],
        4,
    );
    assert_eq!(predict(&e, &x).unwrap(), 3);
    // 0 beats 1, 1 beats 2, 2 beats 0
    let cycle = fixed_ensemble(
        vec![constant((0, 1), 1.0), constant((0, 2), -1.0), constant((1, 2), 1.0)],
        3,
    );
    assert_eq!(predict(&cycle, &x).unwrap(), 0);
}

#[test]
fn model_file_roundtrip() {
    let mut rng = rng(8);
    let (xs, ls) = blobs(&mut rng, &[(0.0, 0.0), (4.0, 1.0), (1.0, 4.0)], 10, 0.5);
    let e = train_ovo(&xs, &ls, 3, 0.5, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    e.save(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..8], b"SSSVM001");
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
    assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 2);
    assert_eq!(bytes.len(), 16 + 3 * (8 + 8 + 2 * 8) + 4 * 8);
    assert_eq!(Ensemble::load(&path).unwrap(), e);
    assert_eq!(EnsembleF32::from_bytes(&bytes).unwrap().models.len(), 3);
    assert!(Ensemble::from_bytes(&bytes[..bytes.len() - 1]).is_err());
}

proptest! {
    #[test]
    fn positive_rescaling_keeps_predictions(seed in any::<u64>(), which in 0usize..6, scale in 1e-3f64..1e3) {
        let mut rng = rng(seed);
        let (xs, ls) = blobs(&mut rng, &[(0.0, 0.0), (3.0, 0.0), (0.0, 3.0), (3.0, 3.0)], 6, 1.0);
        let e = train_ovo(&xs, &ls, 4, 1.0, seed).unwrap();
        let mut scaled = e.clone();
        let m = &mut scaled.models[which];
        m.weights.iter_mut().for_each(|w| *w *= scale);
        m.bias *= scale;
        for x in &xs {
            prop_assert_eq!(predict(&e, x).unwrap(), predict(&scaled, x).unwrap());
        }
    }
}
