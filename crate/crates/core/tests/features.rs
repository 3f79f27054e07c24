mod common;

use proptest::prelude::*;
use sparsescene::features::{features_for_pixels, window_at, FeatureParams, FeatureRaster, DEFAULT_OFFSETS};
use sparsescene::{compute_glcm, compute_glh, glcm_stats, pixel_feature, plan_patch_sizes, Image, Patch};

fn patch(side: usize, values: Vec<f64>) -> Patch<f64> {
    Patch::new(side, (0, 0), values).unwrap()
}

/// Co-occurrence matrix straight from the definition.
fn glcm_oracle(w: &Patch<f64>, levels: usize, offsets: &[(isize, isize)]) -> Vec<f64> {
    let q = |v: f64| ((v.clamp(0.0, 255.0) * levels as f64 / 256.0).floor() as usize).min(levels - 1);
    let mut m = vec![0.0; levels * levels];
    let s = w.side as isize;
    for &(dr, dc) in offsets {
        for r in 0..s {
            for c in 0..s {
                let (r2, c2) = (r + dr, c + dc);
                if r2 < 0 || c2 < 0 || r2 >= s || c2 >= s {
                    continue;
                }
                let a = q(w.at(r as usize, c as usize));
                let b = q(w.at(r2 as usize, c2 as usize));
                m[a * levels + b] += 1.0;
                m[b * levels + a] += 1.0;
            }
        }
    }
    let total: f64 = m.iter().sum();
    m.iter().map(|v| v / total).collect()
}

#[test]
fn constant_window_statistics() {
    let w = patch(5, vec![7.0; 25]);
    let g = compute_glcm(&w, 16, &DEFAULT_OFFSETS).unwrap();
    assert_eq!(g.get(0, 0), 1.0);
    let s = glcm_stats(&g);
    assert_eq!(s.contrast, 0.0);
    assert_eq!(s.dissimilarity, 0.0);
    assert_eq!(s.homogeneity, 1.0);
    assert_eq!(s.energy, 1.0);
    assert_eq!(s.entropy, 0.0);
    assert_eq!(s.correlation, 0.0);
}

#[test]
fn checkerboard_statistics() {
    let w = patch(2, vec![0.0, 255.0, 255.0, 0.0]);
    let g = compute_glcm(&w, 2, &[(0, 1)]).unwrap();
    assert_eq!(g.counts, vec![0.0, 0.5, 0.5, 0.0]);
    let s = glcm_stats(&g);
    assert!((s.contrast - 1.0).abs() < 1e-12);
    assert!((s.homogeneity - 0.5).abs() < 1e-12);
    assert!((s.energy - 0.5).abs() < 1e-12);
    assert!((s.dissimilarity - 1.0).abs() < 1e-12);
    assert!((s.entropy - 1.0).abs() < 1e-12);
    // levels 0 and 1 always co-occur as opposites
    assert!((s.correlation + 1.0).abs() < 1e-12);
}

#[test]
fn glh_fixtures() {
    let h = compute_glh(&patch(3, vec![7.0; 9]), 16).unwrap();
    assert_eq!(h[0], 1.0);
    assert_eq!(h.iter().sum::<f64>(), 1.0);

    // 16·k lands each value in its own bin
    let h = compute_glh(&patch(4, (0..16).map(|k| 16.0 * k as f64).collect()), 16).unwrap();
    assert!(h.iter().all(|&b| b == 1.0 / 16.0));

    // 255 and out-of-range values clamp into the end bins
    let h = compute_glh(&patch(2, vec![255.0, 300.0, -4.0, 0.0]), 4).unwrap();
    assert_eq!(h, vec![0.5, 0.0, 0.0, 0.5]);
    assert!(compute_glh(&patch(2, vec![0.0; 4]), 1).is_err());
}

#[test]
fn glcm_rejects_bad_arguments() {
    let w = patch(2, vec![0.0; 4]);
    assert!(compute_glcm(&w, 1, &[(0, 1)]).is_err());
    assert!(compute_glcm(&w, 4, &[]).is_err());
    assert!(compute_glcm(&w, 4, &[(0, 2)]).is_err());
    assert!(compute_glcm(&patch(1, vec![0.0]), 4, &[(0, 1)]).is_err());
}

#[test]
fn patch_size_plan() {
    let p = plan_patch_sizes(3.0, None).unwrap();
    assert_eq!((p.s_init, p.s_large, p.s_middle, p.s_small), (9, 9, 7, 3));
    assert_eq!(plan_patch_sizes(1.0, Some(13)).unwrap().s_middle, 9);
    assert_eq!(p.layer_sizes(3), vec![9, 7, 3]);
    assert!(plan_patch_sizes(3.0, Some(8)).is_err());
    assert!(plan_patch_sizes(3.0, Some(1)).is_err());
    assert!(plan_patch_sizes(0.5, None).is_err());
    for ps in 1..40 {
        let p = plan_patch_sizes(ps as f64 * 0.5 + 2.0, None).unwrap();
        assert!(p.s_init % 2 == 1);
        for s in [p.s_large, p.s_middle, p.s_small] {
            assert!(s % 2 == 1 && s >= 3);
        }
        assert!(p.s_large > p.s_middle && p.s_middle > p.s_small);
    }
    for s in (7..101).step_by(2) {
        let p = plan_patch_sizes(3.0, Some(s)).unwrap();
        assert!(p.s_middle % 2 == 1 && p.s_large > p.s_middle && p.s_middle > 3);
    }
}

#[test]
fn feature_length_and_constant_image() {
    let img = Image::filled(20, 20, 133.0);
    let inner = pixel_feature(&img, (10, 10), 9, 16, 16).unwrap();
    let corner = pixel_feature(&img, (0, 0), 9, 16, 16).unwrap();
    assert_eq!(inner.len(), 22);
    assert_eq!(inner, corner);
    assert!(pixel_feature(&img, (0, 0), 8, 16, 16).is_err());
}

fn noise_image(w: usize, h: usize, seed: u64) -> Image {
    let mut rng = common::rng(seed);
    let g = common::gaussian_vec(&mut rng, w * h);
    Image::new(w, h, g.into_iter().map(|v| (128.0 + 50.0 * v).round()).collect()).unwrap()
}

#[test]
fn translation_equivariance() {
    let img = noise_image(30, 30, 4);
    let (dr, dc) = (3, 5);
    let shifted = Image::from_fn(30, 30, |r, c| img.get_clamped(r as isize - dr, c as isize - dc));
    for (r, c) in [(10, 10), (12, 20), (8, 9)] {
        let a = pixel_feature(&img, (r, c), 7, 16, 16).unwrap();
        let b = pixel_feature(&shifted, (r + dr as usize, c + dc as usize), 7, 16, 16).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn inversion_keeps_symmetric_statistics() {
    let img = noise_image(16, 16, 9);
    let inv = Image::from_fn(16, 16, |r, c| 255.0 - img.get(r, c));
    for levels in [2, 8, 16] {
        let a = glcm_stats(&compute_glcm(&window_at(&img, 8, 8, 9), levels, &DEFAULT_OFFSETS).unwrap());
        let b = glcm_stats(&compute_glcm(&window_at(&inv, 8, 8, 9), levels, &DEFAULT_OFFSETS).unwrap());
        for (x, y) in [
            (a.contrast, b.contrast),
            (a.dissimilarity, b.dissimilarity),
            (a.homogeneity, b.homogeneity),
            (a.energy, b.energy),
            (a.entropy, b.entropy),
        ] {
            assert!((x - y).abs() < 1e-12, "L={levels}: {x} vs {y}");
        }
    }
}

#[test]
fn raster_matches_pixel_features_and_roundtrips() {
    let img = noise_image(11, 7, 2);
    let params = FeatureParams::default();
    let raster = FeatureRaster::compute(&img, 5, &params).unwrap();
    let f = pixel_feature(&img, (3, 9), 5, 16, 16).unwrap();
    assert_eq!(raster.pixel(3, 9), &f.values[..]);

    let feats = features_for_pixels(&img, &[3 * 11 + 9, 0], 5, &params, 2).unwrap();
    assert_eq!(feats[0].values, f.values);
    assert_eq!(feats[0].layer, 2);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.bin");
    raster.save(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..8], b"SSFEAT01");
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 7);
    assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 11);
    assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 22);
    assert_eq!(FeatureRaster::<f64>::load(&path).unwrap(), raster);
}

fn window_strategy() -> impl Strategy<Value = Patch<f64>> {
    (2usize..8).prop_flat_map(|side| {
        prop::collection::vec(-20.0f64..280.0, side * side).prop_map(move |v| patch(side, v))
    })
}

proptest! {
    #[test]
    fn glcm_matches_definition(w in window_strategy(), levels in 2usize..12) {
        let g = compute_glcm(&w, levels, &DEFAULT_OFFSETS).unwrap();
        let want = glcm_oracle(&w, levels, &DEFAULT_OFFSETS);
        let sum: f64 = g.counts.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        for i in 0..levels {
            for j in 0..levels {
                prop_assert!((g.get(i, j) - want[i * levels + j]).abs() < 1e-12);
                prop_assert_eq!(g.get(i, j), g.get(j, i));
            }
        }
        let s = glcm_stats(&g);
        prop_assert!(s.energy > 0.0 && s.energy <= 1.0 + 1e-12);
        prop_assert!(s.homogeneity > 0.0 && s.homogeneity <= 1.0 + 1e-12);
        prop_assert!(s.correlation.abs() <= 1.0 + 1e-9);
        prop_assert!(s.to_array().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn histograms_are_normalized(w in window_strategy(), bins in 2usize..32) {
        let h = compute_glh(&w, bins).unwrap();
        prop_assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(h.iter().all(|&b| b >= 0.0));
    }

    #[test]
    fn features_are_finite(seed in any::<u64>(), r in 0usize..12, c in 0usize..12) {
        let img = noise_image(12, 12, seed);
        let f = pixel_feature(&img, (r, c), 5, 16, 16).unwrap();
        prop_assert!(f.values.iter().all(|v| v.is_finite()));
        prop_assert!((f.values[..16].iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
