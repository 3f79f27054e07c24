//! Synthetic four-texture mosaic with known ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ensure, Result};
use crate::image::ImageBuffer;
use crate::scalar::Real;
use crate::src::LabelMap;

/// Class index of each quadrant (top-left, top-right, bottom-left,
/// bottom-right) for `k` classes.
fn quadrant_classes(k: usize) -> [usize; 4] {
    match k {
        2 => [0, 1, 0, 1],
        3 => [0, 1, 2, 2],
        _ => [0, 1, 2, 3],
    }
}

fn gaussian_field(rng: &mut ChaCha8Rng, n: usize, sigma: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * sigma
        })
        .collect()
}

/// 3×3 box filter with edge replication.
fn box_blur(field: &[f64], size: usize) -> Vec<f64> {
    let at = |r: isize, c: isize| {
        let r = r.clamp(0, size as isize - 1) as usize;
        let c = c.clamp(0, size as isize - 1) as usize;
        field[r * size + c]
    };
    let mut out = vec![0.0; size * size];
    for r in 0..size as isize {
        for c in 0..size as isize {
            let mut s = 0.0;
            for dr in -1..=1 {
                for dc in -1..=1 {
                    s += at(r + dr, c + dc);
                }
            }
            out[r as usize * size + c as usize] = s / 9.0;
        }
    }
    out
}

/// Full-frame texture for `class`: 0 smooth low-variance field, 1 blocky
/// high-contrast tiles, 2 diagonal stripes, 3 granular noise.
fn texture(class: usize, size: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = size * size;
    match class {
        0 => {
            let wobble = box_blur(&box_blur(&gaussian_field(rng, n, 6.0), size), size);
            (0..n)
                .map(|i| {
                    let (r, c) = ((i / size) as f64, (i % size) as f64);
                    50.0 + 4.0 * (r / 11.0).sin() * (c / 13.0).cos() + wobble[i]
                })
                .collect()
        }
        1 => {
            let blocks = size.div_ceil(8);
            let tiles: Vec<f64> = (0..blocks * blocks)
                .map(|_| rng.random_range(80.0..=220.0))
                .collect();
            (0..n)
                .map(|i| tiles[(i / size / 8) * blocks + (i % size) / 8])
                .collect()
        }
        2 => (0..n)
            .map(|i| {
                let (r, c) = (i / size, i % size);
                170.0 + 40.0 * (2.0 * std::f64::consts::PI * (r + c) as f64 / 8.0).sin()
            })
            .collect(),
        _ => box_blur(&gaussian_field(rng, n, 60.0), size)
            .into_iter()
            .map(|v| 110.0 + v)
            .collect(),
    }
}

/// `size × size` mosaic whose quadrants carry the textures of `k` classes,
/// with 8-bit integer gray values, plus the matching truth map.
pub fn synth_mosaic<T: Real>(
    size: usize,
    k: usize,
    seed: u64,
) -> Result<(ImageBuffer<T>, LabelMap)> {
    ensure!(size >= 64, "mosaic size must be >= 64, got {}", size);
    ensure!(
        (2..=4).contains(&k),
        "class count must be 2, 3 or 4, got {}",
        k
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let textures: Vec<Vec<f64>> = (0..k).map(|c| texture(c, size, &mut rng)).collect();
    let quads = quadrant_classes(k);
    let half = size / 2;
    let class_at = |r: usize, c: usize| quads[usize::from(r >= half) * 2 + usize::from(c >= half)];

    let img = ImageBuffer::from_fn(size, size, |r, c| {
        let v = textures[class_at(r, c)][r * size + c];
        T::lit(v.clamp(0.0, 255.0).round())
    });
    let truth = (0..size * size)
        .map(|i| Some(class_at(i / size, i % size)))
        .collect();
    Ok((img, LabelMap::new(size, size, truth)?))
}
