//! Per-pixel texture features: a gray-level histogram concatenated with six
//! co-occurrence statistics, computed over odd windows of several sizes.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{ensure, Error, Result};
use crate::image::{ImageBuffer, Patch};
use crate::io::{read_bytes, write_bytes, LeReader};
use crate::scalar::Real;

pub const FEATURE_MAGIC: &[u8; 8] = b"SSFEAT01";

/// Distance-1 offsets in four directions: 0°, 90°, 45° and 135°.
pub const DEFAULT_OFFSETS: [(isize, isize); 4] = [(0, 1), (1, 0), (1, 1), (1, -1)];

/// Window sizes for coarse-to-fine classification layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchSizePlan {
    pub resolution: f64,
    pub s_init: usize,
    pub s_large: usize,
    pub s_middle: usize,
    pub s_small: usize,
}

impl PatchSizePlan {
    /// Window sizes for `layers` layers, largest first. Three layers map to
    /// (large, middle, small); two to (large, small); one to (large). Deeper
    /// hierarchies repeat the small size.
    pub fn layer_sizes(&self, layers: usize) -> Vec<usize> {
        match layers {
            0 => Vec::new(),
            1 => vec![self.s_large],
            2 => vec![self.s_large, self.s_small],
            n => {
                let mut v = vec![self.s_large, self.s_middle];
                v.resize(n, self.s_small);
                v
            }
        }
    }
}

/// Picks the layer window sizes from the image resolution `PS`:
/// `s_init = 2·⌊3·PS/2⌋ + 1`, `s_large` = override or `s_init`, `s_small = 3`,
/// `s_middle = s_small + (s_large − 3)/2 + ((s_large − 3)/2 mod 2)`.
pub fn plan_patch_sizes(resolution: f64, s_large_override: Option<usize>) -> Result<PatchSizePlan> {
    ensure!(
        resolution.is_finite() && resolution >= 1.0,
        "resolution must be >= 1, got {}",
        resolution
    );
    let s_init = 2 * (resolution * 3.0 / 2.0).floor() as usize + 1;
    if let Some(s) = s_large_override {
        ensure!(
            s >= 3 && s % 2 == 1,
            "largest patch size must be odd and >= 3, got {}",
            s
        );
    }
    let s_large = s_large_override.unwrap_or(s_init);
    let s_small = 3;
    let half = (s_large - 3) / 2;
    let s_middle = s_small + half + half % 2;
    ensure!(
        s_large > s_middle && s_middle > s_small,
        "largest patch size {} leaves no room for a distinct middle size (need >= 7)",
        s_large
    );
    Ok(PatchSizePlan {
        resolution,
        s_init,
        s_large,
        s_middle,
        s_small,
    })
}

/// Histogram/co-occurrence settings shared by every window.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureParams {
    pub bins: usize,
    pub levels: usize,
    pub offsets: Vec<(isize, isize)>,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            bins: 16,
            levels: 16,
            offsets: DEFAULT_OFFSETS.to_vec(),
        }
    }
}

impl FeatureParams {
    pub fn feature_len(&self) -> usize {
        self.bins + GlcmStats::<f64>::LEN
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.bins >= 2, "histogram bins must be >= 2");
        ensure!(self.levels >= 2, "co-occurrence levels must be >= 2");
        ensure!(
            !self.offsets.is_empty(),
            "at least one co-occurrence offset is required"
        );
        Ok(())
    }
}

/// Bin index of a gray value: `⌊clamp(v, 0, 255) · n / 256⌋`, capped at `n − 1`.
#[inline]
pub fn quantize<T: Real>(v: T, n: usize) -> usize {
    let v = v.to_f64_lossy().clamp(0.0, 255.0);
    ((v * n as f64 / 256.0).floor() as usize).min(n - 1)
}

/// Normalized gray-level histogram of a window.
pub fn compute_glh<T: Real>(window: &Patch<T>, bins: usize) -> Result<Vec<T>> {
    ensure!(bins >= 2, "histogram bins must be >= 2");
    ensure!(!window.values.is_empty(), "empty window");
    let mut counts = vec![0usize; bins];
    for &v in &window.values {
        counts[quantize(v, bins)] += 1;
    }
    let total = T::lit(window.values.len() as f64);
    Ok(counts
        .into_iter()
        .map(|c| T::lit(c as f64) / total)
        .collect())
}

/// Normalized, symmetric gray-level co-occurrence matrix (row-major `L × L`).
#[derive(Debug, Clone, PartialEq)]
pub struct GlcmMatrix<T> {
    pub levels: usize,
    pub counts: Vec<T>,
}

impl<T: Real> GlcmMatrix<T> {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.counts[i * self.levels + j]
    }
}

/// Co-occurrence matrix accumulated over all `offsets`; each pair `(a, b)`
/// counts towards both `(a, b)` and `(b, a)`.
pub fn compute_glcm<T: Real>(
    window: &Patch<T>,
    levels: usize,
    offsets: &[(isize, isize)],
) -> Result<GlcmMatrix<T>> {
    ensure!(levels >= 2, "co-occurrence levels must be >= 2");
    ensure!(window.side >= 2, "co-occurrence window side must be >= 2");
    ensure!(
        !offsets.is_empty(),
        "at least one co-occurrence offset is required"
    );
    let side = window.side as isize;
    let q: Vec<usize> = window.values.iter().map(|&v| quantize(v, levels)).collect();
    let mut counts = vec![0u64; levels * levels];
    let mut total = 0u64;
    for &(dr, dc) in offsets {
        for r in 0..side {
            let r2 = r + dr;
            if r2 < 0 || r2 >= side {
                continue;
            }
            for c in 0..side {
                let c2 = c + dc;
                if c2 < 0 || c2 >= side {
                    continue;
                }
                let a = q[(r * side + c) as usize];
                let b = q[(r2 * side + c2) as usize];
                counts[a * levels + b] += 1;
                counts[b * levels + a] += 1;
                total += 2;
            }
        }
    }
    if total == 0 {
        return Err(Error::param(format!(
            "window of side {} is too small for every offset",
            window.side
        )));
    }
    let t = T::lit(total as f64);
    Ok(GlcmMatrix {
        levels,
        counts: counts.into_iter().map(|c| T::lit(c as f64) / t).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlcmStats<T> {
    pub contrast: T,
    pub dissimilarity: T,
    pub homogeneity: T,
    pub energy: T,
    pub entropy: T,
    pub correlation: T,
}

impl<T: Real> GlcmStats<T> {
    pub const LEN: usize = 6;

    pub fn to_array(&self) -> [T; 6] {
        [
            self.contrast,
            self.dissimilarity,
            self.homogeneity,
            self.energy,
            self.entropy,
            self.correlation,
        ]
    }
}

/// Haralick-style statistics. Entropy uses base 2 with `0·log 0 = 0`;
/// correlation is 0 when `σ_i σ_j < 1e-12`.
pub fn glcm_stats<T: Real>(glcm: &GlcmMatrix<T>) -> GlcmStats<T> {
    let l = glcm.levels;
    let mut s = GlcmStats {
        contrast: T::zero(),
        dissimilarity: T::zero(),
        homogeneity: T::zero(),
        energy: T::zero(),
        entropy: T::zero(),
        correlation: T::zero(),
    };
    let (mut mu_i, mut mu_j) = (T::zero(), T::zero());
    for i in 0..l {
        for j in 0..l {
            let p = glcm.get(i, j);
            if p == T::zero() {
                continue;
            }
            let (fi, fj) = (T::lit(i as f64), T::lit(j as f64));
            let d = (fi - fj).abs();
            s.contrast += d * d * p;
            s.dissimilarity += d * p;
            s.homogeneity += p / (T::one() + d);
            s.energy += p * p;
            s.entropy -= p * p.log2();
            mu_i += fi * p;
            mu_j += fj * p;
        }
    }
    let (mut var_i, mut var_j, mut cov) = (T::zero(), T::zero(), T::zero());
    for i in 0..l {
        for j in 0..l {
            let p = glcm.get(i, j);
            if p == T::zero() {
                continue;
            }
            let di = T::lit(i as f64) - mu_i;
            let dj = T::lit(j as f64) - mu_j;
            var_i += di * di * p;
            var_j += dj * dj * p;
            cov += di * dj * p;
        }
    }
    let denom = var_i.sqrt() * var_j.sqrt();
    if denom >= T::lit(1e-12) {
        s.correlation = cov / denom;
    }
    s
}

/// Concatenated histogram + co-occurrence statistics of one pixel's window.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    pub values: Vec<T>,
    /// Classification layer the vector was extracted for (0 if unassigned).
    pub layer: usize,
}

impl<T: Real> FeatureVector<T> {
    pub fn new(values: Vec<T>) -> Self {
        FeatureVector { values, layer: 0 }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `size × size` window centered at `(row, col)`, replicating edge pixels
/// past the border. The origin is the nominal top-left corner clamped to 0.
pub fn window_at<T: Real>(img: &ImageBuffer<T>, row: usize, col: usize, size: usize) -> Patch<T> {
    let half = (size / 2) as isize;
    let (r0, c0) = (row as isize - half, col as isize - half);
    let mut values = Vec::with_capacity(size * size);
    for r in r0..r0 + size as isize {
        for c in c0..c0 + size as isize {
            values.push(img.get_clamped(r, c));
        }
    }
    Patch {
        side: size,
        origin: (r0.max(0) as usize, c0.max(0) as usize),
        values,
    }
}

pub fn pixel_feature_with<T: Real>(
    img: &ImageBuffer<T>,
    pixel: (usize, usize),
    size: usize,
    params: &FeatureParams,
) -> Result<FeatureVector<T>> {
    ensure!(
        size % 2 == 1 && size >= 3,
        "window size must be odd and >= 3, got {}",
        size
    );
    ensure!(
        pixel.0 < img.height() && pixel.1 < img.width(),
        "pixel {:?} outside {}x{} image",
        pixel,
        img.width(),
        img.height()
    );
    let win = window_at(img, pixel.0, pixel.1, size);
    let mut values = compute_glh(&win, params.bins)?;
    let glcm = compute_glcm(&win, params.levels, &params.offsets)?;
    values.extend_from_slice(&glcm_stats(&glcm).to_array());
    Ok(FeatureVector { values, layer: 0 })
}

/// Feature vector of the `size`-window centered at `pixel`, with the default
/// four distance-1 co-occurrence offsets.
pub fn pixel_feature<T: Real>(
    img: &ImageBuffer<T>,
    pixel: (usize, usize),
    size: usize,
    bins: usize,
    levels: usize,
) -> Result<FeatureVector<T>> {
    let params = FeatureParams {
        bins,
        levels,
        ..FeatureParams::default()
    };
    pixel_feature_with(img, pixel, size, &params)
}

/// Features for the listed pixel indices (row-major `row*width + col`),
/// computed in parallel, returned in input order.
pub fn features_for_pixels<T: Real>(
    img: &ImageBuffer<T>,
    pixels: &[usize],
    size: usize,
    params: &FeatureParams,
    layer: usize,
) -> Result<Vec<FeatureVector<T>>> {
    params.validate()?;
    let w = img.width();
    pixels
        .par_iter()
        .map(|&idx| {
            let mut f = pixel_feature_with(img, (idx / w, idx % w), size, params)?;
            f.layer = layer;
            Ok(f)
        })
        .collect()
}

/// Row-major raster of per-pixel feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRaster<T> {
    pub height: usize,
    pub width: usize,
    pub feat_len: usize,
    pub data: Vec<T>,
}

impl<T: Real> FeatureRaster<T> {
    pub fn compute(img: &ImageBuffer<T>, size: usize, params: &FeatureParams) -> Result<Self> {
        let all: Vec<usize> = (0..img.width() * img.height()).collect();
        let feats = features_for_pixels(img, &all, size, params, 0)?;
        Ok(FeatureRaster {
            height: img.height(),
            width: img.width(),
            feat_len: params.feature_len(),
            data: feats.into_iter().flat_map(|f| f.values).collect(),
        })
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[T] {
        let k = (row * self.width + col) * self.feat_len;
        &self.data[k..k + self.feat_len]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + 8 * self.data.len());
        out.extend_from_slice(FEATURE_MAGIC);
        for v in [self.height, self.width, self.feat_len] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut rd = LeReader::new("feature raster", bytes, FEATURE_MAGIC)?;
        let height = rd.u32()? as usize;
        let width = rd.u32()? as usize;
        let feat_len = rd.u32()? as usize;
        let n = height * width * feat_len;
        if bytes.len() != 20 + 8 * n {
            return Err(Error::format(
                "feature raster",
                "length does not match header",
            ));
        }
        let data = (0..n)
            .map(|_| rd.f64().map(T::lit))
            .collect::<Result<Vec<_>>>()?;
        rd.finish()?;
        Ok(FeatureRaster {
            height,
            width,
            feat_len,
            data,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_bytes(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        FeatureRaster::from_bytes(&read_bytes(path.as_ref())?)
    }
}
