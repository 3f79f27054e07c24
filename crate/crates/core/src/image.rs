//! Grayscale rasters, noise synthesis, patch extraction/aggregation and PSNR.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{ensure, Error, Result};
use crate::scalar::Real;

/// Row-major grayscale raster. Values are nominally in `[0, 255]` but are not
/// clipped until the image is written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Real> ImageBuffer<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        ensure!(
            data.len() == width * height,
            "image data length {} does not match {}x{}",
            data.len(),
            width,
            height
        );
        ensure!(
            data.iter().all(|v| v.is_finite()),
            "image contains non-finite values"
        );
        Ok(ImageBuffer {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        ImageBuffer {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        ImageBuffer {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: T) {
        self.data[row * self.width + col] = v;
    }

    /// Pixel lookup with edge replication for out-of-range coordinates.
    #[inline]
    pub fn get_clamped(&self, row: isize, col: isize) -> T {
        let r = row.clamp(0, self.height as isize - 1) as usize;
        let c = col.clamp(0, self.width as isize - 1) as usize;
        self.get(r, c)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn same_shape(&self, other: &ImageBuffer<T>) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Rounds every pixel to the 8-bit value it would be stored as.
    pub fn quantized(&self) -> ImageBuffer<T> {
        ImageBuffer {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| T::lit(to_u8(v) as f64)).collect(),
        }
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| to_u8(v)).collect()
    }

    pub fn cast<U: Real>(&self) -> ImageBuffer<U> {
        ImageBuffer {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
        }
    }
}

/// Clip to `[0, 255]` and round half away from zero.
#[inline]
pub fn to_u8<T: Real>(v: T) -> u8 {
    let v = v.to_f64_lossy().clamp(0.0, 255.0);
    v.round() as u8
}

/// Square image block with its top-left position in the source image.
/// `values` holds the block row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch<T> {
    pub side: usize,
    pub origin: (usize, usize),
    pub values: Vec<T>,
}

impl<T: Real> Patch<T> {
    pub fn new(side: usize, origin: (usize, usize), values: Vec<T>) -> Result<Self> {
        ensure!(
            values.len() == side * side,
            "patch of side {} needs {} values, got {}",
            side,
            side * side,
            values.len()
        );
        Ok(Patch {
            side,
            origin,
            values,
        })
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> T {
        self.values[r * self.side + c]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec<T> {
    pub sigma: T,
    pub seed: u64,
}

/// Adds i.i.d. zero-mean Gaussian noise of standard deviation `sigma`.
/// Output is not clipped.
pub fn add_noise<T: Real>(img: &ImageBuffer<T>, spec: NoiseSpec<T>) -> Result<ImageBuffer<T>> {
    ensure!(
        spec.sigma >= T::zero() && spec.sigma.is_finite(),
        "noise sigma must be a finite value >= 0, got {}",
        spec.sigma
    );
    if spec.sigma == T::zero() {
        return Ok(img.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sigma = spec.sigma.to_f64_lossy();
    let data = img
        .data
        .iter()
        .map(|&v| {
            let n: f64 = StandardNormal.sample(&mut rng);
            v + T::lit(n * sigma)
        })
        .collect();
    Ok(ImageBuffer {
        width: img.width,
        height: img.height,
        data,
    })
}

/// Top-left origins of every `side`×`side` block on a `stride` grid, row-major.
pub fn patch_origins(
    width: usize,
    height: usize,
    side: usize,
    stride: usize,
) -> Result<Vec<(usize, usize)>> {
    ensure!(side >= 1, "patch side must be >= 1");
    ensure!(stride >= 1, "patch stride must be >= 1");
    ensure!(
        side <= width && side <= height,
        "patch side {} exceeds image size {}x{}",
        side,
        width,
        height
    );
    let mut out = Vec::new();
    for r in (0..=height - side).step_by(stride) {
        for c in (0..=width - side).step_by(stride) {
            out.push((r, c));
        }
    }
    Ok(out)
}

pub fn extract_patch<T: Real>(
    img: &ImageBuffer<T>,
    origin: (usize, usize),
    side: usize,
) -> Patch<T> {
    let (r0, c0) = origin;
    let mut values = Vec::with_capacity(side * side);
    for r in r0..r0 + side {
        values.extend_from_slice(&img.data[r * img.width + c0..r * img.width + c0 + side]);
    }
    Patch {
        side,
        origin,
        values,
    }
}

/// All blocks of the given side on a stride grid, in row-major origin order.
pub fn extract_patches<T: Real>(
    img: &ImageBuffer<T>,
    side: usize,
    stride: usize,
) -> Result<Vec<Patch<T>>> {
    Ok(patch_origins(img.width, img.height, side, stride)?
        .into_iter()
        .map(|o| extract_patch(img, o, side))
        .collect())
}

/// Closed-form minimizer of the global objective over the image for fixed
/// patch estimates:
/// `x_i = (mu * y_i + Σ_k est_k(i)) / (mu + count_i)`.
/// Pixels covered by no patch keep their noisy value.
pub fn aggregate_patches<T: Real>(
    estimates: &[Patch<T>],
    noisy: &ImageBuffer<T>,
    mu: T,
) -> Result<ImageBuffer<T>> {
    ensure!(
        mu >= T::zero() && mu.is_finite(),
        "mu must be finite and >= 0"
    );
    let (w, h) = (noisy.width, noisy.height);
    for p in estimates {
        ensure!(
            p.values.len() == p.side * p.side,
            "patch at {:?} has inconsistent length",
            p.origin
        );
        ensure!(
            p.origin.0 + p.side <= h && p.origin.1 + p.side <= w,
            "patch at {:?} of side {} exceeds image {}x{}",
            p.origin,
            p.side,
            w,
            h
        );
    }

    // Accumulate row by row: each output row only reads the patches that
    // cover it, in their original order, so the summation order is fixed.
    // Sums are taken relative to the first estimate at each pixel, which
    // keeps identical estimates exact.
    let data: Vec<T> = (0..h)
        .into_par_iter()
        .flat_map_iter(|row| {
            let mut shift = vec![T::zero(); w];
            let mut sum = vec![T::zero(); w];
            let mut count = vec![0u32; w];
            for p in estimates {
                let (r0, c0) = p.origin;
                if row < r0 || row >= r0 + p.side {
                    continue;
                }
                let src = &p.values[(row - r0) * p.side..(row - r0 + 1) * p.side];
                for (k, &v) in src.iter().enumerate() {
                    let c = c0 + k;
                    if count[c] == 0 {
                        shift[c] = v;
                    } else {
                        sum[c] += v - shift[c];
                    }
                    count[c] += 1;
                }
            }
            let y = &noisy.data[row * w..(row + 1) * w];
            (0..w)
                .map(|c| {
                    if count[c] == 0 {
                        y[c]
                    } else {
                        let s = shift[c];
                        s + (mu * (y[c] - s) + sum[c]) / (mu + T::lit(count[c] as f64))
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(ImageBuffer {
        width: w,
        height: h,
        data,
    })
}

pub fn mse<T: Real>(reference: &ImageBuffer<T>, test: &ImageBuffer<T>) -> Result<T> {
    ensure!(
        reference.same_shape(test),
        "image sizes differ: {}x{} vs {}x{}",
        reference.width,
        reference.height,
        test.width,
        test.height
    );
    ensure!(!reference.data.is_empty(), "empty image");
    let sum: T = reference
        .data
        .iter()
        .zip(&test.data)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    Ok(sum / T::lit(reference.data.len() as f64))
}

/// Peak signal-to-noise ratio `10·log10(255² / MSE)` in decibels.
/// Identical images yield `+∞`.
pub fn psnr<T: Real>(reference: &ImageBuffer<T>, test: &ImageBuffer<T>) -> Result<T> {
    let m = mse(reference, test)?;
    if m == T::zero() {
        return Ok(T::infinity());
    }
    Ok(T::lit(10.0) * (T::lit(255.0 * 255.0) / m).log10())
}

impl<T: Real> TryFrom<(usize, usize, Vec<T>)> for ImageBuffer<T> {
    type Error = Error;
    fn try_from((w, h, d): (usize, usize, Vec<T>)) -> Result<Self> {
        ImageBuffer::new(w, h, d)
    }
}
