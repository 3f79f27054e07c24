//! Patch-based denoising with a dictionary learned on the noisy image itself.
//!
//! The dictionary starts as an overcomplete DCT and is adapted by K-SVD on the
//! stride-1 patches of the noisy image. Every patch is then sparse-coded until
//! its residual drops under the noise-derived bound, and the overlapping
//! estimates are blended with the noisy image pixel by pixel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dict::{init_overcomplete_dct, train_ksvd_traced, Dictionary, KsvdConfig};
use crate::error::{ensure, Result};
use crate::image::{aggregate_patches, extract_patches, psnr, ImageBuffer, Patch};
use crate::linalg::Matrix;
use crate::omp::omp_batch;
use crate::scalar::Real;

/// How the per-patch sparsity/fidelity trade-off is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaMode<T> {
    /// Code each patch until `‖Dα − x‖² ≤ gain · p · σ²`; the traced
    /// objective uses half that bound as the per-atom weight.
    Constraint,
    /// Use this per-atom weight; the coding bound becomes twice its value.
    Fixed(T),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseConfig<T> {
    pub sigma: T,
    pub patch_side: usize,
    pub atom_count: usize,
    pub max_sparsity: usize,
    pub ksvd_iterations: usize,
    /// Weight of the noisy image in the final blend; `None` means `30 / σ`.
    pub mu: Option<T>,
    /// Multiplier on `p · σ²` for the coding bound.
    pub gain: T,
    pub lambda_mode: LambdaMode<T>,
    pub seed: u64,
    /// Dictionary training uses at most this many patches.
    pub max_training_patches: usize,
}

impl<T: Real> Default for DenoiseConfig<T> {
    fn default() -> Self {
        DenoiseConfig {
            sigma: T::lit(10.0),
            patch_side: 8,
            atom_count: 256,
            max_sparsity: 3,
            ksvd_iterations: 10,
            mu: None,
            gain: T::lit(1.15),
            lambda_mode: LambdaMode::Constraint,
            seed: 0,
            max_training_patches: 60_000,
        }
    }
}

impl<T: Real> DenoiseConfig<T> {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.sigma > T::zero() && self.sigma.is_finite(),
            "sigma must be finite and > 0, got {}",
            self.sigma
        );
        ensure!(self.patch_side >= 2, "patch side must be >= 2");
        ensure!(self.ksvd_iterations >= 1, "K-SVD iterations must be >= 1");
        ensure!(self.max_sparsity >= 1, "max_sparsity must be >= 1");
        ensure!(
            self.atom_count >= self.patch_side * self.patch_side,
            "atom count {} is below the patch dimension {}",
            self.atom_count,
            self.patch_side * self.patch_side
        );
        ensure!(
            self.gain > T::zero() && self.gain.is_finite(),
            "gain must be finite and > 0"
        );
        if let Some(mu) = self.mu {
            ensure!(
                mu >= T::zero() && mu.is_finite(),
                "mu must be finite and >= 0"
            );
        }
        if let LambdaMode::Fixed(l) = self.lambda_mode {
            ensure!(
                l >= T::zero() && l.is_finite(),
                "lambda must be finite and >= 0"
            );
        }
        ensure!(
            self.max_training_patches >= 1,
            "max_training_patches must be >= 1"
        );
        Ok(())
    }

    pub fn effective_mu(&self) -> T {
        self.mu.unwrap_or_else(|| T::lit(30.0) / self.sigma)
    }

    /// `(coding bound, per-atom weight)`
    pub fn bounds(&self) -> (T, T) {
        let p = T::lit((self.patch_side * self.patch_side) as f64);
        match self.lambda_mode {
            LambdaMode::Constraint => {
                let eps = self.gain * p * self.sigma * self.sigma;
                (eps, eps * T::lit(0.5))
            }
            LambdaMode::Fixed(l) => (l + l, l),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DenoiseResult<T> {
    pub denoised: ImageBuffer<T>,
    pub dictionary: Dictionary<T>,
    /// Set when a clean reference was supplied.
    pub psnr_noisy: Option<T>,
    pub psnr_denoised: Option<T>,
    /// Objective after each K-SVD iteration.
    pub objective_trace: Vec<T>,
}

/// Seeded sample of `k` out of `n` indices, ascending.
fn training_subset(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

pub fn denoise_image<T: Real>(
    noisy: &ImageBuffer<T>,
    config: &DenoiseConfig<T>,
    reference: Option<&ImageBuffer<T>>,
) -> Result<DenoiseResult<T>> {
    config.validate()?;
    let side = config.patch_side;
    ensure!(
        noisy.width() >= side && noisy.height() >= side,
        "image {}x{} is smaller than the {}x{} patch",
        noisy.width(),
        noisy.height(),
        side,
        side
    );
    if let Some(r) = reference {
        ensure!(
            r.same_shape(noisy),
            "reference and noisy images differ in size"
        );
    }

    let patches = extract_patches(noisy, side, 1)?;
    let p = side * side;
    let cols: Vec<&[T]> = patches.iter().map(|q| q.values.as_slice()).collect();
    let signals = Matrix::from_columns(p, &cols)?;

    let (error_bound, sparsity_weight) = config.bounds();
    let ksvd = KsvdConfig {
        iterations: config.ksvd_iterations,
        max_sparsity: config.max_sparsity,
        error_bound,
        sparsity_weight,
        seed: config.seed,
    };
    let init = init_overcomplete_dct(side, config.atom_count)?;

    let subsample = patches.len() > config.max_training_patches;
    let outcome = if subsample {
        let picked = training_subset(patches.len(), config.max_training_patches, config.seed);
        let train: Vec<&[T]> = picked.iter().map(|&i| cols[i]).collect();
        train_ksvd_traced(&Matrix::from_columns(p, &train)?, &ksvd, &init)?
    } else {
        train_ksvd_traced(&signals, &ksvd, &init)?
    };
    let codes = if subsample {
        omp_batch(&outcome.dictionary, &signals, &ksvd)?
    } else {
        outcome.codes
    };

    let estimates: Vec<Patch<T>> = patches
        .iter()
        .zip(&codes)
        .map(|(q, code)| Patch {
            side,
            origin: q.origin,
            values: code.reconstruct(outcome.dictionary.atoms()),
        })
        .collect();
    let denoised = aggregate_patches(&estimates, noisy, config.effective_mu())?;

    let (psnr_noisy, psnr_denoised) = match reference {
        Some(r) => (Some(psnr(r, noisy)?), Some(psnr(r, &denoised)?)),
        None => (None, None),
    };
    Ok(DenoiseResult {
        denoised,
        dictionary: outcome.dictionary,
        psnr_noisy,
        psnr_denoised,
        objective_trace: outcome.objective_trace,
    })
}
