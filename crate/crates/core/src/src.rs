//! Sparse-representation classification.
//!
//! A query feature vector is sparse-coded over the concatenated, unit-norm
//! training columns of all classes; the class whose coefficients alone
//! reconstruct the query best wins. The hierarchical classifier runs this
//! coarse-to-fine over shrinking windows, accepting a pixel only when its
//! best residual is small and clearly separated from the runner-up.

use std::ops::Range;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{ensure, Error, Result};
use crate::features::{features_for_pixels, FeatureParams, FeatureVector, PatchSizePlan};
use crate::image::ImageBuffer;
use crate::io::{self, GrayU8, CLASS_PALETTE, UNCERTAIN_COLOR};
use crate::linalg::{norm, Matrix};
use crate::omp::omp_solve;
use crate::scalar::Real;

/// Gray value marking an unlabeled / uncertain pixel in label PGMs.
pub const UNLABELED: u8 = 255;

/// Per-class training columns `[A_1 … A_K]` for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDictionary<T> {
    class_count: usize,
    ranges: Vec<Range<usize>>,
    columns: Matrix<T>,
    layer: usize,
}

impl<T: Real> ClassDictionary<T> {
    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn columns(&self) -> &Matrix<T> {
        &self.columns
    }

    pub fn feature_dim(&self) -> usize {
        self.columns.rows()
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    /// Class owning column `j`.
    pub fn class_of(&self, j: usize) -> usize {
        self.ranges
            .iter()
            .position(|r| r.contains(&j))
            .expect("column index within dictionary")
    }
}

impl<T> AsRef<Matrix<T>> for ClassDictionary<T> {
    fn as_ref(&self) -> &Matrix<T> {
        &self.columns
    }
}

/// Concatenates the per-class samples in class order, normalizing each column.
pub fn build_class_dictionary<T: Real>(
    samples: &[Vec<FeatureVector<T>>],
    layer: usize,
) -> Result<ClassDictionary<T>> {
    ensure!(!samples.is_empty(), "at least one class is required");
    let dim = samples
        .iter()
        .flat_map(|c| c.first())
        .map(|f| f.len())
        .next()
        .unwrap_or(0);
    ensure!(dim > 0, "feature vectors must be non-empty");
    let mut cols: Vec<Vec<T>> = Vec::new();
    let mut ranges = Vec::with_capacity(samples.len());
    for (k, class) in samples.iter().enumerate() {
        ensure!(!class.is_empty(), "class {} has no training samples", k);
        let start = cols.len();
        for f in class {
            ensure!(
                f.len() == dim,
                "class {} sample has length {}, expected {}",
                k,
                f.len(),
                dim
            );
            let n = norm(&f.values);
            ensure!(
                n > T::zero() && n.is_finite(),
                "class {} has a zero-norm or non-finite sample",
                k
            );
            cols.push(f.values.iter().map(|&v| v / n).collect());
        }
        ranges.push(start..cols.len());
    }
    Ok(ClassDictionary {
        class_count: samples.len(),
        ranges,
        columns: Matrix::from_columns(dim, &cols)?,
        layer,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrcDecision<T> {
    /// Accepted class, or `None` for an uncertain pixel.
    pub label: Option<usize>,
    /// `r_i = ‖y − D δ_i(ψ)‖₂` per class.
    pub residuals: Vec<T>,
    /// Smallest residual.
    pub tau: T,
    /// Class attaining `tau` (lowest index on ties).
    pub theta: usize,
}

/// Classifies one feature vector by per-class reconstruction residual.
/// `y` is unit-normalized before coding.
pub fn src_classify<T: Real>(
    y: &FeatureVector<T>,
    dict: &ClassDictionary<T>,
    max_sparsity: usize,
) -> Result<SrcDecision<T>> {
    ensure!(
        y.len() == dict.feature_dim(),
        "feature length {} does not match dictionary dimension {}",
        y.len(),
        dict.feature_dim()
    );
    let n = norm(&y.values);
    let unit: Vec<T> = if n > T::zero() {
        y.values.iter().map(|&v| v / n).collect()
    } else {
        y.values.clone()
    };
    let code = omp_solve(dict, &unit, max_sparsity, T::zero())?;

    let mut partial: Vec<Vec<T>> = vec![unit.clone(); dict.class_count];
    for (&a, &c) in code.support.iter().zip(&code.coefficients) {
        let class = dict.class_of(a);
        for (r, &d) in partial[class].iter_mut().zip(dict.columns.column(a)) {
            *r -= c * d;
        }
    }
    let residuals: Vec<T> = partial.iter().map(|r| norm(r)).collect();
    let mut theta = 0;
    for (i, &r) in residuals.iter().enumerate() {
        if r < residuals[theta] {
            theta = i;
        }
    }
    Ok(SrcDecision {
        label: Some(theta),
        tau: residuals[theta],
        theta,
        residuals,
    })
}

/// Accepts `theta` only if `tau ≤ delta1` and every other class's residual
/// exceeds `tau` by at least `delta2`.
pub fn threshold_decide<T: Real>(decision: &SrcDecision<T>, delta1: T, delta2: T) -> Option<usize> {
    if decision.tau > delta1 {
        return None;
    }
    let margin = decision
        .residuals
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != decision.theta)
        .map(|(_, &r)| r - decision.tau)
        .fold(T::infinity(), T::min);
    (margin >= delta2).then_some(decision.theta)
}

/// Per-pixel class labels with optional per-layer uncertainty masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<Option<usize>>,
    /// `uncertainty[h][i]`: pixel `i` was still uncertain after layer `h`.
    pub uncertainty: Vec<Vec<bool>>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<Option<usize>>) -> Result<Self> {
        ensure!(
            labels.len() == width * height,
            "{} labels for a {}x{} map",
            labels.len(),
            width,
            height
        );
        Ok(LabelMap {
            width,
            height,
            labels,
            uncertainty: Vec::new(),
        })
    }

    pub fn from_definite(width: usize, height: usize, labels: &[usize]) -> Result<Self> {
        LabelMap::new(width, height, labels.iter().map(|&l| Some(l)).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> Option<usize> {
        self.labels[row * self.width + col]
    }

    /// One more than the largest label present.
    pub fn class_count(&self) -> Result<usize> {
        self.labels
            .iter()
            .flatten()
            .max()
            .map(|m| m + 1)
            .ok_or_else(|| Error::param("label map has no labeled pixels"))
    }

    pub fn uncertain_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    /// Labels as plain indices; fails if any pixel is uncertain.
    pub fn definite_labels(&self) -> Result<Vec<usize>> {
        self.labels
            .iter()
            .map(|l| l.ok_or_else(|| Error::param("label map contains uncertain pixels")))
            .collect()
    }

    /// 8-bit raster with class indices; uncertain pixels are [`UNLABELED`].
    pub fn to_gray(&self) -> GrayU8 {
        GrayU8 {
            width: self.width,
            height: self.height,
            data: self
                .labels
                .iter()
                .map(|l| l.map_or(UNLABELED, |v| v.min(254) as u8))
                .collect(),
        }
    }

    pub fn from_gray(img: &GrayU8) -> Self {
        LabelMap {
            width: img.width,
            height: img.height,
            labels: img
                .data
                .iter()
                .map(|&v| (v != UNLABELED).then_some(v as usize))
                .collect(),
            uncertainty: Vec::new(),
        }
    }

    /// RGB rendering with the fixed class palette (gray for uncertain).
    pub fn to_rgb(&self) -> Vec<u8> {
        self.labels
            .iter()
            .flat_map(|l| match l {
                Some(c) => CLASS_PALETTE[c % CLASS_PALETTE.len()],
                None => UNCERTAIN_COLOR,
            })
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_gray(path, &self.to_gray())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = io::encode_png_rgb(self.width, self.height, &self.to_rgb())?;
        io::write_bytes(path.as_ref(), &bytes)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(LabelMap::from_gray(&io::read_gray(path)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyConfig<T> {
    pub layers: usize,
    /// Training columns drawn per class for each layer's dictionary.
    pub samples_per_class: usize,
    /// Largest accepted minimum residual.
    pub delta1: T,
    /// Smallest accepted gap between the best and runner-up residual.
    pub delta2: T,
    pub max_sparsity: usize,
    pub seed: u64,
    pub features: FeatureParams,
}

impl<T: Real> Default for HierarchyConfig<T> {
    fn default() -> Self {
        HierarchyConfig {
            layers: 3,
            samples_per_class: 64,
            delta1: T::lit(0.35),
            delta2: T::lit(0.05),
            max_sparsity: 5,
            seed: 1,
            features: FeatureParams::default(),
        }
    }
}

impl<T: Real> HierarchyConfig<T> {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.layers >= 1, "at least one layer is required");
        ensure!(
            self.samples_per_class >= 1,
            "samples_per_class must be >= 1"
        );
        ensure!(self.max_sparsity >= 1, "max_sparsity must be >= 1");
        ensure!(
            self.delta1 >= T::zero() && self.delta2 >= T::zero(),
            "thresholds must be >= 0"
        );
        self.features.validate()
    }
}

fn layer_rng(seed: u64, layer: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (layer as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Draws up to `n` of the (sorted) candidate pixels without replacement and
/// returns them sorted.
fn draw(candidates: &[usize], n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if candidates.len() <= n {
        return candidates.to_vec();
    }
    let mut picked: Vec<usize> = rand::seq::index::sample(rng, candidates.len(), n)
        .into_iter()
        .map(|k| candidates[k])
        .collect();
    picked.sort_unstable();
    picked
}

/// Seeded per-class pick of up to `per_class` labeled pixels, as used to
/// build the dictionary of `layer`. Each inner list is ascending.
pub fn draw_class_samples(
    labels: &[Option<usize>],
    class_count: usize,
    per_class: usize,
    seed: u64,
    layer: usize,
) -> Vec<Vec<usize>> {
    let mut pools = vec![Vec::new(); class_count];
    for (i, l) in labels.iter().enumerate() {
        if let Some(c) = *l {
            if c < class_count {
                pools[c].push(i);
            }
        }
    }
    let mut rng = layer_rng(seed, layer);
    pools.iter().map(|p| draw(p, per_class, &mut rng)).collect()
}

/// Multi-layer classification over shrinking windows.
///
/// Layer 1 trains on random picks from `training_mask` and classifies every
/// pixel; later layers retrain on random picks among pixels already labeled
/// and revisit only the pixels still uncertain. Layers before the last accept
/// a label only through [`threshold_decide`]; the last layer labels whatever
/// remains by minimum residual.
pub fn hierarchical_classify<T: Real>(
    img: &ImageBuffer<T>,
    training_mask: &LabelMap,
    config: &HierarchyConfig<T>,
    plan: &PatchSizePlan,
) -> Result<LabelMap> {
    config.validate()?;
    ensure!(
        training_mask.width == img.width() && training_mask.height == img.height(),
        "training mask is {}x{}, image is {}x{}",
        training_mask.width,
        training_mask.height,
        img.width(),
        img.height()
    );
    let sizes = plan.layer_sizes(config.layers);
    let n_pixels = img.width() * img.height();

    let class_count = training_mask.class_count()?;
    let mut pool_labels = training_mask.labels.clone();
    for (k, p) in draw_class_samples(&pool_labels, class_count, usize::MAX, 0, 0)
        .iter()
        .enumerate()
    {
        ensure!(!p.is_empty(), "class {} has no labeled training pixels", k);
        if p.len() < config.samples_per_class {
            log::warn!(
                "class {} has only {} training pixels (wanted {})",
                k,
                p.len(),
                config.samples_per_class
            );
        }
    }

    let mut labels: Vec<Option<usize>> = vec![None; n_pixels];
    let mut active: Vec<usize> = (0..n_pixels).collect();
    let mut previous_picks: Vec<Vec<usize>> = vec![Vec::new(); class_count];
    let mut masks = Vec::with_capacity(config.layers);

    for (h, &size) in sizes.iter().enumerate() {
        let layer = h + 1;
        let mut picks = draw_class_samples(
            &pool_labels,
            class_count,
            config.samples_per_class,
            config.seed,
            layer,
        );
        for (k, chosen) in picks.iter_mut().enumerate() {
            if chosen.is_empty() {
                log::warn!(
                    "layer {}: class {} has no labeled pixels, reusing previous samples",
                    layer,
                    k
                );
                *chosen = previous_picks[k].clone();
            }
        }
        let samples = picks
            .iter()
            .map(|p| features_for_pixels(img, p, size, &config.features, layer))
            .collect::<Result<Vec<_>>>()?;
        let dict = build_class_dictionary(&samples, layer)?;

        let last = layer == sizes.len();
        let decided: Vec<Option<usize>> = active
            .par_iter()
            .map(|&idx| {
                let f = features_for_pixels(img, &[idx], size, &config.features, layer)?
                    .pop()
                    .expect("one feature");
                let d = src_classify(&f, &dict, config.max_sparsity)?;
                Ok(if last {
                    Some(d.theta)
                } else {
                    threshold_decide(&d, config.delta1, config.delta2)
                })
            })
            .collect::<Result<_>>()?;
        let mut still = Vec::new();
        for (&idx, d) in active.iter().zip(decided) {
            match d {
                Some(c) => labels[idx] = Some(c),
                None => still.push(idx),
            }
        }
        log::info!(
            "layer {} (window {}): {} of {} pixels labeled, {} uncertain",
            layer,
            size,
            active.len() - still.len(),
            active.len(),
            still.len()
        );
        let mut mask = vec![false; n_pixels];
        for &i in &still {
            mask[i] = true;
        }
        masks.push(mask);
        active = still;
        previous_picks = picks;
        pool_labels.clone_from(&labels);
    }

    let mut out = LabelMap::new(img.width(), img.height(), labels)?;
    out.uncertainty = masks;
    Ok(out)
}
