//! Sparse-representation tools for grayscale remote-sensing scenes: K-SVD
//! patch denoising, gray-level histogram and co-occurrence texture features,
//! hierarchical sparse-representation classification with a double residual
//! threshold, a linear one-vs-one SVM baseline, and accuracy/kappa metrics.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar for everyday use.

pub mod denoise;
pub mod dict;
mod error;
pub mod features;
pub mod image;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod omp;
mod scalar;
pub mod src;
pub mod svm;
pub mod synth;

pub use denoise::{denoise_image, DenoiseConfig, DenoiseResult, LambdaMode};
pub use dict::{init_overcomplete_dct, ksvd_sweep, train_ksvd, Dictionary, KsvdConfig};
pub use error::{Error, Result};
pub use features::{
    compute_glcm, compute_glh, glcm_stats, pixel_feature, plan_patch_sizes, FeatureVector,
    GlcmMatrix, GlcmStats, PatchSizePlan,
};
pub use image::{
    add_noise, aggregate_patches, extract_patches, psnr, ImageBuffer, NoiseSpec, Patch,
};
pub use linalg::Matrix;
pub use metrics::{confusion, kappa, overall_accuracy, report, ConfusionMatrix, MetricEntry};
pub use omp::{omp_batch, omp_solve, SparseCode};
pub use scalar::Real;
pub use src::{
    build_class_dictionary, draw_class_samples, hierarchical_classify, src_classify,
    threshold_decide, ClassDictionary, HierarchyConfig, LabelMap, SrcDecision,
};
pub use svm::{predict, train_binary, train_ovo, LinearSvmModel, OvoEnsemble};
pub use synth::synth_mosaic;

pub type Image = ImageBuffer<f64>;
pub type ImageF32 = ImageBuffer<f32>;
pub type Dict = Dictionary<f64>;
pub type DictF32 = Dictionary<f32>;
pub type Code = SparseCode<f64>;
pub type CodeF32 = SparseCode<f32>;
pub type Features = FeatureVector<f64>;
pub type FeaturesF32 = FeatureVector<f32>;
pub type ClassDict = ClassDictionary<f64>;
pub type ClassDictF32 = ClassDictionary<f32>;
pub type Ensemble = OvoEnsemble<f64>;
pub type EnsembleF32 = OvoEnsemble<f32>;
