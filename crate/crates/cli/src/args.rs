//! Command-line flags and the flat JSON config file that mirrors them.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "sparsescene",
    version,
    about = "Sparse-representation denoising and texture classification of grayscale scenes"
)]
pub struct Cli {
    /// Worker threads (default: all cores; env SPARSESCENE_THREADS)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Flat JSON file whose keys mirror the long flags; flags win
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// More log output on stderr (repeat for debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic texture mosaic and its truth map
    Synth(SynthArgs),
    /// Denoise an image with a dictionary learned from its own patches
    Denoise(DenoiseCmd),
    /// Learn a patch dictionary and save it
    TrainDict(TrainDictCmd),
    /// Compute per-pixel texture features at the largest window
    Features(FeaturesCmd),
    /// Hierarchical sparse-representation classification
    ClassifySrc(ClassifySrcCmd),
    /// One-vs-one linear SVM classification
    ClassifySvm(ClassifySvmCmd),
    /// Confusion matrix, accuracy and kappa of a label map
    Evaluate(EvaluateCmd),
    /// denoise, features, both classifiers and evaluation in one run
    Pipeline(PipelineConfig),
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default, PartialEq)]
#[serde(default, rename_all = "kebab-case")]
pub struct DenoiseArgs {
    /// Noise standard deviation in gray levels
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    /// Patch side in pixels
    #[arg(long)]
    pub patch_side: Option<usize>,
    /// Dictionary atoms (a perfect square)
    #[arg(long)]
    pub atoms: Option<usize>,
    /// Maximum atoms per patch
    #[arg(long)]
    pub sparsity: Option<usize>,
    /// K-SVD iterations
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Weight of the noisy image in the final blend (default 30/sigma)
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// Coding bound multiplier on patch_side² · sigma²
    #[arg(long, allow_negative_numbers = true)]
    pub gain: Option<f64>,
    /// Fixed per-atom weight instead of the sigma-derived bound
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Cap on the patches used for dictionary training
    #[arg(long)]
    pub max_training: Option<usize>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default, PartialEq)]
#[serde(default, rename_all = "kebab-case")]
pub struct FeatureArgs {
    /// Spatial resolution of one pixel, sets the window sizes
    #[arg(long, allow_negative_numbers = true)]
    pub resolution: Option<f64>,
    /// Override the largest window size
    #[arg(long)]
    pub s_large: Option<usize>,
    /// Gray-level histogram bins
    #[arg(long)]
    pub bins: Option<usize>,
    /// Co-occurrence gray levels
    #[arg(long)]
    pub levels: Option<usize>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default, PartialEq)]
#[serde(default, rename_all = "kebab-case")]
pub struct SrcArgs {
    /// Number of layers
    #[arg(long)]
    pub layers: Option<usize>,
    /// Largest accepted minimum residual
    #[arg(long, allow_negative_numbers = true)]
    pub delta1: Option<f64>,
    /// Smallest accepted residual gap to the runner-up
    #[arg(long, allow_negative_numbers = true)]
    pub delta2: Option<f64>,
    /// Maximum atoms per classified pixel
    #[arg(long)]
    pub src_sparsity: Option<usize>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default, PartialEq)]
#[serde(default, rename_all = "kebab-case")]
pub struct SynthArgs {
    /// Image side in pixels (>= 64)
    #[arg(long)]
    pub size: Option<usize>,
    /// Number of texture classes (2, 3 or 4)
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output image (.pgm or .png)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output truth map (.pgm or .png; 255 marks unlabeled)
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default, PartialEq)]
#[serde(default, rename_all = "kebab-case")]
pub struct DenoiseCmd {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON report path (default: stdout)
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Clean image for PSNR
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Treat the input as clean: add seeded noise of --sigma first
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub add_noise: bool,
    #[arg(long)]
    pub noise_seed: Option<u64>,
    /// Where to save the noisy image when --add-noise is set
    #[arg(long)]
    pub noisy_out: Option<PathBuf>,
    /// Where to save the learned dictionary
    #[arg(long)]
    pub dict_out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub denoise: DenoiseArgs,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default, PartialEq)]
#[serde(default, rename_all = "kebab-case")]
pub struct TrainDictCmd {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Dictionary file
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub denoise: DenoiseArgs,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default, PartialEq)]
#[serde(default, rename_all = "kebab-case")]
pub struct FeaturesCmd {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Feature raster file
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub features: FeatureArgs,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default, PartialEq)]
#[serde(default, rename_all = "kebab-case")]
pub struct ClassifySrcCmd {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Training label map (255 = unlabeled)
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Output label map
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Colored rendering of the label map
    #[arg(long)]
    pub png: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Training pixels drawn per class
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub src: SrcArgs,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default, PartialEq)]
#[serde(default, rename_all = "kebab-case")]
pub struct ClassifySvmCmd {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub png: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Where to save the trained model
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// SVM soft-margin trade-off
    #[arg(long, allow_negative_numbers = true)]
    pub svm_c: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub features: FeatureArgs,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default, PartialEq)]
#[serde(default, rename_all = "kebab-case")]
pub struct EvaluateCmd {
    #[arg(long)]
    pub pred: Option<PathBuf>,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Class count (default: largest truth label + 1)
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Every setting of a full run; also the schema of the config file.
#[derive(Args, Serialize, Deserialize, Debug, Clone, Default, PartialEq)]
#[serde(default, rename_all = "kebab-case")]
pub struct PipelineConfig {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Training label map (default: --truth)
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Truth map for evaluation
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Clean image for PSNR
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Directory for all outputs
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub add_noise: bool,
    #[arg(long)]
    pub noise_seed: Option<u64>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// SVM soft-margin trade-off
    #[arg(long, allow_negative_numbers = true)]
    pub svm_c: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub denoise: DenoiseArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub src: SrcArgs,
}

/// Parses the config file into a flat key/value map.
pub fn parse_config(text: &str) -> Result<Map<String, Value>, CliError> {
    match serde_json::from_str(text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::Usage(
            "config file must hold a JSON object".into(),
        )),
        Err(e) => Err(CliError::Usage(format!("config file: {e}"))),
    }
}

/// Values given on the command line replace those from the file; keys the
/// command does not know are ignored.
pub fn overlay<T: Serialize + DeserializeOwned>(
    flags: &T,
    file: &Map<String, Value>,
) -> Result<T, CliError> {
    let given = serde_json::to_value(flags).expect("flags serialize");
    let mut merged = file.clone();
    if let Value::Object(given) = given {
        for (k, v) in given {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Usage(format!("config file: {e}")))
}
