//! Subcommand implementations. Each stage is a plain function so `pipeline`
//! runs exactly the code the standalone subcommands run.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde_json::{Map, Value};
use sparsescene::features::{features_for_pixels, FeatureParams, FeatureRaster};
use sparsescene::io::{read_image, write_image};
use sparsescene::metrics::MetricEntry;
use sparsescene::{
    add_noise, confusion, denoise_image, draw_class_samples, hierarchical_classify,
    plan_patch_sizes, predict, report, synth_mosaic, train_ovo, DenoiseConfig, DenoiseResult,
    HierarchyConfig, Image, LabelMap, LambdaMode, NoiseSpec, OvoEnsemble, PatchSizePlan,
};

use crate::args::*;
use crate::CliError;

const DEFAULT_SEED: u64 = 1;
const DEFAULT_NOISE_SEED: u64 = 7;
const DEFAULT_RESOLUTION: f64 = 3.0;
const DEFAULT_SVM_C: f64 = 1.0;

type Res<T> = Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> Res<T> {
    Err(CliError::Usage(msg.into()))
}

fn require<'a>(v: &'a Option<PathBuf>, flag: &str) -> Res<&'a Path> {
    match v {
        Some(p) => Ok(p),
        None => usage(format!("missing required {flag}")),
    }
}

fn check(ok: bool, flag: &str, rule: &str, value: impl std::fmt::Display) -> Res<()> {
    if ok {
        Ok(())
    } else {
        usage(format!(
            "invalid value for {flag}: {value} (must be {rule})"
        ))
    }
}

fn positive(v: Option<f64>, flag: &str) -> Res<()> {
    match v {
        Some(x) => check(x > 0.0 && x.is_finite(), flag, "> 0", x),
        None => Ok(()),
    }
}

fn non_negative(v: Option<f64>, flag: &str) -> Res<()> {
    match v {
        Some(x) => check(x >= 0.0 && x.is_finite(), flag, ">= 0", x),
        None => Ok(()),
    }
}

fn at_least(v: Option<usize>, min: usize, flag: &str) -> Res<()> {
    match v {
        Some(x) => check(x >= min, flag, &format!(">= {min}"), x),
        None => Ok(()),
    }
}

fn print_stdout(text: &str) -> Res<()> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn emit(text: &str, path: Option<&Path>) -> Res<()> {
    match path {
        Some(p) => Ok(fs::write(p, format!("{text}\n"))?),
        None => print_stdout(text),
    }
}

fn load_config(path: Option<&Path>) -> Res<Map<String, Value>> {
    match path {
        None => Ok(Map::new()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("--config {}: {e}", p.display())))?;
            parse_config(&text)
        }
    }
}

pub(crate) fn dispatch(cli: &Cli) -> Res<()> {
    let file = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Synth(a) => synth(overlay(a, &file)?),
        Command::Denoise(a) => denoise(overlay(a, &file)?),
        Command::TrainDict(a) => train_dict(overlay(a, &file)?),
        Command::Features(a) => features(overlay(a, &file)?),
        Command::ClassifySrc(a) => classify_src(overlay(a, &file)?),
        Command::ClassifySvm(a) => classify_svm(overlay(a, &file)?),
        Command::Evaluate(a) => evaluate(overlay(a, &file)?),
        Command::Pipeline(a) => pipeline(overlay(a, &file)?),
    }
}

fn denoise_config(d: &DenoiseArgs, seed: Option<u64>) -> Res<DenoiseConfig<f64>> {
    positive(d.sigma, "--sigma")?;
    at_least(d.patch_side, 2, "--patch-side")?;
    at_least(d.atoms, 1, "--atoms")?;
    at_least(d.sparsity, 1, "--sparsity")?;
    at_least(d.iterations, 1, "--iterations")?;
    non_negative(d.mu, "--mu")?;
    positive(d.gain, "--gain")?;
    non_negative(d.lambda, "--lambda")?;
    at_least(d.max_training, 1, "--max-training")?;
    let def = DenoiseConfig::<f64>::default();
    let cfg = DenoiseConfig {
        sigma: d.sigma.unwrap_or(def.sigma),
        patch_side: d.patch_side.unwrap_or(def.patch_side),
        atom_count: d.atoms.unwrap_or(def.atom_count),
        max_sparsity: d.sparsity.unwrap_or(def.max_sparsity),
        ksvd_iterations: d.iterations.unwrap_or(def.ksvd_iterations),
        mu: d.mu,
        gain: d.gain.unwrap_or(def.gain),
        lambda_mode: d.lambda.map_or(LambdaMode::Constraint, LambdaMode::Fixed),
        seed: seed.unwrap_or(DEFAULT_SEED),
        max_training_patches: d.max_training.unwrap_or(def.max_training_patches),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn feature_setup(f: &FeatureArgs) -> Res<(FeatureParams, PatchSizePlan)> {
    let resolution = f.resolution.unwrap_or(DEFAULT_RESOLUTION);
    check(
        resolution >= 1.0 && resolution.is_finite(),
        "--resolution",
        ">= 1",
        resolution,
    )?;
    if let Some(s) = f.s_large {
        check(s >= 7 && s % 2 == 1, "--s-large", "odd and >= 7", s)?;
    }
    at_least(f.bins, 2, "--bins")?;
    at_least(f.levels, 2, "--levels")?;
    let def = FeatureParams::default();
    let params = FeatureParams {
        bins: f.bins.unwrap_or(def.bins),
        levels: f.levels.unwrap_or(def.levels),
        offsets: def.offsets,
    };
    Ok((params, plan_patch_sizes(resolution, f.s_large)?))
}

fn hierarchy_config(
    s: &SrcArgs,
    samples: Option<usize>,
    seed: Option<u64>,
    features: FeatureParams,
) -> Res<HierarchyConfig<f64>> {
    at_least(s.layers, 1, "--layers")?;
    at_least(samples, 1, "--samples")?;
    non_negative(s.delta1, "--delta1")?;
    non_negative(s.delta2, "--delta2")?;
    at_least(s.src_sparsity, 1, "--src-sparsity")?;
    let def = HierarchyConfig::<f64>::default();
    Ok(HierarchyConfig {
        layers: s.layers.unwrap_or(def.layers),
        samples_per_class: samples.unwrap_or(def.samples_per_class),
        delta1: s.delta1.unwrap_or(def.delta1),
        delta2: s.delta2.unwrap_or(def.delta2),
        max_sparsity: s.src_sparsity.unwrap_or(def.max_sparsity),
        seed: seed.unwrap_or(DEFAULT_SEED),
        features,
    })
}

fn same_shape(map: &LabelMap, img: &Image, what: &str) -> Res<()> {
    if map.width() == img.width() && map.height() == img.height() {
        Ok(())
    } else {
        usage(format!(
            "{what} is {}x{} but the image is {}x{}",
            map.width(),
            map.height(),
            img.width(),
            img.height()
        ))
    }
}

fn synth(a: SynthArgs) -> Res<()> {
    let size = a.size.unwrap_or(128);
    let k = a.classes.unwrap_or(4);
    check(size >= 64, "--size", ">= 64", size)?;
    check((2..=4).contains(&k), "--classes", "2, 3 or 4", k)?;
    let out = require(&a.out, "--out")?;
    let (img, truth) = synth_mosaic::<f64>(size, k, a.seed.unwrap_or(DEFAULT_SEED))?;
    write_image(out, &img)?;
    if let Some(t) = &a.truth {
        truth.save(t)?;
    }
    Ok(())
}

/// Noisy input and optional clean reference for a denoising run.
fn denoise_inputs(
    input: &Path,
    reference: Option<&Path>,
    noise: Option<(f64, u64)>,
) -> Res<(Image, Option<Image>)> {
    let img: Image = read_image(input)?;
    match noise {
        Some((sigma, seed)) => {
            let noisy = add_noise(&img, NoiseSpec { sigma, seed })?;
            Ok((noisy, Some(img)))
        }
        None => {
            let r = reference.map(read_image).transpose()?;
            Ok((img, r))
        }
    }
}

fn denoise_entries(cfg: &DenoiseConfig<f64>, res: &DenoiseResult<f64>) -> Vec<MetricEntry> {
    let (bound, weight) = cfg.bounds();
    let mut e = vec![
        MetricEntry::Number("sigma".into(), cfg.sigma),
        MetricEntry::Number("mu".into(), cfg.effective_mu()),
        MetricEntry::Number("error_bound".into(), bound),
        MetricEntry::Number("sparsity_weight".into(), weight),
        MetricEntry::Number("atoms".into(), cfg.atom_count as f64),
        MetricEntry::Number("max_sparsity".into(), cfg.max_sparsity as f64),
        MetricEntry::Number("patch_side".into(), cfg.patch_side as f64),
        MetricEntry::Series("objective_trace".into(), res.objective_trace.clone()),
    ];
    if let (Some(n), Some(d)) = (res.psnr_noisy, res.psnr_denoised) {
        e.push(MetricEntry::PsnrNoisy(n));
        e.push(MetricEntry::PsnrDenoised(d));
        e.push(MetricEntry::Number("psnr_gain_db".into(), d - n));
    }
    e
}

fn denoise(a: DenoiseCmd) -> Res<()> {
    let cfg = denoise_config(&a.denoise, a.seed)?;
    let input = require(&a.input, "--input")?;
    let out = require(&a.out, "--out")?;
    let noise = a
        .add_noise
        .then(|| (cfg.sigma, a.noise_seed.unwrap_or(DEFAULT_NOISE_SEED)));
    let (noisy, reference) = denoise_inputs(input, a.reference.as_deref(), noise)?;
    if let Some(p) = &a.noisy_out {
        write_image(p, &noisy)?;
    }
    let res = denoise_image(&noisy, &cfg, reference.as_ref())?;
    write_image(out, &res.denoised)?;
    if let Some(p) = &a.dict_out {
        res.dictionary.save(p)?;
    }
    emit(&report(&denoise_entries(&cfg, &res)), a.report.as_deref())
}

fn train_dict(a: TrainDictCmd) -> Res<()> {
    let cfg = denoise_config(&a.denoise, a.seed)?;
    let input = require(&a.input, "--input")?;
    let out = require(&a.out, "--out")?;
    let img: Image = read_image(input)?;
    let res = denoise_image(&img, &cfg, None)?;
    res.dictionary.save(out)?;
    emit(
        &report(&[
            MetricEntry::Number("atoms".into(), res.dictionary.atom_count() as f64),
            MetricEntry::Number("patch_dim".into(), res.dictionary.patch_dim() as f64),
            MetricEntry::Series("objective_trace".into(), res.objective_trace),
        ]),
        a.report.as_deref(),
    )
}

fn features(a: FeaturesCmd) -> Res<()> {
    let (params, plan) = feature_setup(&a.features)?;
    let input = require(&a.input, "--input")?;
    let out = require(&a.out, "--out")?;
    let img: Image = read_image(input)?;
    let raster = FeatureRaster::compute(&img, plan.s_large, &params)?;
    raster.save(out)?;
    emit(
        &report(&[
            MetricEntry::Number("window".into(), plan.s_large as f64),
            MetricEntry::Number("feature_len".into(), raster.feat_len as f64),
            MetricEntry::Number("width".into(), raster.width as f64),
            MetricEntry::Number("height".into(), raster.height as f64),
        ]),
        a.report.as_deref(),
    )
}

fn run_src(
    img: &Image,
    train: &LabelMap,
    cfg: &HierarchyConfig<f64>,
    plan: &PatchSizePlan,
) -> Res<(LabelMap, Vec<MetricEntry>)> {
    same_shape(train, img, "training map")?;
    let map = hierarchical_classify(img, train, cfg, plan)?;
    let uncertain: Vec<f64> = map
        .uncertainty
        .iter()
        .map(|m| m.iter().filter(|&&u| u).count() as f64)
        .collect();
    let entries = vec![
        MetricEntry::Series(
            "window_sizes".into(),
            plan.layer_sizes(cfg.layers)
                .iter()
                .map(|&s| s as f64)
                .collect(),
        ),
        MetricEntry::Series("uncertain_after_layer".into(), uncertain),
        MetricEntry::Number("class_count".into(), train.class_count()? as f64),
    ];
    Ok((map, entries))
}

fn write_map(map: &LabelMap, out: &Path, png: Option<&Path>) -> Res<()> {
    map.save(out)?;
    if let Some(p) = png {
        map.save_png(p)?;
    }
    Ok(())
}

fn classify_src(a: ClassifySrcCmd) -> Res<()> {
    let (params, plan) = feature_setup(&a.features)?;
    let cfg = hierarchy_config(&a.src, a.samples, a.seed, params)?;
    let input = require(&a.input, "--input")?;
    let train_path = require(&a.train, "--train")?;
    let out = require(&a.out, "--out")?;
    let img: Image = read_image(input)?;
    let train = LabelMap::load(train_path)?;
    let (map, entries) = run_src(&img, &train, &cfg, &plan)?;
    write_map(&map, out, a.png.as_deref())?;
    emit(&report(&entries), a.report.as_deref())
}

/// Trains on the same per-class pixel picks as the first SRC layer, with
/// features at the largest window, then labels every pixel.
fn run_svm(
    img: &Image,
    train: &LabelMap,
    params: &FeatureParams,
    plan: &PatchSizePlan,
    samples: usize,
    c: f64,
    seed: u64,
) -> Res<(LabelMap, OvoEnsemble<f64>)> {
    same_shape(train, img, "training map")?;
    let k = train.class_count()?;
    let picks = draw_class_samples(train.labels(), k, samples, seed, 1);
    let pixels: Vec<usize> = picks.iter().flatten().copied().collect();
    let labels: Vec<usize> = picks
        .iter()
        .enumerate()
        .flat_map(|(c, p)| std::iter::repeat_n(c, p.len()))
        .collect();
    let feats = features_for_pixels(img, &pixels, plan.s_large, params, 1)?;
    let model = train_ovo(&feats, &labels, k, c, seed)?;

    let all: Vec<usize> = (0..img.width() * img.height()).collect();
    let every = features_for_pixels(img, &all, plan.s_large, params, 1)?;
    let pred = every
        .par_iter()
        .map(|f| predict(&model, f).map(Some))
        .collect::<sparsescene::Result<Vec<_>>>()?;
    Ok((LabelMap::new(img.width(), img.height(), pred)?, model))
}

fn classify_svm(a: ClassifySvmCmd) -> Res<()> {
    let (params, plan) = feature_setup(&a.features)?;
    at_least(a.samples, 1, "--samples")?;
    positive(a.svm_c, "--svm-c")?;
    let input = require(&a.input, "--input")?;
    let train_path = require(&a.train, "--train")?;
    let out = require(&a.out, "--out")?;
    let img: Image = read_image(input)?;
    let train = LabelMap::load(train_path)?;
    let (map, model) = run_svm(
        &img,
        &train,
        &params,
        &plan,
        a.samples
            .unwrap_or(HierarchyConfig::<f64>::default().samples_per_class),
        a.svm_c.unwrap_or(DEFAULT_SVM_C),
        a.seed.unwrap_or(DEFAULT_SEED),
    )?;
    write_map(&map, out, a.png.as_deref())?;
    if let Some(p) = &a.model_out {
        model.save(p)?;
    }
    emit(
        &report(&[
            MetricEntry::Number("window".into(), plan.s_large as f64),
            MetricEntry::Number("pairwise_models".into(), model.models.len() as f64),
        ]),
        a.report.as_deref(),
    )
}

fn evaluation(pred: &LabelMap, truth: &LabelMap, classes: Option<usize>) -> Res<MetricEntry> {
    let k = match classes {
        Some(k) => k,
        None => truth.class_count()?,
    };
    check(k >= 1, "--classes", ">= 1", k)?;
    Ok(MetricEntry::Confusion(confusion(pred, truth, k)?))
}

fn evaluate(a: EvaluateCmd) -> Res<()> {
    let pred = LabelMap::load(require(&a.pred, "--pred")?)?;
    let truth = LabelMap::load(require(&a.truth, "--truth")?)?;
    let entry = evaluation(&pred, &truth, a.classes)?;
    emit(&report(&[entry]), a.report.as_deref())
}

fn pipeline(a: PipelineConfig) -> Res<()> {
    let dcfg = denoise_config(&a.denoise, a.seed)?;
    let (params, plan) = feature_setup(&a.features)?;
    let hcfg = hierarchy_config(&a.src, a.samples, a.seed, params.clone())?;
    positive(a.svm_c, "--svm-c")?;
    let input = require(&a.input, "--input")?;
    let out_dir = require(&a.out_dir, "--out-dir")?;
    let train_path = match (&a.train, &a.truth) {
        (Some(t), _) | (None, Some(t)) => t.clone(),
        (None, None) => return usage("missing required --train (or --truth)"),
    };
    fs::create_dir_all(out_dir)?;
    let path = |name: &str| out_dir.join(name);

    let noise = a
        .add_noise
        .then(|| (dcfg.sigma, a.noise_seed.unwrap_or(DEFAULT_NOISE_SEED)));
    let (noisy, reference) = denoise_inputs(input, a.reference.as_deref(), noise)?;
    if a.add_noise {
        write_image(path("noisy.pgm"), &noisy)?;
    }
    info!("denoising");
    let res = denoise_image(&noisy, &dcfg, reference.as_ref())?;
    write_image(path("denoised.pgm"), &res.denoised)?;
    res.dictionary.save(path("dictionary.bin"))?;
    let mut sections = vec![MetricEntry::Section(
        "denoise".into(),
        denoise_entries(&dcfg, &res),
    )];

    // classify the stored 8-bit image, exactly as the separate stages would
    let img: Image = read_image(path("denoised.pgm"))?;
    let train = LabelMap::load(&train_path)?;
    info!("features");
    FeatureRaster::compute(&img, plan.s_large, &params)?.save(path("features.bin"))?;

    info!("sparse-representation classification");
    let (src_map, mut src_entries) = run_src(&img, &train, &hcfg, &plan)?;
    write_map(
        &src_map,
        &path("src_labels.pgm"),
        Some(&path("src_map.png")),
    )?;

    info!("svm classification");
    let (svm_map, model) = run_svm(
        &img,
        &train,
        &params,
        &plan,
        hcfg.samples_per_class,
        a.svm_c.unwrap_or(DEFAULT_SVM_C),
        hcfg.seed,
    )?;
    write_map(
        &svm_map,
        &path("svm_labels.pgm"),
        Some(&path("svm_map.png")),
    )?;
    model.save(path("svm_model.bin"))?;
    let mut svm_entries = vec![MetricEntry::Number(
        "pairwise_models".into(),
        model.models.len() as f64,
    )];

    if let Some(t) = &a.truth {
        let truth = LabelMap::load(t)?;
        src_entries.push(evaluation(&src_map, &truth, a.classes)?);
        svm_entries.push(evaluation(&svm_map, &truth, a.classes)?);
    }
    sections.push(MetricEntry::Section("src".into(), src_entries));
    sections.push(MetricEntry::Section("svm".into(), svm_entries));
    let text = report(&sections);
    fs::write(path("report.json"), format!("{text}\n"))?;
    print_stdout(&text)
}
