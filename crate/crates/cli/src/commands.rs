//! Command implementations behind the `supix` binary.
//!
//! Error discipline: anything wrong with what the user handed us — flags,
//! parameters, unreadable or malformed input files — is a validation error
//! (exit 2); failures writing results are I/O errors (exit 3); broken
//! internal assumptions are exit 4. Commands that accept several input
//! files fan out over a `--jobs` thread pool with per-file isolation:
//! every file is attempted, all failures are reported, and the process
//! exit reflects the first failing input in argument order.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde_json::json;
use supix_core::cam::{
    compute_score_map, multi_layer_loss, probability_map_to_mask, score_map_to_mask, CamError,
};
use supix_core::metrics::{report as metrics_report, ConfusionMatrix, MetricsReport};
use supix_core::refine::{floodfill_refine, RefineParams};
use supix_core::slic::{self, rgb_to_lab, SlicParams};
use supix_core::synth::{self, SynthParams};
use supix_core::types::{ImageRgb, LabelMask, SuperpixelPartition, Validate};

use crate::config::{ConfigError, PipelineConfig};
use crate::formats::{
    read_classifier_weights, read_feature_stack, read_label_mask, read_partition,
    read_probability_map, read_rgb_image, write_label_mask, write_partition, write_rgb_image,
    write_score_map, FormatError,
};
use crate::report::{metrics_json, metrics_text, write_json, write_manifest};

#[derive(Debug)]
pub enum CmdError {
    /// Bad flags, parameters, or input files. Exit 2.
    Validation(String),
    /// Failure emitting results. Exit 3.
    Io(String),
    /// A broken internal assumption. Exit 4.
    Internal(String),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Validation(_) => 2,
            CmdError::Io(_) => 3,
            CmdError::Internal(_) => 4,
        }
    }
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmdError::Validation(msg) | CmdError::Io(msg) | CmdError::Internal(msg) => {
                f.write_str(msg)
            }
        }
    }
}

impl std::error::Error for CmdError {}

/// Input-side failures are the user's problem regardless of the underlying
/// cause: a missing file and a corrupt file both mean the run was invalid.
fn input_err(e: impl fmt::Display) -> CmdError {
    CmdError::Validation(e.to_string())
}

fn output_err(e: FormatError) -> CmdError {
    match e {
        FormatError::Io { .. } => CmdError::Io(e.to_string()),
        other => CmdError::Validation(other.to_string()),
    }
}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError::Validation(e.to_string())
    }
}

fn create_dir(path: &Path) -> Result<(), CmdError> {
    std::fs::create_dir_all(path)
        .map_err(|e| CmdError::Io(format!("cannot create {}: {e}", path.display())))
}

/// Runs `work(i)` for `i in 0..n` on up to `jobs` worker threads (capped by
/// `SUPIX_THREADS` and by `n`). Results come back in index order.
fn run_jobs<T, F>(n: usize, jobs: usize, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let jobs = jobs.max(1).min(slic::max_threads()).min(n.max(1));
    if jobs == 1 {
        return (0..n).map(work).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let result = work(i);
                slots.lock().unwrap()[i] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("every index is claimed exactly once"))
        .collect()
}

/// Output stem for one input in batch mode. Stems must be unique or later
/// outputs would silently overwrite earlier ones.
fn unique_stems(inputs: &[PathBuf]) -> Result<Vec<String>, CmdError> {
    let stems: Vec<String> = inputs
        .iter()
        .map(|p| {
            p.file_stem()
                .unwrap_or(p.as_os_str())
                .to_string_lossy()
                .into_owned()
        })
        .collect();
    for (i, stem) in stems.iter().enumerate() {
        if stems[..i].contains(stem) {
            return Err(CmdError::Validation(format!(
                "inputs {} and {} would both write outputs named `{stem}`",
                inputs[stems[..i].iter().position(|s| s == stem).unwrap()].display(),
                inputs[i].display(),
            )));
        }
    }
    Ok(stems)
}

/// Reports every per-file failure to stderr, then surfaces the first one
/// (in input order) as the command result. Successes pass through in input
/// order for the manifest.
fn collect_batch<T>(
    inputs: &[PathBuf],
    results: Vec<Result<T, CmdError>>,
) -> Result<Vec<T>, CmdError> {
    let mut first_err: Option<CmdError> = None;
    let mut values = Vec::with_capacity(results.len());
    for (input, result) in inputs.iter().zip(results) {
        match result {
            Ok(v) => values.push(v),
            Err(e) => {
                eprintln!("{}: {e}", input.display());
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    match first_err {
        None => Ok(values),
        Some(e) => Err(e),
    }
}

fn segment_image(path: &Path, params: &SlicParams) -> Result<SuperpixelPartition, CmdError> {
    let image = read_rgb_image(path).map_err(input_err)?;
    let lab = rgb_to_lab(&image);
    slic::segment(&lab, params).map_err(input_err)
}

/// Source image with superpixel boundaries painted red: a pixel is a
/// boundary when its id differs from its left or top neighbor.
fn boundary_overlay(image: &ImageRgb, partition: &SuperpixelPartition) -> ImageRgb {
    let width = image.width() as usize;
    let height = image.height() as usize;
    let ids = partition.assignments();
    let mut pixels = image.pixels().to_vec();
    for y in 0..height {
        for x in 0..width {
            let p = y * width + x;
            let boundary = (x > 0 && ids[p] != ids[p - 1]) || (y > 0 && ids[p] != ids[p - width]);
            if boundary {
                pixels[3 * p] = 255;
                pixels[3 * p + 1] = 0;
                pixels[3 * p + 2] = 0;
            }
        }
    }
    ImageRgb::new(image.width(), image.height(), pixels)
        .expect("overlay reuses the validated source dimensions")
}

pub fn cmd_slic(
    images: &[PathBuf],
    params: &SlicParams,
    out: &Path,
    overlay: Option<&Path>,
    jobs: usize,
) -> Result<(), CmdError> {
    params.validate().map_err(input_err)?;
    if images.len() == 1 {
        let image = read_rgb_image(&images[0]).map_err(input_err)?;
        let lab = rgb_to_lab(&image);
        let partition = slic::segment(&lab, params).map_err(input_err)?;
        write_partition(out, &partition, params).map_err(output_err)?;
        if let Some(overlay_path) = overlay {
            write_rgb_image(overlay_path, &boundary_overlay(&image, &partition))
                .map_err(output_err)?;
        }
        println!("num_superpixels = {}", partition.num_superpixels());
        return Ok(());
    }

    if overlay.is_some() {
        return Err(CmdError::Validation(
            "--overlay needs exactly one --image".into(),
        ));
    }
    let stems = unique_stems(images)?;
    create_dir(out)?;
    let results = run_jobs(images.len(), jobs, |i| {
        let partition = segment_image(&images[i], params)?;
        let path = out.join(format!("{}_partition.png", stems[i]));
        write_partition(&path, &partition, params).map_err(output_err)?;
        Ok(vec![path.clone(), crate::formats::sidecar_path(&path)])
    });
    let emitted: Vec<PathBuf> = collect_batch(images, results)?.into_iter().flatten().collect();
    write_manifest(out, &emitted).map_err(output_err)?;
    Ok(())
}

pub fn cmd_cam(
    features: &[PathBuf],
    weights_path: &Path,
    width: u32,
    height: u32,
    out: &Path,
    scores: Option<&Path>,
    jobs: usize,
) -> Result<(), CmdError> {
    let weights = read_classifier_weights(weights_path).map_err(input_err)?;
    if features.len() == 1 {
        let stack = read_feature_stack(&features[0], 0).map_err(input_err)?;
        let score_map = compute_score_map(&stack, &weights, height, width).map_err(input_err)?;
        let mask = score_map_to_mask(&score_map);
        write_label_mask(out, &mask).map_err(output_err)?;
        if let Some(scores_path) = scores {
            write_score_map(scores_path, &score_map).map_err(output_err)?;
        }
        return Ok(());
    }

    if scores.is_some() {
        return Err(CmdError::Validation(
            "--scores needs exactly one --features".into(),
        ));
    }
    let stems = unique_stems(features)?;
    create_dir(out)?;
    let results = run_jobs(features.len(), jobs, |i| {
        let stack = read_feature_stack(&features[i], i as u32).map_err(input_err)?;
        let score_map = compute_score_map(&stack, &weights, height, width).map_err(input_err)?;
        let path = out.join(format!("{}_mask.png", stems[i]));
        write_label_mask(&path, &score_map_to_mask(&score_map)).map_err(output_err)?;
        Ok(path)
    });
    let emitted = collect_batch(features, results)?;
    write_manifest(out, &emitted).map_err(output_err)?;
    Ok(())
}

pub fn cmd_refine(
    masks: &[PathBuf],
    partition_path: &Path,
    params: &RefineParams,
    out: &Path,
    jobs: usize,
) -> Result<(), CmdError> {
    params.validate().map_err(input_err)?;
    let (partition, _) = read_partition(partition_path).map_err(input_err)?;
    let refine_one = |path: &Path| -> Result<LabelMask, CmdError> {
        let mask = read_label_mask(path, None).map_err(input_err)?;
        floodfill_refine(&mask, &partition, params).map_err(input_err)
    };

    if masks.len() == 1 {
        let refined = refine_one(&masks[0])?;
        write_label_mask(out, &refined).map_err(output_err)?;
        return Ok(());
    }

    let stems = unique_stems(masks)?;
    create_dir(out)?;
    let results = run_jobs(masks.len(), jobs, |i| {
        let refined = refine_one(&masks[i])?;
        let path = out.join(format!("{}_refined.png", stems[i]));
        write_label_mask(&path, &refined).map_err(output_err)?;
        Ok(path)
    });
    let emitted = collect_batch(masks, results)?;
    write_manifest(out, &emitted).map_err(output_err)?;
    Ok(())
}

/// Widens both masks to a shared class count and pools one confusion
/// matrix over them.
fn evaluate_pair(pred: &LabelMask, gt: &LabelMask) -> Result<MetricsReport, CmdError> {
    let k = pred.num_classes().max(gt.num_classes());
    let pred = pred
        .with_num_classes(k)
        .expect("widening a class count cannot fail");
    let gt = gt
        .with_num_classes(k)
        .expect("widening a class count cannot fail");
    let mut matrix = ConfusionMatrix::new(k).map_err(input_err)?;
    matrix.accumulate(&pred, &gt).map_err(input_err)?;
    metrics_report(&matrix).map_err(input_err)
}

pub fn cmd_eval(
    pred_path: &Path,
    gt_path: &Path,
    out: Option<&Path>,
) -> Result<(), CmdError> {
    let pred = read_label_mask(pred_path, None).map_err(input_err)?;
    let gt = read_label_mask(gt_path, None).map_err(input_err)?;
    let report = evaluate_pair(&pred, &gt)?;

    print!("{}", metrics_text(&report));
    let default_out = pred_path.with_extension("metrics.json");
    let out = out.unwrap_or(&default_out);
    write_json(out, &metrics_json(&report)).map_err(output_err)?;
    Ok(())
}

pub fn cmd_synth(params: &SynthParams, out_dir: &Path) -> Result<(), CmdError> {
    let (image, mask) = synth::generate(params).map_err(input_err)?;
    create_dir(out_dir)?;
    let image_path = out_dir.join("image.png");
    let gt_path = out_dir.join("ground_truth.png");
    write_rgb_image(&image_path, &image).map_err(output_err)?;
    write_label_mask(&gt_path, &mask).map_err(output_err)?;
    let mut emitted = vec![image_path, gt_path];
    if params.noise_rate > 0.0 {
        let corrupted = synth::corrupt(&mask, params.noise_rate, params.seed);
        let path = out_dir.join("corrupted.png");
        write_label_mask(&path, &corrupted).map_err(output_err)?;
        emitted.push(path);
    }
    for path in &emitted {
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn cmd_pipeline(config_path: &Path) -> Result<(), CmdError> {
    let config = PipelineConfig::load(config_path)?;

    // Every input is read and checked before the first byte is written, so
    // a bad run leaves no partial output directory behind.
    let image = read_rgb_image(&config.image).map_err(input_err)?;
    let gt = read_label_mask(&config.ground_truth, None).map_err(input_err)?;
    let prob = config
        .probability_map
        .as_deref()
        .map(read_probability_map)
        .transpose()
        .map_err(input_err)?;
    let weights = config
        .weights
        .as_deref()
        .map(read_classifier_weights)
        .transpose()
        .map_err(input_err)?;
    let stacks = config
        .features
        .iter()
        .enumerate()
        .map(|(i, path)| read_feature_stack(path, i as u32))
        .collect::<Result<Vec<_>, _>>()
        .map_err(input_err)?;

    let lab = rgb_to_lab(&image);
    let partition = slic::segment(&lab, &config.slic).map_err(input_err)?;

    let cam_masks = match &weights {
        Some(weights) => stacks
            .iter()
            .map(|stack| {
                let scores = compute_score_map(stack, weights, image.height(), image.width())?;
                Ok(score_map_to_mask(&scores))
            })
            .collect::<Result<Vec<_>, CamError>>()
            .map_err(input_err)?,
        None => Vec::new(),
    };
    let initial = match &prob {
        Some(prob) => probability_map_to_mask(prob),
        None => cam_masks[0].clone(),
    };
    let refined = floodfill_refine(&initial, &partition, &config.refine).map_err(input_err)?;

    let metrics_initial = evaluate_pair(&initial, &gt)?;
    let metrics_refined = evaluate_pair(&refined, &gt)?;
    let loss = match (&prob, cam_masks.len()) {
        (Some(prob), 3) => Some(
            multi_layer_loss(
                prob,
                [&cam_masks[0], &cam_masks[1], &cam_masks[2]],
                &config.loss_weights,
            )
            .map_err(input_err)?,
        ),
        _ => None,
    };

    create_dir(&config.out_dir)?;
    let mut emitted: Vec<PathBuf> = Vec::new();
    if config.emit_intermediates {
        let partition_path = config.out_dir.join("partition.png");
        write_partition(&partition_path, &partition, &config.slic).map_err(output_err)?;
        emitted.push(partition_path.clone());
        emitted.push(crate::formats::sidecar_path(&partition_path));
        let initial_path = config.out_dir.join("initial.png");
        write_label_mask(&initial_path, &initial).map_err(output_err)?;
        emitted.push(initial_path);
        for (i, mask) in cam_masks.iter().enumerate() {
            let path = config.out_dir.join(format!("cam_mask_{i}.png"));
            write_label_mask(&path, mask).map_err(output_err)?;
            emitted.push(path);
        }
    }
    let refined_path = config.out_dir.join("refined.png");
    write_label_mask(&refined_path, &refined).map_err(output_err)?;
    emitted.push(refined_path);

    let report = json!({
        "num_superpixels": partition.num_superpixels(),
        "initial": metrics_json(&metrics_initial),
        "refined": metrics_json(&metrics_refined),
        "loss": loss,
    });
    let report_path = config.out_dir.join("report.json");
    write_json(&report_path, &report).map_err(output_err)?;
    emitted.push(report_path);
    write_manifest(&config.out_dir, &emitted).map_err(output_err)?;

    println!("num_superpixels = {}", partition.num_superpixels());
    println!("miou_initial = {:.6}", metrics_initial.miou);
    println!("miou_refined = {:.6}", metrics_refined.miou);
    println!(
        "miou_delta = {:.6}",
        metrics_refined.miou - metrics_initial.miou
    );
    println!("fwiou_initial = {:.6}", metrics_initial.fwiou);
    println!("fwiou_refined = {:.6}", metrics_refined.fwiou);
    if let Some(loss) = loss {
        println!("loss = {loss:.6}");
    }
    println!("out_dir = {}", config.out_dir.display());
    Ok(())
}
