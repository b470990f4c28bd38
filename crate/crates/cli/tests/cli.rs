//! End-to-end tests driving the compiled `supix` binary through files,
//! flags, exit codes, and emitted artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use supix_cli::formats::{
    read_label_mask, read_partition, write_classifier_weights, write_feature_stack,
    write_label_mask, write_probability_map, write_rgb_image,
};
use supix_cli::report::sha256_hex;
use supix_core::cam::{compute_score_map, score_map_to_mask};
use supix_core::slic::SlicParams;
use supix_core::synth::{self, SynthParams};
use supix_core::types::{
    ClassifierWeights, FeatureMapStack, ImageRgb, LabelMask, ProbabilityMap, SuperpixelPartition,
};

fn supix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_supix"))
        .args(args)
        .output()
        .expect("binary spawns")
}

fn run_ok(args: &[&str]) -> String {
    let out = supix(args);
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn run_err(args: &[&str], expected_code: i32) -> String {
    let out = supix(args);
    assert_eq!(
        out.status.code(),
        Some(expected_code),
        "stderr: {}\nstdout: {}",
        String::from_utf8_lossy(&out.stderr),
        String::from_utf8_lossy(&out.stdout)
    );
    String::from_utf8(out.stderr).unwrap()
}

fn s(path: &Path) -> &str {
    path.to_str().expect("tempdir paths are UTF-8")
}

fn uniform_gray_png(dir: &Path, name: &str, width: u32, height: u32) -> PathBuf {
    let path = dir.join(name);
    let pixels = vec![128u8; (width * height * 3) as usize];
    write_rgb_image(&path, &ImageRgb::new(width, height, pixels).unwrap()).unwrap();
    path
}

/// One-hot class probabilities mirroring a mask; ignored pixels get a
/// uniform row so the map still sums to one everywhere.
fn one_hot_probs(mask: &LabelMask) -> ProbabilityMap {
    let k = mask.num_classes();
    let plane = (mask.width() * mask.height()) as usize;
    let mut values = vec![0.0f32; k as usize * plane];
    for (pixel, &label) in mask.labels().iter().enumerate() {
        if label == supix_core::types::IGNORE_LABEL {
            for c in 0..k as usize {
                values[c * plane + pixel] = 1.0 / k as f32;
            }
        } else {
            values[label as usize * plane + pixel] = 1.0;
        }
    }
    ProbabilityMap::new(k, mask.height(), mask.width(), values).unwrap()
}

#[test]
fn slic_uniform_image_yields_the_quadrant_partition() {
    let dir = tempfile::tempdir().unwrap();
    let image = uniform_gray_png(dir.path(), "gray.png", 8, 8);
    let out = dir.path().join("partition.png");
    let stdout = run_ok(&[
        "slic",
        "--image",
        s(&image),
        "--cluster-size",
        "4",
        "--out",
        s(&out),
    ]);
    assert!(stdout.contains("num_superpixels = 4"), "{stdout}");

    let (partition, params) = read_partition(&out).unwrap();
    assert_eq!(params.cluster_size, 4);
    let mut expected = Vec::with_capacity(64);
    for y in 0..8u32 {
        for x in 0..8u32 {
            expected.push((y / 4) * 2 + x / 4);
        }
    }
    assert_eq!(partition.assignments(), expected.as_slice());
}

#[test]
fn slic_is_deterministic_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (image, _) = synth::generate(&SynthParams {
        width: 40,
        height: 32,
        seed: 11,
        ..SynthParams::default()
    })
    .unwrap();
    let image_path = dir.path().join("image.png");
    write_rgb_image(&image_path, &image).unwrap();

    let mut hashes = Vec::new();
    for name in ["a.png", "b.png"] {
        let out = dir.path().join(name);
        run_ok(&[
            "slic",
            "--image",
            s(&image_path),
            "--cluster-size",
            "8",
            "--out",
            s(&out),
        ]);
        hashes.push((
            sha256_hex(&out).unwrap(),
            sha256_hex(&out.with_extension("png.txt")).unwrap(),
        ));
    }
    assert_eq!(hashes[0], hashes[1]);
}

#[test]
fn slic_missing_input_exits_2_and_names_the_path() {
    let stderr = run_err(
        &["slic", "--image", "/no/such/file.png", "--out", "/tmp/x.png"],
        2,
    );
    assert!(stderr.contains("/no/such/file.png"), "{stderr}");
}

#[test]
fn slic_unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let image = uniform_gray_png(dir.path(), "gray.png", 8, 8);
    run_err(
        &[
            "slic",
            "--image",
            s(&image),
            "--out",
            "/no/such/dir/partition.png",
        ],
        3,
    );
}

#[test]
fn slic_invalid_params_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let image = uniform_gray_png(dir.path(), "gray.png", 8, 8);
    let out = dir.path().join("p.png");
    let stderr = run_err(
        &[
            "slic",
            "--image",
            s(&image),
            "--cluster-size",
            "1",
            "--out",
            s(&out),
        ],
        2,
    );
    assert!(stderr.contains("cluster_size"), "{stderr}");
}

#[test]
fn slic_batch_writes_manifest_in_input_order() {
    let dir = tempfile::tempdir().unwrap();
    let first = uniform_gray_png(dir.path(), "first.png", 12, 12);
    let second = uniform_gray_png(dir.path(), "second.png", 12, 12);
    let out = dir.path().join("batch");
    run_ok(&[
        "slic",
        "--image",
        s(&first),
        "--image",
        s(&second),
        "--cluster-size",
        "4",
        "--out",
        s(&out),
        "--jobs",
        "2",
    ]);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let files = manifest["files"].as_array().unwrap();
    let names: Vec<&str> = files.iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert_eq!(
        names,
        [
            "first_partition.png",
            "first_partition.png.txt",
            "second_partition.png",
            "second_partition.png.txt",
        ]
    );
    for file in files {
        let rehash = sha256_hex(&out.join(file["path"].as_str().unwrap())).unwrap();
        assert_eq!(file["sha256"].as_str().unwrap(), rehash);
    }
}

#[test]
fn slic_overlay_marks_boundaries() {
    let dir = tempfile::tempdir().unwrap();
    let image = uniform_gray_png(dir.path(), "gray.png", 8, 8);
    let out = dir.path().join("p.png");
    let overlay = dir.path().join("overlay.png");
    run_ok(&[
        "slic",
        "--image",
        s(&image),
        "--cluster-size",
        "4",
        "--out",
        s(&out),
        "--overlay",
        s(&overlay),
    ]);
    let decoded = image::open(&overlay).unwrap().to_rgb8();
    // Column 4 starts the right-hand quadrants, so (4, 0) sits on a boundary.
    assert_eq!(decoded.get_pixel(4, 0).0, [255, 0, 0]);
    assert_eq!(decoded.get_pixel(1, 1).0, [128, 128, 128]);
}

#[test]
fn cam_constant_feature_gives_a_constant_mask() {
    let dir = tempfile::tempdir().unwrap();
    let features = dir.path().join("f.spxt");
    let weights = dir.path().join("w.spxt");
    write_feature_stack(
        &features,
        &FeatureMapStack::new(0, 1, 1, 1, vec![2.0]).unwrap(),
    )
    .unwrap();
    // Class 1 weighs the single map higher, so every pixel lands on 1.
    write_classifier_weights(
        &weights,
        &ClassifierWeights::new(2, 1, vec![0.5, 3.0]).unwrap(),
    )
    .unwrap();
    let out = dir.path().join("mask.png");
    run_ok(&[
        "cam",
        "--features",
        s(&features),
        "--weights",
        s(&weights),
        "--width",
        "5",
        "--height",
        "4",
        "--out",
        s(&out),
    ]);
    let mask = read_label_mask(&out, None).unwrap();
    assert_eq!(mask.width(), 5);
    assert_eq!(mask.height(), 4);
    assert!(mask.labels().iter().all(|&l| l == 1));
}

#[test]
fn cam_mask_matches_the_in_process_argmax() {
    let dir = tempfile::tempdir().unwrap();
    let stack = FeatureMapStack::new(
        0,
        2,
        2,
        2,
        vec![1.0, 2.0, 3.0, 4.0, 4.0, 3.0, 2.0, 1.0],
    )
    .unwrap();
    let weights = ClassifierWeights::new(3, 2, vec![1.0, 0.0, 0.0, 1.0, 0.6, 0.6]).unwrap();
    let features = dir.path().join("f.spxt");
    let weights_path = dir.path().join("w.spxt");
    write_feature_stack(&features, &stack).unwrap();
    write_classifier_weights(&weights_path, &weights).unwrap();

    let out = dir.path().join("mask.png");
    run_ok(&[
        "cam",
        "--features",
        s(&features),
        "--weights",
        s(&weights_path),
        "--width",
        "6",
        "--height",
        "6",
        "--out",
        s(&out),
    ]);

    let expected = score_map_to_mask(&compute_score_map(&stack, &weights, 6, 6).unwrap());
    let mask = read_label_mask(&out, Some(3)).unwrap();
    assert_eq!(mask.labels(), expected.labels());
}

#[test]
fn cam_map_count_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let features = dir.path().join("f.spxt");
    let weights = dir.path().join("w.spxt");
    write_feature_stack(
        &features,
        &FeatureMapStack::new(0, 2, 1, 1, vec![1.0, 2.0]).unwrap(),
    )
    .unwrap();
    write_classifier_weights(
        &weights,
        &ClassifierWeights::new(2, 3, vec![0.0; 6]).unwrap(),
    )
    .unwrap();
    let out = dir.path().join("mask.png");
    let stderr = run_err(
        &[
            "cam",
            "--features",
            s(&features),
            "--weights",
            s(&weights),
            "--width",
            "1",
            "--height",
            "1",
            "--out",
            s(&out),
        ],
        2,
    );
    assert!(stderr.contains("2") && stderr.contains("3"), "{stderr}");
}

fn write_quadrant_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let image = uniform_gray_png(dir, "gray.png", 8, 8);
    let partition = dir.join("partition.png");
    run_ok(&[
        "slic",
        "--image",
        s(&image),
        "--cluster-size",
        "4",
        "--out",
        s(&partition),
    ]);
    (image, partition)
}

#[test]
fn refine_constant_superpixels_come_back_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (_, partition) = write_quadrant_fixture(dir.path());
    // Constant per quadrant already, so refinement cannot move anything.
    let mut labels = vec![0u8; 64];
    for y in 0..8usize {
        for x in 0..8usize {
            labels[y * 8 + x] = ((y / 4) * 2 + x / 4) as u8;
        }
    }
    let mask_path = dir.path().join("mask.png");
    write_label_mask(&mask_path, &LabelMask::new(8, 8, labels, 4).unwrap()).unwrap();

    let out = dir.path().join("refined.png");
    run_ok(&[
        "refine",
        "--mask",
        s(&mask_path),
        "--partition",
        s(&partition),
        "--out",
        s(&out),
    ]);
    assert_eq!(fs::read(&mask_path).unwrap(), fs::read(&out).unwrap());
}

#[test]
fn refine_majority_rewrites_and_tau_one_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    // One 2x2 superpixel, three zeros against one one: ratio 0.75.
    let partition_src = SuperpixelPartition::new(2, 2, vec![0; 4], 1).unwrap();
    let partition = dir.path().join("partition.png");
    supix_cli::formats::write_partition(&partition, &partition_src, &SlicParams::default())
        .unwrap();
    let mask_path = dir.path().join("mask.png");
    write_label_mask(&mask_path, &LabelMask::new(2, 2, vec![0, 0, 0, 1], 2).unwrap()).unwrap();

    let refined = dir.path().join("refined.png");
    run_ok(&[
        "refine",
        "--mask",
        s(&mask_path),
        "--partition",
        s(&partition),
        "--tau",
        "0.5",
        "--out",
        s(&refined),
    ]);
    let mask = read_label_mask(&refined, None).unwrap();
    assert_eq!(mask.labels(), &[0, 0, 0, 0]);

    let identity = dir.path().join("identity.png");
    run_ok(&[
        "refine",
        "--mask",
        s(&mask_path),
        "--partition",
        s(&partition),
        "--tau",
        "1.0",
        "--out",
        s(&identity),
    ]);
    assert_eq!(
        fs::read(&mask_path).unwrap(),
        fs::read(&identity).unwrap(),
        "tau = 1 must reproduce the input byte for byte"
    );
}

#[test]
fn refine_shape_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let (_, partition) = write_quadrant_fixture(dir.path());
    let mask_path = dir.path().join("mask.png");
    write_label_mask(&mask_path, &LabelMask::new(4, 4, vec![0; 16], 2).unwrap()).unwrap();
    let out = dir.path().join("refined.png");
    run_err(
        &[
            "refine",
            "--mask",
            s(&mask_path),
            "--partition",
            s(&partition),
            "--out",
            s(&out),
        ],
        2,
    );
}

#[test]
fn eval_identical_masks_score_miou_one() {
    let dir = tempfile::tempdir().unwrap();
    let mask_path = dir.path().join("mask.png");
    write_label_mask(
        &mask_path,
        &LabelMask::new(4, 2, vec![0, 0, 1, 1, 2, 2, 0, 1], 3).unwrap(),
    )
    .unwrap();
    let report_path = dir.path().join("report.json");
    let stdout = run_ok(&[
        "eval",
        "--pred",
        s(&mask_path),
        "--gt",
        s(&mask_path),
        "--out",
        s(&report_path),
    ]);
    assert!(stdout.contains("miou = 1.000000"), "{stdout}");

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["miou"], 1.0);
    assert_eq!(report["total_pixels"], 8);
}

#[test]
fn eval_disjoint_masks_score_zero_for_involved_classes() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("pred.png");
    let gt = dir.path().join("gt.png");
    write_label_mask(&pred, &LabelMask::new(2, 2, vec![1; 4], 2).unwrap()).unwrap();
    write_label_mask(&gt, &LabelMask::new(2, 2, vec![0; 4], 1).unwrap()).unwrap();
    let report_path = dir.path().join("report.json");
    let stdout = run_ok(&[
        "eval",
        "--pred",
        s(&pred),
        "--gt",
        s(&gt),
        "--out",
        s(&report_path),
    ]);
    assert!(stdout.contains("iou_class_0 = 0.000000"), "{stdout}");
    assert!(stdout.contains("iou_class_1 = 0.000000"), "{stdout}");
    assert!(stdout.contains("miou = 0.000000"), "{stdout}");
}

#[test]
fn synth_runs_are_byte_identical_and_respect_noise() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        run_ok(&[
            "synth",
            "--width",
            "48",
            "--height",
            "32",
            "--seed",
            "9",
            "--out-dir",
            s(out),
        ]);
    }
    for name in ["image.png", "ground_truth.png", "corrupted.png"] {
        assert_eq!(
            sha256_hex(&out_a.join(name)).unwrap(),
            sha256_hex(&out_b.join(name)).unwrap(),
            "{name} differs between identical runs"
        );
    }

    let clean = dir.path().join("clean");
    run_ok(&[
        "synth",
        "--noise",
        "0",
        "--width",
        "16",
        "--height",
        "16",
        "--out-dir",
        s(&clean),
    ]);
    assert!(!clean.join("corrupted.png").exists());
}

fn pipeline_fixture(dir: &Path) -> PathBuf {
    let params = SynthParams {
        seed: 3,
        ..SynthParams::default()
    };
    let (image, gt) = synth::generate(&params).unwrap();
    let corrupted = synth::corrupt(&gt, params.noise_rate, params.seed);
    write_rgb_image(&dir.join("image.png"), &image).unwrap();
    write_label_mask(&dir.join("gt.png"), &gt).unwrap();
    write_probability_map(&dir.join("probs.spxt"), &one_hot_probs(&corrupted)).unwrap();

    let config = dir.join("run.cfg");
    fs::write(
        &config,
        "image = image.png\nground_truth = gt.png\nout_dir = run\n\
         probability_map = probs.spxt\nslic.cluster_size = 8\nrefine.tau = 0.5\n\
         loss.lambda1 = 1.0\nloss.lambda2 = 1.0\nloss.lambda3 = 1.0\n",
    )
    .unwrap();
    config
}

#[test]
fn pipeline_improves_miou_and_writes_a_consistent_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = pipeline_fixture(dir.path());
    let stdout = run_ok(&["pipeline", "--config", s(&config)]);
    assert!(stdout.contains("miou_refined"), "{stdout}");

    let run_dir = dir.path().join("run");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run_dir.join("report.json")).unwrap()).unwrap();
    let initial = report["initial"]["miou"].as_f64().unwrap();
    let refined = report["refined"]["miou"].as_f64().unwrap();
    assert!(
        refined >= initial,
        "refinement should not hurt: {initial} -> {refined}"
    );
    assert!(report["loss"].is_null(), "no feature stacks, no loss");

    // Intermediates are off, so the run directory holds exactly the final
    // mask, the report, and the manifest.
    let mut names: Vec<String> = fs::read_dir(&run_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, ["manifest.json", "refined.png", "report.json"]);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run_dir.join("manifest.json")).unwrap()).unwrap();
    for file in manifest["files"].as_array().unwrap() {
        let rehash = sha256_hex(&run_dir.join(file["path"].as_str().unwrap())).unwrap();
        assert_eq!(file["sha256"].as_str().unwrap(), rehash);
    }
}

#[test]
fn pipeline_with_feature_stacks_reports_the_loss_and_intermediates() {
    let dir = tempfile::tempdir().unwrap();
    let config = pipeline_fixture(dir.path());

    // Three 4x4 stacks of 2 maps; weights give 4 classes from 2 maps.
    for i in 0..3u32 {
        let values: Vec<f32> = (0..32).map(|v| (v as f32) * 0.1 + i as f32).collect();
        write_feature_stack(
            &dir.path().join(format!("d{i}.spxt")),
            &FeatureMapStack::new(i, 2, 4, 4, values).unwrap(),
        )
        .unwrap();
    }
    write_classifier_weights(
        &dir.path().join("w.spxt"),
        &ClassifierWeights::new(4, 2, vec![1.0, 0.0, 0.0, 1.0, 0.5, 0.5, -1.0, 1.0]).unwrap(),
    )
    .unwrap();
    fs::write(
        &config,
        "image = image.png\nground_truth = gt.png\nout_dir = run2\n\
         probability_map = probs.spxt\nfeatures = d0.spxt, d1.spxt, d2.spxt\nweights = w.spxt\n\
         slic.cluster_size = 8\nrefine.tau = 0.5\nemit_intermediates = true\n\
         loss.lambda1 = 1.0\nloss.lambda2 = 0.5\nloss.lambda3 = 0.25\n",
    )
    .unwrap();

    let stdout = run_ok(&["pipeline", "--config", s(&config)]);
    assert!(stdout.contains("loss = "), "{stdout}");

    let run_dir = dir.path().join("run2");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run_dir.join("report.json")).unwrap()).unwrap();
    let loss = report["loss"].as_f64().unwrap();
    assert!(loss.is_finite() && loss >= 0.0, "loss = {loss}");
    for name in [
        "partition.png",
        "partition.png.txt",
        "initial.png",
        "cam_mask_0.png",
        "cam_mask_1.png",
        "cam_mask_2.png",
        "refined.png",
    ] {
        assert!(run_dir.join(name).exists(), "missing intermediate {name}");
    }
}

#[test]
fn pipeline_missing_lambda_exits_2_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let config = pipeline_fixture(dir.path());
    let body = fs::read_to_string(&config)
        .unwrap()
        .replace("loss.lambda2 = 1.0\n", "");
    fs::write(&config, body).unwrap();

    let stderr = run_err(&["pipeline", "--config", s(&config)], 2);
    assert!(stderr.contains("loss.lambda2"), "{stderr}");
    assert!(
        !dir.path().join("run").exists(),
        "a rejected config must not leave outputs behind"
    );
}

#[test]
fn unknown_flags_exit_2() {
    let out = supix(&["slic", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}
