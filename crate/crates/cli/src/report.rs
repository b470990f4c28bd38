//! Report rendering and output manifests.
//!
//! Human-readable metrics go to stdout as a `key = value` block; structured
//! reports are JSON with sorted keys so reruns diff cleanly. Each pipeline
//! run also writes `manifest.json` listing every emitted file with its
//! SHA-256, in emission order.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use supix_core::metrics::MetricsReport;

use crate::formats::FormatError;

/// `key = value` lines for stdout, fixed six-decimal formatting; undefined
/// per-class IoUs print as `undefined`.
pub fn metrics_text(report: &MetricsReport) -> String {
    let mut out = String::new();
    for (class, iou) in report.per_class_iou.iter().enumerate() {
        match iou {
            Some(v) => out.push_str(&format!("iou_class_{class} = {v:.6}\n")),
            None => out.push_str(&format!("iou_class_{class} = undefined\n")),
        }
    }
    out.push_str(&format!("miou = {:.6}\n", report.miou));
    out.push_str(&format!("fwiou = {:.6}\n", report.fwiou));
    out.push_str(&format!("total_pixels = {}\n", report.total_pixels));
    out
}

pub fn metrics_json(report: &MetricsReport) -> Value {
    json!({
        "per_class_iou": report.per_class_iou,
        "miou": report.miou,
        "fwiou": report.fwiou,
        "gt_pixels": report.gt_pixels,
        "total_pixels": report.total_pixels,
    })
}

/// Serde_json maps are BTree-backed by default, so nested objects come out
/// with sorted keys on their own; this only fixes the trailing newline.
pub fn write_json(path: &Path, value: &Value) -> Result<(), FormatError> {
    let mut text = serde_json::to_string_pretty(value).expect("reports contain no non-finite f64");
    text.push('\n');
    fs::write(path, text).map_err(|e| FormatError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn sha256_hex(path: &Path) -> Result<String, FormatError> {
    let bytes = fs::read(path).map_err(|e| FormatError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(hex)
}

/// Writes `<dir>/manifest.json` covering `files` (paths inside `dir`, in
/// emission order). The manifest itself is not listed.
pub fn write_manifest(dir: &Path, files: &[PathBuf]) -> Result<PathBuf, FormatError> {
    let mut entries = Vec::with_capacity(files.len());
    for file in files {
        let name = file
            .strip_prefix(dir)
            .unwrap_or(file)
            .to_string_lossy()
            .into_owned();
        let mut entry = Map::new();
        entry.insert("path".into(), Value::String(name));
        entry.insert("sha256".into(), Value::String(sha256_hex(file)?));
        entries.push(Value::Object(entry));
    }
    let manifest_path = dir.join("manifest.json");
    write_json(&manifest_path, &json!({ "files": entries }))?;
    Ok(manifest_path)
}
