//! Pipeline run configuration: a flat `key = value` text file with dotted
//! section prefixes.
//!
//! ```text
//! # paths are resolved relative to the config file
//! image = patch.png
//! ground_truth = gt.png
//! out_dir = run1
//! probability_map = probs.spxt
//! features = d1.spxt, d2.spxt, d3.spxt
//! weights = weights.spxt
//!
//! slic.cluster_size = 8
//! refine.tau = 0.5
//! loss.lambda1 = 1.0
//! loss.lambda2 = 1.0
//! loss.lambda3 = 1.0
//! ```
//!
//! Blank lines and `#` comments are skipped. Unknown and duplicate keys
//! are errors, as are referenced input files that do not exist: every
//! problem is reported before any pipeline work starts.

use std::fs;
use std::path::{Path, PathBuf};

use supix_core::cam::LayerWeights;
use supix_core::refine::{IgnorePolicy, RefineParams};
use supix_core::slic::SlicParams;
use supix_core::types::Validate;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {detail}")]
    Line {
        path: PathBuf,
        line: usize,
        detail: String,
    },
    #[error("{path}: {detail}")]
    Invalid { path: PathBuf, detail: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub image: PathBuf,
    pub ground_truth: PathBuf,
    pub out_dir: PathBuf,
    /// Second-stage class probabilities; when present, its argmax is the
    /// mask that gets refined.
    pub probability_map: Option<PathBuf>,
    /// Feature stacks ordered shallow to deep. With no probability map the
    /// first stack's activation mask is refined instead.
    pub features: Vec<PathBuf>,
    pub weights: Option<PathBuf>,
    pub slic: SlicParams,
    pub refine: RefineParams,
    pub loss_weights: LayerWeights,
    pub emit_intermediates: bool,
}

impl PipelineConfig {
    /// Parses and fully validates a config file. Relative paths are
    /// resolved against the config file's directory; all referenced input
    /// files must already exist.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let line_err = |line: usize, detail: String| ConfigError::Line {
            path: path.to_path_buf(),
            line,
            detail,
        };
        let file_err = |detail: String| ConfigError::Invalid {
            path: path.to_path_buf(),
            detail,
        };

        let mut image = None;
        let mut ground_truth = None;
        let mut out_dir = None;
        let mut probability_map = None;
        let mut features: Vec<PathBuf> = Vec::new();
        let mut weights = None;
        let mut slic = SlicParams::default();
        let mut refine = RefineParams::default();
        let mut lambdas: [Option<f32>; 3] = [None; 3];
        let mut emit_intermediates = false;

        let mut seen: Vec<String> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(line_err(line_no, "expected `key = value`".into()));
            };
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() {
                return Err(line_err(line_no, format!("`{key}` has no value")));
            }
            if seen.iter().any(|s| s == key) {
                return Err(line_err(line_no, format!("duplicate key `{key}`")));
            }
            seen.push(key.to_string());

            let parse_f32 = |v: &str| {
                v.parse::<f32>()
                    .map_err(|_| line_err(line_no, format!("`{key}`: `{v}` is not a number")))
            };
            let parse_u32 = |v: &str| {
                v.parse::<u32>()
                    .map_err(|_| line_err(line_no, format!("`{key}`: `{v}` is not an integer")))
            };
            match key {
                "image" => image = Some(base.join(value)),
                "ground_truth" => ground_truth = Some(base.join(value)),
                "out_dir" => out_dir = Some(base.join(value)),
                "probability_map" => probability_map = Some(base.join(value)),
                "weights" => weights = Some(base.join(value)),
                "features" => {
                    for part in value.split(',') {
                        let part = part.trim();
                        if part.is_empty() {
                            return Err(line_err(line_no, "empty entry in `features`".into()));
                        }
                        features.push(base.join(part));
                    }
                }
                "emit_intermediates" => {
                    emit_intermediates = match value {
                        "true" => true,
                        "false" => false,
                        other => {
                            return Err(line_err(
                                line_no,
                                format!("`{key}`: `{other}` is not `true` or `false`"),
                            ))
                        }
                    }
                }
                "slic.cluster_size" => slic.cluster_size = parse_u32(value)?,
                "slic.compactness" => slic.compactness = parse_f32(value)?,
                "slic.max_iterations" => slic.max_iterations = parse_u32(value)?,
                "slic.min_region_fraction" => slic.min_region_fraction = parse_f32(value)?,
                "refine.tau" => refine.tau = parse_f32(value)?,
                "refine.ignore_policy" => {
                    refine.ignore_policy = match value {
                        "exclude" => IgnorePolicy::Exclude,
                        "count_in_total" => IgnorePolicy::CountInTotal,
                        other => {
                            return Err(line_err(
                                line_no,
                                format!(
                                    "`{key}`: `{other}` is not `exclude` or `count_in_total`"
                                ),
                            ))
                        }
                    }
                }
                "loss.lambda1" => lambdas[0] = Some(parse_f32(value)?),
                "loss.lambda2" => lambdas[1] = Some(parse_f32(value)?),
                "loss.lambda3" => lambdas[2] = Some(parse_f32(value)?),
                other => return Err(line_err(line_no, format!("unknown key `{other}`"))),
            }
        }

        let image = image.ok_or_else(|| file_err("missing required key `image`".into()))?;
        let ground_truth =
            ground_truth.ok_or_else(|| file_err("missing required key `ground_truth`".into()))?;
        let out_dir = out_dir.ok_or_else(|| file_err("missing required key `out_dir`".into()))?;
        let loss_weights = LayerWeights {
            weights: [
                lambdas[0].ok_or_else(|| file_err("missing required key `loss.lambda1`".into()))?,
                lambdas[1].ok_or_else(|| file_err("missing required key `loss.lambda2`".into()))?,
                lambdas[2].ok_or_else(|| file_err("missing required key `loss.lambda3`".into()))?,
            ],
        };

        if probability_map.is_none() && features.is_empty() {
            return Err(file_err(
                "no mask source: set `probability_map` or `features` + `weights`".into(),
            ));
        }
        if !features.is_empty() && weights.is_none() {
            return Err(file_err("`features` requires `weights`".into()));
        }
        if weights.is_some() && features.is_empty() {
            return Err(file_err("`weights` requires `features`".into()));
        }

        slic.validate()
            .map_err(|e| file_err(format!("slic parameters: {e}")))?;
        refine
            .validate()
            .map_err(|e| file_err(format!("refine parameters: {e}")))?;
        loss_weights
            .validate()
            .map_err(|e| file_err(format!("loss weights: {e}")))?;

        let mut inputs: Vec<&PathBuf> = vec![&image, &ground_truth];
        inputs.extend(&probability_map);
        inputs.extend(&features);
        inputs.extend(&weights);
        for input in inputs {
            if !input.is_file() {
                return Err(file_err(format!(
                    "input file does not exist: {}",
                    input.display()
                )));
            }
        }

        Ok(PipelineConfig {
            image,
            ground_truth,
            out_dir,
            probability_map,
            features,
            weights,
            slic,
            refine,
            loss_weights,
            emit_intermediates,
        })
    }
}
