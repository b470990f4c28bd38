//! Class activation maps: logits, score maps, pseudo-masks, and the
//! multi-depth cross-entropy loss.
//!
//! A linear head over globally average-pooled activation maps yields one
//! logit per class; re-applying the same weights per pixel yields a spatial
//! score map, which is bilinearly upsampled to image resolution and argmaxed
//! into a pseudo-label mask. All accumulation runs in f64.

use crate::types::{
    ClassifierWeights, FeatureMapStack, LabelMask, ProbabilityMap, ScoreMap, ValidationError,
    Validate, IGNORE_LABEL,
};
use thiserror::Error;

/// Probabilities are clamped to at least this value before taking the log,
/// so the loss stays finite on over-confident wrong predictions.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CamError {
    #[error("feature stack (depth {depth_id}) has {stack_maps} maps but the classifier expects {weight_maps}")]
    MapCountMismatch {
        depth_id: u32,
        stack_maps: u32,
        weight_maps: u32,
    },
    #[error("requested {out_width}x{out_height} output below the {in_width}x{in_height} feature resolution")]
    OutputSmallerThanInput {
        out_width: u32,
        out_height: u32,
        in_width: u32,
        in_height: u32,
    },
    #[error("mask {index} is {mask_width}x{mask_height} with {mask_classes} classes; probabilities are {prob_width}x{prob_height} with {prob_classes}")]
    MaskShapeMismatch {
        index: usize,
        mask_width: u32,
        mask_height: u32,
        mask_classes: u16,
        prob_width: u32,
        prob_height: u32,
        prob_classes: u16,
    },
    #[error("mask {index} has no non-ignored pixels, its mean loss is undefined")]
    AllPixelsIgnored { index: usize },
    #[error("invalid layer weights: {0}")]
    InvalidParams(#[from] ValidationError),
}

/// Blend weights for the per-depth losses. Non-negative, not all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub weights: [f32; 3],
}

impl Default for LayerWeights {
    fn default() -> Self {
        LayerWeights {
            weights: [1.0 / 3.0; 3],
        }
    }
}

impl Validate for LayerWeights {
    fn validate(&self) -> Result<(), ValidationError> {
        for (i, &w) in self.weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(ValidationError::ValueOutOfRange {
                    type_name: "LayerWeights",
                    field: "weights",
                    index: i,
                    value: w,
                    lo: 0.0,
                    hi: f32::INFINITY,
                });
            }
        }
        if self.weights.iter().all(|&w| w == 0.0) {
            return Err(ValidationError::ParamOutOfRange {
                type_name: "LayerWeights",
                field: "weights",
                value: 0.0,
                constraint: "at least one weight must be positive",
            });
        }
        Ok(())
    }
}

/// One logit per class: the weighted sum of globally average-pooled maps,
/// `logit_c = sum_k w[c][k] * mean(map_k)`.
pub fn compute_logits(
    features: &FeatureMapStack,
    weights: &ClassifierWeights,
) -> Result<Vec<f32>, CamError> {
    check_map_count(features, weights)?;
    let plane = features.height() as usize * features.width() as usize;
    let inv = 1.0 / plane as f64;
    let pooled: Vec<f64> = (0..features.num_maps())
        .map(|k| features.map(k).iter().map(|&v| v as f64).sum::<f64>() * inv)
        .collect();
    let mut logits = Vec::with_capacity(weights.num_classes() as usize);
    for class in 0..weights.num_classes() {
        let row = weights.class_weights(class);
        let z: f64 = row
            .iter()
            .zip(&pooled)
            .map(|(&w, &g)| w as f64 * g)
            .sum();
        logits.push(z as f32);
    }
    Ok(logits)
}

/// Per-class spatial scores `sum_k w[c][k] * map_k(i, j)`, bilinearly
/// upsampled to `out_height x out_width` (half-pixel centers, no corner
/// alignment). Equal input and output resolutions skip resampling, so the
/// scores are the exact weighted sums.
pub fn compute_score_map(
    features: &FeatureMapStack,
    weights: &ClassifierWeights,
    out_height: u32,
    out_width: u32,
) -> Result<ScoreMap, CamError> {
    check_map_count(features, weights)?;
    if out_height < features.height() || out_width < features.width() {
        return Err(CamError::OutputSmallerThanInput {
            out_width,
            out_height,
            in_width: features.width(),
            in_height: features.height(),
        });
    }
    let in_h = features.height() as usize;
    let in_w = features.width() as usize;
    let plane = in_h * in_w;
    let classes = weights.num_classes() as usize;

    // Weighted sum at feature resolution, f64 throughout.
    let mut base = vec![0.0f64; classes * plane];
    for class in 0..classes {
        let row = weights.class_weights(class as u16);
        let out = &mut base[class * plane..(class + 1) * plane];
        for (k, &w) in row.iter().enumerate() {
            let w = w as f64;
            for (o, &v) in out.iter_mut().zip(features.map(k as u32)) {
                *o += w * v as f64;
            }
        }
    }

    let out_h = out_height as usize;
    let out_w = out_width as usize;
    let scores: Vec<f32> = if out_h == in_h && out_w == in_w {
        base.iter().map(|&v| v as f32).collect()
    } else {
        let mut out = Vec::with_capacity(classes * out_h * out_w);
        for class in 0..classes {
            let src = &base[class * plane..(class + 1) * plane];
            upsample_bilinear(src, in_h, in_w, out_h, out_w, &mut out);
        }
        out
    };
    ScoreMap::new(weights.num_classes(), out_height, out_width, scores)
        .map_err(CamError::InvalidParams)
}

/// Bilinear resampling with half-pixel centers: output pixel `o` samples the
/// source at `(o + 0.5) * in/out - 0.5`, clamped to the source grid.
fn upsample_bilinear(
    src: &[f64],
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
    out: &mut Vec<f32>,
) {
    let scale_y = in_h as f64 / out_h as f64;
    let scale_x = in_w as f64 / out_w as f64;
    for oy in 0..out_h {
        let sy = ((oy as f64 + 0.5) * scale_y - 0.5).max(0.0);
        let y0 = (sy as usize).min(in_h - 1);
        let y1 = (y0 + 1).min(in_h - 1);
        let fy = sy - y0 as f64;
        for ox in 0..out_w {
            let sx = ((ox as f64 + 0.5) * scale_x - 0.5).max(0.0);
            let x0 = (sx as usize).min(in_w - 1);
            let x1 = (x0 + 1).min(in_w - 1);
            let fx = sx - x0 as f64;
            let top = src[y0 * in_w + x0] * (1.0 - fx) + src[y0 * in_w + x1] * fx;
            let bottom = src[y1 * in_w + x0] * (1.0 - fx) + src[y1 * in_w + x1] * fx;
            out.push((top * (1.0 - fy) + bottom * fy) as f32);
        }
    }
}

/// Pseudo-mask by per-pixel argmax over the class planes; ties resolve to the
/// lowest class index.
pub fn score_map_to_mask(scores: &ScoreMap) -> LabelMask {
    argmax_mask(
        scores.scores(),
        scores.num_classes(),
        scores.height(),
        scores.width(),
    )
}

/// Per-pixel argmax of a probability map, same tie rule as
/// [`score_map_to_mask`].
pub fn probability_map_to_mask(probs: &ProbabilityMap) -> LabelMask {
    argmax_mask(
        probs.probs(),
        probs.num_classes(),
        probs.height(),
        probs.width(),
    )
}

fn argmax_mask(planes: &[f32], num_classes: u16, height: u32, width: u32) -> LabelMask {
    let plane = height as usize * width as usize;
    let mut labels = vec![0u8; plane];
    for (pixel, label) in labels.iter_mut().enumerate() {
        let mut best_class = 0usize;
        let mut best = planes[pixel];
        for class in 1..num_classes as usize {
            let v = planes[class * plane + pixel];
            if v > best {
                best = v;
                best_class = class;
            }
        }
        *label = best_class as u8;
    }
    // num_classes <= 255 by the ScoreMap/ProbabilityMap invariant, so every
    // argmax index fits the label byte.
    LabelMask::from_parts(width, height, labels, num_classes)
}

/// Mean negative log-likelihood of `probs` against one pseudo-mask, over
/// non-ignored pixels, with probabilities clamped to [`PROB_FLOOR`].
fn mask_loss(probs: &ProbabilityMap, mask: &LabelMask, index: usize) -> Result<f64, CamError> {
    if mask.width() != probs.width()
        || mask.height() != probs.height()
        || mask.num_classes() != probs.num_classes()
    {
        return Err(CamError::MaskShapeMismatch {
            index,
            mask_width: mask.width(),
            mask_height: mask.height(),
            mask_classes: mask.num_classes(),
            prob_width: probs.width(),
            prob_height: probs.height(),
            prob_classes: probs.num_classes(),
        });
    }
    let plane = probs.height() as usize * probs.width() as usize;
    let planes = probs.probs();
    let mut sum = 0.0f64;
    let mut count = 0u64;
    for (pixel, &label) in mask.labels().iter().enumerate() {
        if label == IGNORE_LABEL {
            continue;
        }
        let p = planes[label as usize * plane + pixel] as f64;
        sum -= p.max(PROB_FLOOR).ln();
        count += 1;
    }
    if count == 0 {
        return Err(CamError::AllPixelsIgnored { index });
    }
    Ok(sum / count as f64)
}

/// Blended cross-entropy of one probability map against three pseudo-masks,
/// `L = w1 * l(probs, mask1) + w2 * l(probs, mask2) + w3 * l(probs, mask3)`,
/// where each `l` is the mean of `-ln p(label)` over non-ignored pixels.
pub fn multi_layer_loss(
    probs: &ProbabilityMap,
    masks: [&LabelMask; 3],
    weights: &LayerWeights,
) -> Result<f64, CamError> {
    weights.validate()?;
    let mut total = 0.0f64;
    for (index, mask) in masks.iter().enumerate() {
        let l = mask_loss(probs, mask, index)?;
        total += weights.weights[index] as f64 * l;
    }
    Ok(total)
}

fn check_map_count(
    features: &FeatureMapStack,
    weights: &ClassifierWeights,
) -> Result<(), CamError> {
    if features.num_maps() != weights.num_maps() {
        return Err(CamError::MapCountMismatch {
            depth_id: features.depth_id(),
            stack_maps: features.num_maps(),
            weight_maps: weights.num_maps(),
        });
    }
    Ok(())
}
