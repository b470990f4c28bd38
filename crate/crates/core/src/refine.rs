//! Majority-vote mask refinement over superpixels.
//!
//! For each superpixel, tally the mask labels of its pixels, find the
//! dominant label and its share of the votes, and rewrite the whole
//! superpixel to the dominant label when that share strictly exceeds a
//! threshold. Ignored pixels never vote and are never rewritten.

use crate::types::{LabelMask, SuperpixelPartition, ValidationError, Validate, IGNORE_LABEL};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RefineError {
    #[error("mask is {mask_width}x{mask_height} but partition is {part_width}x{part_height}")]
    ShapeMismatch {
        mask_width: u32,
        mask_height: u32,
        part_width: u32,
        part_height: u32,
    },
    #[error("invalid refinement parameters: {0}")]
    InvalidParams(#[from] ValidationError),
}

/// What counts as a superpixel's size when computing the dominance ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IgnorePolicy {
    /// Ratio denominator is the number of non-ignored pixels (default).
    #[default]
    Exclude,
    /// Ratio denominator is the full pixel count, so ignored pixels dilute
    /// the dominant share.
    CountInTotal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineParams {
    /// Dominance threshold: a superpixel is rewritten only when the dominant
    /// label's share strictly exceeds this value. 1.0 disables rewriting.
    pub tau: f32,
    pub ignore_policy: IgnorePolicy,
}

impl Default for RefineParams {
    fn default() -> Self {
        RefineParams {
            tau: 0.5,
            ignore_policy: IgnorePolicy::Exclude,
        }
    }
}

impl Validate for RefineParams {
    fn validate(&self) -> Result<(), ValidationError> {
        if !self.tau.is_finite() || self.tau <= 0.0 || self.tau > 1.0 {
            return Err(ValidationError::ParamOutOfRange {
                type_name: "RefineParams",
                field: "tau",
                value: self.tau as f64,
                constraint: "must lie in (0, 1]",
            });
        }
        Ok(())
    }
}

/// Per-superpixel vote tallies.
///
/// `dominant_labels[i]` is the most frequent non-ignored label of superpixel
/// `i` (ties resolve to the lowest label) or [`IGNORE_LABEL`] when the
/// superpixel has no non-ignored pixel. `ratios[i]` is the dominant label's
/// vote count divided by the superpixel's counted size under the chosen
/// [`IgnorePolicy`]; it is 0 when there are no votes.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpixelStats {
    num_superpixels: u32,
    num_classes: u16,
    counts: Vec<u32>,
    dominant_labels: Vec<u8>,
    ratios: Vec<f64>,
}

impl SuperpixelStats {
    pub fn num_superpixels(&self) -> u32 {
        self.num_superpixels
    }

    pub fn num_classes(&self) -> u16 {
        self.num_classes
    }

    /// Vote counts of one superpixel, indexed by class.
    pub fn class_counts(&self, superpixel: u32) -> &[u32] {
        let k = self.num_classes as usize;
        &self.counts[superpixel as usize * k..(superpixel as usize + 1) * k]
    }

    pub fn dominant_labels(&self) -> &[u8] {
        &self.dominant_labels
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }
}

/// Tallies mask labels per superpixel and derives dominant labels and
/// dominance ratios.
pub fn compute_stats(
    mask: &LabelMask,
    partition: &SuperpixelPartition,
    policy: IgnorePolicy,
) -> Result<SuperpixelStats, RefineError> {
    check_shapes(mask, partition)?;
    let n = partition.num_superpixels() as usize;
    let k = mask.num_classes() as usize;

    let mut counts = vec![0u32; n * k];
    let mut totals = vec![0u32; n];
    for (&label, &id) in mask.labels().iter().zip(partition.assignments()) {
        totals[id as usize] += 1;
        if label != IGNORE_LABEL {
            counts[id as usize * k + label as usize] += 1;
        }
    }

    let mut dominant_labels = Vec::with_capacity(n);
    let mut ratios = Vec::with_capacity(n);
    for sp in 0..n {
        let votes = &counts[sp * k..(sp + 1) * k];
        let voted: u32 = votes.iter().sum();
        if voted == 0 {
            dominant_labels.push(IGNORE_LABEL);
            ratios.push(0.0);
            continue;
        }
        // Strict comparison keeps the lowest class index on ties.
        let mut best_class = 0usize;
        for class in 1..k {
            if votes[class] > votes[best_class] {
                best_class = class;
            }
        }
        let denominator = match policy {
            IgnorePolicy::Exclude => voted,
            IgnorePolicy::CountInTotal => totals[sp],
        };
        dominant_labels.push(best_class as u8);
        ratios.push(votes[best_class] as f64 / denominator as f64);
    }

    Ok(SuperpixelStats {
        num_superpixels: partition.num_superpixels(),
        num_classes: mask.num_classes(),
        counts,
        dominant_labels,
        ratios,
    })
}

/// Rewrites every superpixel whose dominance ratio strictly exceeds
/// `params.tau` to its dominant label; all other superpixels, and every
/// ignored pixel, pass through unchanged. `tau = 1.0` is the identity.
pub fn floodfill_refine(
    mask: &LabelMask,
    partition: &SuperpixelPartition,
    params: &RefineParams,
) -> Result<LabelMask, RefineError> {
    params.validate()?;
    let stats = compute_stats(mask, partition, params.ignore_policy)?;
    let tau = params.tau as f64;

    let mut labels = Vec::with_capacity(mask.labels().len());
    for (&label, &id) in mask.labels().iter().zip(partition.assignments()) {
        if label != IGNORE_LABEL && stats.ratios[id as usize] > tau {
            // ratio > 0 implies the superpixel had votes, so its dominant
            // label is a real class.
            labels.push(stats.dominant_labels[id as usize]);
        } else {
            labels.push(label);
        }
    }
    Ok(LabelMask::from_parts(
        mask.width(),
        mask.height(),
        labels,
        mask.num_classes(),
    ))
}

fn check_shapes(mask: &LabelMask, partition: &SuperpixelPartition) -> Result<(), RefineError> {
    if mask.width() != partition.width() || mask.height() != partition.height() {
        return Err(RefineError::ShapeMismatch {
            mask_width: mask.width(),
            mask_height: mask.height(),
            part_width: partition.width(),
            part_height: partition.height(),
        });
    }
    Ok(())
}
