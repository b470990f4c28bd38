//! Confusion-matrix accumulation and IoU summaries.
//!
//! Counts pool globally: one matrix accumulates over any number of images and
//! the summary is computed from the pooled counts, so batch boundaries never
//! change the result.

use crate::types::{LabelMask, IGNORE_LABEL, MAX_CLASSES};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("class count {num_classes} outside 1..={max}", max = MAX_CLASSES)]
    ClassCount { num_classes: u16 },
    #[error("prediction is {pred_width}x{pred_height} but ground truth is {gt_width}x{gt_height}")]
    ShapeMismatch {
        pred_width: u32,
        pred_height: u32,
        gt_width: u32,
        gt_height: u32,
    },
    #[error("mask declares {mask_classes} classes but the matrix tracks {matrix_classes}")]
    ClassMismatch {
        mask_classes: u16,
        matrix_classes: u16,
    },
    #[error("every class has an empty union, no IoU is defined")]
    NoDefinedClasses,
}

/// Square tally of (ground-truth class, predicted class) pixel counts.
/// Pixels ignored in either mask are skipped entirely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: u16,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: u16) -> Result<Self, MetricsError> {
        if num_classes == 0 || num_classes > MAX_CLASSES {
            return Err(MetricsError::ClassCount { num_classes });
        }
        Ok(ConfusionMatrix {
            num_classes,
            counts: vec![0; num_classes as usize * num_classes as usize],
        })
    }

    pub fn num_classes(&self) -> u16 {
        self.num_classes
    }

    /// Count of pixels with ground truth `gt` predicted as `pred`.
    pub fn count(&self, gt: u16, pred: u16) -> u64 {
        self.counts[gt as usize * self.num_classes as usize + pred as usize]
    }

    /// Total counted pixels.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds one image pair. Both masks must match the matrix's class count
    /// and each other's dimensions.
    pub fn accumulate(&mut self, pred: &LabelMask, gt: &LabelMask) -> Result<(), MetricsError> {
        if pred.width() != gt.width() || pred.height() != gt.height() {
            return Err(MetricsError::ShapeMismatch {
                pred_width: pred.width(),
                pred_height: pred.height(),
                gt_width: gt.width(),
                gt_height: gt.height(),
            });
        }
        for mask in [pred, gt] {
            if mask.num_classes() != self.num_classes {
                return Err(MetricsError::ClassMismatch {
                    mask_classes: mask.num_classes(),
                    matrix_classes: self.num_classes,
                });
            }
        }
        let k = self.num_classes as usize;
        for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
            if p == IGNORE_LABEL || g == IGNORE_LABEL {
                continue;
            }
            self.counts[g as usize * k + p as usize] += 1;
        }
        Ok(())
    }

    /// Adds another matrix's counts; accumulation order never matters.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<(), MetricsError> {
        if other.num_classes != self.num_classes {
            return Err(MetricsError::ClassMismatch {
                mask_classes: other.num_classes,
                matrix_classes: self.num_classes,
            });
        }
        for (a, &b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }
}

/// IoU summary of one pooled confusion matrix.
///
/// `per_class_iou[c]` is `None` when class `c` has an empty union (it appears
/// in neither mask); such classes are excluded from the mean. `fwiou` weights
/// each defined class by its ground-truth pixel share.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub per_class_iou: Vec<Option<f64>>,
    pub miou: f64,
    pub fwiou: f64,
    /// Ground-truth pixel count per class (matrix row sums).
    pub gt_pixels: Vec<u64>,
    /// Total counted pixels.
    pub total_pixels: u64,
}

/// Derives per-class IoU, mean IoU, and frequency-weighted IoU from pooled
/// counts. Errors when no class has a nonempty union.
pub fn report(matrix: &ConfusionMatrix) -> Result<MetricsReport, MetricsError> {
    let k = matrix.num_classes() as usize;
    let mut row_sums = vec![0u64; k];
    let mut col_sums = vec![0u64; k];
    for gt in 0..k {
        for pred in 0..k {
            let c = matrix.count(gt as u16, pred as u16);
            row_sums[gt] += c;
            col_sums[pred] += c;
        }
    }
    let total: u64 = row_sums.iter().sum();

    let mut per_class_iou = Vec::with_capacity(k);
    let mut defined_sum = 0.0f64;
    let mut defined_count = 0u32;
    let mut fwiou = 0.0f64;
    for c in 0..k {
        let intersection = matrix.count(c as u16, c as u16);
        let union = row_sums[c] + col_sums[c] - intersection;
        if union == 0 {
            per_class_iou.push(None);
            continue;
        }
        let iou = intersection as f64 / union as f64;
        per_class_iou.push(Some(iou));
        defined_sum += iou;
        defined_count += 1;
        fwiou += row_sums[c] as f64 / total as f64 * iou;
    }
    if defined_count == 0 {
        return Err(MetricsError::NoDefinedClasses);
    }
    Ok(MetricsReport {
        per_class_iou,
        miou: defined_sum / defined_count as f64,
        fwiou,
        gt_pixels: row_sums,
        total_pixels: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(width: u32, labels: Vec<u8>, k: u16) -> LabelMask {
        let height = labels.len() as u32 / width;
        LabelMask::new(width, height, labels, k).unwrap()
    }

    #[test]
    fn two_class_matrix_matches_hand_counts() {
        // gt:   0 0 0 0 1 1 1 1
        // pred: 0 0 0 1 0 1 1 1
        let gt = mask(8, vec![0, 0, 0, 0, 1, 1, 1, 1], 2);
        let pred = mask(8, vec![0, 0, 0, 1, 0, 1, 1, 1], 2);
        let mut cm = ConfusionMatrix::new(2).unwrap();
        cm.accumulate(&pred, &gt).unwrap();
        assert_eq!(cm.count(0, 0), 3);
        assert_eq!(cm.count(0, 1), 1);
        assert_eq!(cm.count(1, 0), 1);
        assert_eq!(cm.count(1, 1), 3);

        // IoU = 3 / (4 + 4 - 3) = 0.6 for both classes.
        let summary = report(&cm).unwrap();
        assert_eq!(summary.per_class_iou.len(), 2);
        for iou in &summary.per_class_iou {
            assert!((iou.unwrap() - 0.6).abs() < 1e-12);
        }
        assert!((summary.miou - 0.6).abs() < 1e-12);
        assert!((summary.fwiou - 0.6).abs() < 1e-12);
        assert_eq!(summary.total_pixels, 8);
    }

    #[test]
    fn ignored_pixels_are_skipped_in_either_mask() {
        let gt = mask(4, vec![0, IGNORE_LABEL, 1, 1], 2);
        let pred = mask(4, vec![0, 0, IGNORE_LABEL, 1], 2);
        let mut cm = ConfusionMatrix::new(2).unwrap();
        cm.accumulate(&pred, &gt).unwrap();
        assert_eq!(cm.total(), 2);
        assert_eq!(cm.count(0, 0), 1);
        assert_eq!(cm.count(1, 1), 1);
    }

    #[test]
    fn absent_class_is_excluded_from_the_mean() {
        // Class 2 appears nowhere: its IoU is undefined, mean over the rest.
        let gt = mask(4, vec![0, 0, 1, 1], 3);
        let pred = mask(4, vec![0, 1, 1, 1], 3);
        let mut cm = ConfusionMatrix::new(3).unwrap();
        cm.accumulate(&pred, &gt).unwrap();
        let summary = report(&cm).unwrap();
        assert_eq!(summary.per_class_iou[2], None);
        let iou0 = 1.0 / 2.0;
        let iou1 = 2.0 / 3.0;
        assert!((summary.miou - (iou0 + iou1) / 2.0).abs() < 1e-12);
        assert!((summary.fwiou - (0.5 * iou0 + 0.5 * iou1)).abs() < 1e-12);
    }

    #[test]
    fn batched_accumulation_equals_one_shot() {
        let gt_a = mask(4, vec![0, 1, 2, 0], 3);
        let pred_a = mask(4, vec![0, 1, 1, 0], 3);
        let gt_b = mask(4, vec![2, 2, 1, 0], 3);
        let pred_b = mask(4, vec![2, 0, 1, 1], 3);

        let mut pooled = ConfusionMatrix::new(3).unwrap();
        pooled.accumulate(&pred_a, &gt_a).unwrap();
        pooled.accumulate(&pred_b, &gt_b).unwrap();

        let mut part_a = ConfusionMatrix::new(3).unwrap();
        part_a.accumulate(&pred_a, &gt_a).unwrap();
        let mut part_b = ConfusionMatrix::new(3).unwrap();
        part_b.accumulate(&pred_b, &gt_b).unwrap();
        part_a.merge(&part_b).unwrap();

        assert_eq!(pooled, part_a);
    }

    #[test]
    fn perfect_prediction_scores_one() {
        let gt = mask(4, vec![0, 1, 1, 0], 2);
        let mut cm = ConfusionMatrix::new(2).unwrap();
        cm.accumulate(&gt, &gt).unwrap();
        let summary = report(&cm).unwrap();
        assert_eq!(summary.miou, 1.0);
        assert_eq!(summary.fwiou, 1.0);
    }

    #[test]
    fn empty_matrix_has_no_defined_classes() {
        let cm = ConfusionMatrix::new(3).unwrap();
        assert_eq!(report(&cm), Err(MetricsError::NoDefinedClasses));
    }

    #[test]
    fn shape_and_class_mismatches_are_rejected() {
        let gt = mask(4, vec![0, 0, 1, 1], 2);
        let pred_short = mask(2, vec![0, 1], 2);
        let mut cm = ConfusionMatrix::new(2).unwrap();
        assert!(matches!(
            cm.accumulate(&pred_short, &gt),
            Err(MetricsError::ShapeMismatch { .. })
        ));
        let pred_k3 = mask(4, vec![0, 0, 1, 1], 3);
        assert!(matches!(
            cm.accumulate(&pred_k3, &gt),
            Err(MetricsError::ClassMismatch { .. })
        ));
    }
}
