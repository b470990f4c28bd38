//! Post-processing toolkit for weakly supervised tissue segmentation:
//! superpixel clustering, activation-map pseudo-masks, majority-vote mask
//! refinement, IoU metrics, and deterministic synthetic fixtures.
//!
//! Everything here is deterministic: identical inputs produce bit-identical
//! outputs regardless of thread count, and all randomness is counter-based
//! from explicit seeds.

pub mod cam;
pub mod metrics;
pub mod refine;
pub mod slic;
pub mod synth;
pub mod types;

pub use types::{
    ClassifierWeights, FeatureMapStack, ImageLab, ImageRgb, LabelMask, ProbabilityMap, ScoreMap,
    SuperpixelPartition, Validate, ValidationError, IGNORE_LABEL, MAX_CLASSES,
};
