//! Shared pixel-grid types and their validation.
//!
//! Every grid is row-major with `(row, col)` indexing: element `(i, j)` of a
//! `height x width` grid lives at index `i * width + j`. Values are immutable
//! after construction and every public constructor validates the invariants
//! listed on the type, so downstream code can rely on them without re-checking.

use thiserror::Error;

/// Sentinel label for pixels outside the region of interest.
///
/// Ignored pixels never vote in superpixel statistics, never contribute to
/// losses, and are skipped by the evaluation metrics.
pub const IGNORE_LABEL: u8 = 255;

/// Largest admissible class count. Label value 255 is reserved for
/// [`IGNORE_LABEL`], so class indices occupy `0..=254`.
pub const MAX_CLASSES: u16 = 255;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("{type_name}.{field}: expected {expected} elements for the declared dimensions, got {actual}")]
    BufferLength {
        type_name: &'static str,
        field: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("{type_name}.{field}: must be nonzero")]
    ZeroDimension {
        type_name: &'static str,
        field: &'static str,
    },
    #[error("{type_name}.num_classes: {num_classes} outside 1..={max}", max = MAX_CLASSES)]
    ClassCount {
        type_name: &'static str,
        num_classes: u16,
    },
    #[error("{type_name}.{field}[{index}]: non-finite value {value}")]
    NonFinite {
        type_name: &'static str,
        field: &'static str,
        index: usize,
        value: f32,
    },
    #[error("{type_name}.{field}[{index}]: value {value} outside [{lo}, {hi}]")]
    ValueOutOfRange {
        type_name: &'static str,
        field: &'static str,
        index: usize,
        value: f32,
        lo: f32,
        hi: f32,
    },
    #[error("LabelMask.labels[{index}]: label {label} not below num_classes {num_classes} and not IGNORE")]
    LabelOutOfRange {
        index: usize,
        label: u8,
        num_classes: u16,
    },
    #[error("SuperpixelPartition.assignments[{index}]: id {id} not below num_superpixels {num_superpixels}")]
    SuperpixelIdOutOfRange {
        index: usize,
        id: u32,
        num_superpixels: u32,
    },
    #[error("SuperpixelPartition: superpixel id {id} owns no pixels")]
    EmptySuperpixel { id: u32 },
    #[error("ProbabilityMap.probs: class vector at pixel {index} sums to {sum}, expected 1 within 1e-6")]
    NotNormalized { index: usize, sum: f32 },
    #[error("{type_name}.{field}: value {value} violates \"{constraint}\"")]
    ParamOutOfRange {
        type_name: &'static str,
        field: &'static str,
        value: f64,
        constraint: &'static str,
    },
}

/// Re-checks the invariants a constructor established. Exposed so callers can
/// re-validate values rebuilt from external bytes.
pub trait Validate {
    fn validate(&self) -> Result<(), ValidationError>;
}

fn check_dims(
    type_name: &'static str,
    width: u32,
    height: u32,
) -> Result<(), ValidationError> {
    if width == 0 {
        return Err(ValidationError::ZeroDimension {
            type_name,
            field: "width",
        });
    }
    if height == 0 {
        return Err(ValidationError::ZeroDimension {
            type_name,
            field: "height",
        });
    }
    Ok(())
}

fn check_len(
    type_name: &'static str,
    field: &'static str,
    expected: usize,
    actual: usize,
) -> Result<(), ValidationError> {
    if expected != actual {
        return Err(ValidationError::BufferLength {
            type_name,
            field,
            expected,
            actual,
        });
    }
    Ok(())
}

fn check_finite(
    type_name: &'static str,
    field: &'static str,
    values: &[f32],
) -> Result<(), ValidationError> {
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() {
            return Err(ValidationError::NonFinite {
                type_name,
                field,
                index,
                value,
            });
        }
    }
    Ok(())
}

fn check_class_count(type_name: &'static str, num_classes: u16) -> Result<(), ValidationError> {
    if num_classes == 0 || num_classes > MAX_CLASSES {
        return Err(ValidationError::ClassCount {
            type_name,
            num_classes,
        });
    }
    Ok(())
}

/// 8-bit RGB raster, interleaved `[r, g, b, r, g, b, ...]` in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRgb {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl ImageRgb {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, ValidationError> {
        let image = ImageRgb {
            width,
            height,
            pixels,
        };
        image.validate()?;
        Ok(image)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Interleaved channel buffer of length `width * height * 3`.
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, row: u32, col: u32) -> [u8; 3] {
        let base = (row as usize * self.width as usize + col as usize) * 3;
        [self.pixels[base], self.pixels[base + 1], self.pixels[base + 2]]
    }
}

impl Validate for ImageRgb {
    fn validate(&self) -> Result<(), ValidationError> {
        check_dims("ImageRgb", self.width, self.height)?;
        check_len(
            "ImageRgb",
            "pixels",
            self.width as usize * self.height as usize * 3,
            self.pixels.len(),
        )
    }
}

/// CIELAB raster, interleaved `[L, a, b, ...]` in row-major order.
///
/// L lies in `[0, 100]`; a and b lie in `[-128, 128]`. Conversions clamp the
/// sub-ulp overshoot that the matrix arithmetic can produce at the gamut edge.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageLab {
    width: u32,
    height: u32,
    pixels: Vec<f32>,
}

impl ImageLab {
    pub fn new(width: u32, height: u32, pixels: Vec<f32>) -> Result<Self, ValidationError> {
        let image = ImageLab {
            width,
            height,
            pixels,
        };
        image.validate()?;
        Ok(image)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Interleaved component buffer of length `width * height * 3`.
    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn pixel(&self, row: u32, col: u32) -> [f32; 3] {
        let base = (row as usize * self.width as usize + col as usize) * 3;
        [self.pixels[base], self.pixels[base + 1], self.pixels[base + 2]]
    }
}

impl Validate for ImageLab {
    fn validate(&self) -> Result<(), ValidationError> {
        check_dims("ImageLab", self.width, self.height)?;
        check_len(
            "ImageLab",
            "pixels",
            self.width as usize * self.height as usize * 3,
            self.pixels.len(),
        )?;
        check_finite("ImageLab", "pixels", &self.pixels)?;
        for (index, chunk) in self.pixels.chunks_exact(3).enumerate() {
            if !(0.0..=100.0).contains(&chunk[0]) {
                return Err(ValidationError::ValueOutOfRange {
                    type_name: "ImageLab",
                    field: "pixels",
                    index: index * 3,
                    value: chunk[0],
                    lo: 0.0,
                    hi: 100.0,
                });
            }
            for off in 1..3 {
                if !(-128.0..=128.0).contains(&chunk[off]) {
                    return Err(ValidationError::ValueOutOfRange {
                        type_name: "ImageLab",
                        field: "pixels",
                        index: index * 3 + off,
                        value: chunk[off],
                        lo: -128.0,
                        hi: 128.0,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Per-pixel class labels with a reserved [`IGNORE_LABEL`] sentinel.
///
/// Every non-ignored label is below `num_classes`, and `num_classes` is at
/// most [`MAX_CLASSES`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    width: u32,
    height: u32,
    labels: Vec<u8>,
    num_classes: u16,
}

impl LabelMask {
    pub fn new(
        width: u32,
        height: u32,
        labels: Vec<u8>,
        num_classes: u16,
    ) -> Result<Self, ValidationError> {
        let mask = LabelMask {
            width,
            height,
            labels,
            num_classes,
        };
        mask.validate()?;
        Ok(mask)
    }

    /// Internal constructor for call sites that establish the invariants
    /// structurally (e.g. argmax output bounded by construction).
    pub(crate) fn from_parts(width: u32, height: u32, labels: Vec<u8>, num_classes: u16) -> Self {
        let mask = LabelMask {
            width,
            height,
            labels,
            num_classes,
        };
        debug_assert!(mask.validate().is_ok());
        mask
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn num_classes(&self) -> u16 {
        self.num_classes
    }

    /// Row-major label buffer of length `width * height`.
    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, row: u32, col: u32) -> u8 {
        self.labels[row as usize * self.width as usize + col as usize]
    }

    /// Same labels under a different class count, re-validated. Used to put
    /// two masks on a common class range before comparing them.
    pub fn with_num_classes(&self, num_classes: u16) -> Result<Self, ValidationError> {
        LabelMask::new(self.width, self.height, self.labels.clone(), num_classes)
    }
}

impl Validate for LabelMask {
    fn validate(&self) -> Result<(), ValidationError> {
        check_dims("LabelMask", self.width, self.height)?;
        check_class_count("LabelMask", self.num_classes)?;
        check_len(
            "LabelMask",
            "labels",
            self.width as usize * self.height as usize,
            self.labels.len(),
        )?;
        for (index, &label) in self.labels.iter().enumerate() {
            if label != IGNORE_LABEL && u16::from(label) >= self.num_classes {
                return Err(ValidationError::LabelOutOfRange {
                    index,
                    label,
                    num_classes: self.num_classes,
                });
            }
        }
        Ok(())
    }
}

/// Total assignment of every pixel to exactly one superpixel id.
///
/// Ids are dense: every id in `0..num_superpixels` owns at least one pixel.
/// Clustering output additionally guarantees 4-connectivity of every id after
/// connectivity enforcement; that property belongs to the producing operation,
/// not to this type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperpixelPartition {
    width: u32,
    height: u32,
    assignments: Vec<u32>,
    num_superpixels: u32,
}

impl SuperpixelPartition {
    pub fn new(
        width: u32,
        height: u32,
        assignments: Vec<u32>,
        num_superpixels: u32,
    ) -> Result<Self, ValidationError> {
        let partition = SuperpixelPartition {
            width,
            height,
            assignments,
            num_superpixels,
        };
        partition.validate()?;
        Ok(partition)
    }

    pub(crate) fn from_parts(
        width: u32,
        height: u32,
        assignments: Vec<u32>,
        num_superpixels: u32,
    ) -> Self {
        let partition = SuperpixelPartition {
            width,
            height,
            assignments,
            num_superpixels,
        };
        debug_assert!(partition.validate().is_ok());
        partition
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn num_superpixels(&self) -> u32 {
        self.num_superpixels
    }

    /// Row-major id buffer of length `width * height`.
    pub fn assignments(&self) -> &[u32] {
        &self.assignments
    }

    pub fn assignment(&self, row: u32, col: u32) -> u32 {
        self.assignments[row as usize * self.width as usize + col as usize]
    }
}

impl Validate for SuperpixelPartition {
    fn validate(&self) -> Result<(), ValidationError> {
        check_dims("SuperpixelPartition", self.width, self.height)?;
        if self.num_superpixels == 0 {
            return Err(ValidationError::ZeroDimension {
                type_name: "SuperpixelPartition",
                field: "num_superpixels",
            });
        }
        check_len(
            "SuperpixelPartition",
            "assignments",
            self.width as usize * self.height as usize,
            self.assignments.len(),
        )?;
        let mut seen = vec![false; self.num_superpixels as usize];
        for (index, &id) in self.assignments.iter().enumerate() {
            if id >= self.num_superpixels {
                return Err(ValidationError::SuperpixelIdOutOfRange {
                    index,
                    id,
                    num_superpixels: self.num_superpixels,
                });
            }
            seen[id as usize] = true;
        }
        for (id, &present) in seen.iter().enumerate() {
            if !present {
                return Err(ValidationError::EmptySuperpixel { id: id as u32 });
            }
        }
        Ok(())
    }
}

/// Stack of spatial activation maps from one network depth, `num_maps`
/// row-major planes of `height x width` finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMapStack {
    depth_id: u32,
    num_maps: u32,
    height: u32,
    width: u32,
    values: Vec<f32>,
}

impl FeatureMapStack {
    pub fn new(
        depth_id: u32,
        num_maps: u32,
        height: u32,
        width: u32,
        values: Vec<f32>,
    ) -> Result<Self, ValidationError> {
        let stack = FeatureMapStack {
            depth_id,
            num_maps,
            height,
            width,
            values,
        };
        stack.validate()?;
        Ok(stack)
    }

    pub fn depth_id(&self) -> u32 {
        self.depth_id
    }

    pub fn num_maps(&self) -> u32 {
        self.num_maps
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// Plane-major buffer of length `num_maps * height * width`.
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Row-major view of one activation map.
    pub fn map(&self, k: u32) -> &[f32] {
        let plane = self.height as usize * self.width as usize;
        let base = k as usize * plane;
        &self.values[base..base + plane]
    }
}

impl Validate for FeatureMapStack {
    fn validate(&self) -> Result<(), ValidationError> {
        check_dims("FeatureMapStack", self.width, self.height)?;
        if self.num_maps == 0 {
            return Err(ValidationError::ZeroDimension {
                type_name: "FeatureMapStack",
                field: "num_maps",
            });
        }
        check_len(
            "FeatureMapStack",
            "values",
            self.num_maps as usize * self.height as usize * self.width as usize,
            self.values.len(),
        )?;
        check_finite("FeatureMapStack", "values", &self.values)
    }
}

/// Linear classifier head: one weight per (class, activation map) pair,
/// row-major `num_classes x num_maps`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierWeights {
    num_classes: u16,
    num_maps: u32,
    weights: Vec<f32>,
}

impl ClassifierWeights {
    pub fn new(
        num_classes: u16,
        num_maps: u32,
        weights: Vec<f32>,
    ) -> Result<Self, ValidationError> {
        let w = ClassifierWeights {
            num_classes,
            num_maps,
            weights,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn num_classes(&self) -> u16 {
        self.num_classes
    }

    pub fn num_maps(&self) -> u32 {
        self.num_maps
    }

    /// Row-major buffer of length `num_classes * num_maps`.
    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    /// Weight row for one class.
    pub fn class_weights(&self, class: u16) -> &[f32] {
        let base = class as usize * self.num_maps as usize;
        &self.weights[base..base + self.num_maps as usize]
    }
}

impl Validate for ClassifierWeights {
    fn validate(&self) -> Result<(), ValidationError> {
        check_class_count("ClassifierWeights", self.num_classes)?;
        if self.num_maps == 0 {
            return Err(ValidationError::ZeroDimension {
                type_name: "ClassifierWeights",
                field: "num_maps",
            });
        }
        check_len(
            "ClassifierWeights",
            "weights",
            self.num_classes as usize * self.num_maps as usize,
            self.weights.len(),
        )?;
        check_finite("ClassifierWeights", "weights", &self.weights)
    }
}

/// Per-class activation scores, `num_classes` row-major planes of
/// `height x width` finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    num_classes: u16,
    height: u32,
    width: u32,
    scores: Vec<f32>,
}

impl ScoreMap {
    pub fn new(
        num_classes: u16,
        height: u32,
        width: u32,
        scores: Vec<f32>,
    ) -> Result<Self, ValidationError> {
        let map = ScoreMap {
            num_classes,
            height,
            width,
            scores,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn num_classes(&self) -> u16 {
        self.num_classes
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// Plane-major buffer of length `num_classes * height * width`.
    pub fn scores(&self) -> &[f32] {
        &self.scores
    }

    /// Row-major view of one class plane.
    pub fn class_plane(&self, class: u16) -> &[f32] {
        let plane = self.height as usize * self.width as usize;
        let base = class as usize * plane;
        &self.scores[base..base + plane]
    }
}

impl Validate for ScoreMap {
    fn validate(&self) -> Result<(), ValidationError> {
        check_dims("ScoreMap", self.width, self.height)?;
        check_class_count("ScoreMap", self.num_classes)?;
        check_len(
            "ScoreMap",
            "scores",
            self.num_classes as usize * self.height as usize * self.width as usize,
            self.scores.len(),
        )?;
        check_finite("ScoreMap", "scores", &self.scores)
    }
}

/// Per-class probabilities, `num_classes` row-major planes of `height x width`
/// values in `[0, 1]` whose per-pixel class vector sums to 1 within 1e-6.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    num_classes: u16,
    height: u32,
    width: u32,
    probs: Vec<f32>,
}

impl ProbabilityMap {
    pub fn new(
        num_classes: u16,
        height: u32,
        width: u32,
        probs: Vec<f32>,
    ) -> Result<Self, ValidationError> {
        let map = ProbabilityMap {
            num_classes,
            height,
            width,
            probs,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn num_classes(&self) -> u16 {
        self.num_classes
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// Plane-major buffer of length `num_classes * height * width`.
    pub fn probs(&self) -> &[f32] {
        &self.probs
    }

    /// Row-major view of one class plane.
    pub fn class_plane(&self, class: u16) -> &[f32] {
        let plane = self.height as usize * self.width as usize;
        let base = class as usize * plane;
        &self.probs[base..base + plane]
    }

    /// Probability of `class` at pixel `(row, col)`.
    pub fn prob(&self, class: u16, row: u32, col: u32) -> f32 {
        let plane = self.height as usize * self.width as usize;
        self.probs
            [class as usize * plane + row as usize * self.width as usize + col as usize]
    }
}

impl Validate for ProbabilityMap {
    fn validate(&self) -> Result<(), ValidationError> {
        check_dims("ProbabilityMap", self.width, self.height)?;
        check_class_count("ProbabilityMap", self.num_classes)?;
        let plane = self.height as usize * self.width as usize;
        check_len(
            "ProbabilityMap",
            "probs",
            self.num_classes as usize * plane,
            self.probs.len(),
        )?;
        check_finite("ProbabilityMap", "probs", &self.probs)?;
        for (index, &value) in self.probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(ValidationError::ValueOutOfRange {
                    type_name: "ProbabilityMap",
                    field: "probs",
                    index,
                    value,
                    lo: 0.0,
                    hi: 1.0,
                });
            }
        }
        for pixel in 0..plane {
            let mut sum = 0.0f32;
            for class in 0..self.num_classes as usize {
                sum += self.probs[class * plane + pixel];
            }
            if (sum - 1.0).abs() > 1e-6 {
                return Err(ValidationError::NotNormalized { index: pixel, sum });
            }
        }
        Ok(())
    }
}
