//! On-disk formats: 8-bit mask PNGs, 16-bit partition PNGs with a text
//! sidecar, and the SPXT tensor container.
//!
//! # SPXT tensor layout
//!
//! ```text
//! offset 0   4 bytes   magic "SPXT" (0x53 0x50 0x58 0x54)
//! offset 4   1 byte    format version, currently 1
//! offset 5   1 byte    number of dimensions d (1..=8)
//! offset 6   4d bytes  dimensions, each u32 little-endian
//! then                 product-of-dims f32 values, little-endian,
//!                      row-major (last dimension fastest)
//! ```
//!
//! Feature stacks and class planes are stored 3-D as `[planes, height,
//! width]`; classifier weights are 2-D `[classes, maps]`.
//!
//! Label masks are single-channel 8-bit PNGs whose pixel value is the class
//! index, with 255 reserved for ignored pixels. Partitions are
//! single-channel 16-bit PNGs of superpixel ids (capping ids at 65,535)
//! accompanied by a `<file>.txt` sidecar holding the id count and the
//! clustering parameters as `key = value` lines.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma, Rgb};
use supix_core::slic::SlicParams;
use supix_core::types::{
    ClassifierWeights, FeatureMapStack, ImageRgb, LabelMask, ProbabilityMap, ScoreMap,
    SuperpixelPartition, ValidationError, IGNORE_LABEL,
};
use thiserror::Error;

pub const TENSOR_MAGIC: [u8; 4] = *b"SPXT";
pub const TENSOR_VERSION: u8 = 1;
const TENSOR_MAX_DIMS: usize = 8;
const TENSOR_MAX_ELEMENTS: u64 = 1 << 30;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Malformed { path: PathBuf, detail: String },
    #[error("{path}: {source}")]
    Invalid {
        path: PathBuf,
        source: ValidationError,
    },
}

impl FormatError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        FormatError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn malformed(path: &Path, detail: impl Into<String>) -> Self {
        FormatError::Malformed {
            path: path.to_path_buf(),
            detail: detail.into(),
        }
    }

    fn invalid(path: &Path, source: ValidationError) -> Self {
        FormatError::Invalid {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Failed saves are I/O errors when the underlying cause is one (bad
    /// directory, full disk), encoding problems otherwise.
    fn save(path: &Path, source: image::ImageError) -> Self {
        match source {
            image::ImageError::IoError(io) => FormatError::io(path, io),
            other => FormatError::malformed(path, other.to_string()),
        }
    }
}

/// Reads an 8-bit RGB image; single-channel 8-bit files are expanded to
/// gray RGB. Other pixel formats are rejected rather than quantized.
pub fn read_rgb_image(path: &Path) -> Result<ImageRgb, FormatError> {
    let decoded = image::open(path).map_err(|e| FormatError::malformed(path, e.to_string()))?;
    let rgb = match decoded {
        DynamicImage::ImageRgb8(img) => img,
        DynamicImage::ImageLuma8(img) => DynamicImage::ImageLuma8(img).to_rgb8(),
        other => {
            return Err(FormatError::malformed(
                path,
                format!("expected 8-bit RGB or grayscale pixels, found {other:?}"),
            ))
        }
    };
    let (width, height) = rgb.dimensions();
    ImageRgb::new(width, height, rgb.into_raw()).map_err(|e| FormatError::invalid(path, e))
}

pub fn write_rgb_image(path: &Path, image: &ImageRgb) -> Result<(), FormatError> {
    let buffer: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_raw(image.width(), image.height(), image.pixels().to_vec())
            .expect("buffer length is validated by ImageRgb");
    buffer
        .save(path)
        .map_err(|e| FormatError::save(path, e))
}

/// Reads a label mask from an 8-bit single-channel PNG. When `num_classes`
/// is `None` the class count is inferred as the highest non-ignored label
/// plus one (at least 1).
pub fn read_label_mask(path: &Path, num_classes: Option<u16>) -> Result<LabelMask, FormatError> {
    let decoded = image::open(path).map_err(|e| FormatError::malformed(path, e.to_string()))?;
    let DynamicImage::ImageLuma8(img) = decoded else {
        return Err(FormatError::malformed(
            path,
            "expected an 8-bit single-channel image",
        ));
    };
    let (width, height) = img.dimensions();
    let labels = img.into_raw();
    let k = num_classes.unwrap_or_else(|| {
        labels
            .iter()
            .filter(|&&l| l != IGNORE_LABEL)
            .map(|&l| l as u16 + 1)
            .max()
            .unwrap_or(1)
    });
    LabelMask::new(width, height, labels, k).map_err(|e| FormatError::invalid(path, e))
}

pub fn write_label_mask(path: &Path, mask: &LabelMask) -> Result<(), FormatError> {
    let buffer: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(mask.width(), mask.height(), mask.labels().to_vec())
            .expect("buffer length is validated by LabelMask");
    buffer
        .save(path)
        .map_err(|e| FormatError::save(path, e))
}

/// Sidecar file accompanying a partition PNG: the same path with `.txt`
/// appended.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".txt");
    PathBuf::from(os)
}

pub fn write_partition(
    path: &Path,
    partition: &SuperpixelPartition,
    params: &SlicParams,
) -> Result<(), FormatError> {
    if partition.num_superpixels() > u16::MAX as u32 {
        return Err(FormatError::malformed(
            path,
            format!(
                "{} superpixel ids exceed the 16-bit cap of 65535",
                partition.num_superpixels()
            ),
        ));
    }
    let ids: Vec<u16> = partition.assignments().iter().map(|&id| id as u16).collect();
    let buffer: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(partition.width(), partition.height(), ids)
            .expect("buffer length is validated by SuperpixelPartition");
    buffer
        .save(path)
        .map_err(|e| FormatError::save(path, e))?;

    let sidecar = sidecar_path(path);
    let text = format!(
        "num_superpixels = {}\nwidth = {}\nheight = {}\ncluster_size = {}\ncompactness = {}\nmax_iterations = {}\nmin_region_fraction = {}\n",
        partition.num_superpixels(),
        partition.width(),
        partition.height(),
        params.cluster_size,
        params.compactness,
        params.max_iterations,
        params.min_region_fraction,
    );
    fs::write(&sidecar, text).map_err(|e| FormatError::io(&sidecar, e))
}

pub fn read_partition(path: &Path) -> Result<(SuperpixelPartition, SlicParams), FormatError> {
    let decoded = image::open(path).map_err(|e| FormatError::malformed(path, e.to_string()))?;
    let DynamicImage::ImageLuma16(img) = decoded else {
        return Err(FormatError::malformed(
            path,
            "expected a 16-bit single-channel image",
        ));
    };
    let (width, height) = img.dimensions();
    let assignments: Vec<u32> = img.into_raw().into_iter().map(u32::from).collect();

    let sidecar = sidecar_path(path);
    let text = fs::read_to_string(&sidecar).map_err(|e| FormatError::io(&sidecar, e))?;
    let mut num_superpixels: Option<u32> = None;
    let mut params = SlicParams::default();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(FormatError::malformed(
                &sidecar,
                format!("line {}: expected `key = value`", line_no + 1),
            ));
        };
        let (key, value) = (key.trim(), value.trim());
        let parse_err = |what: &str| {
            FormatError::malformed(
                &sidecar,
                format!("line {}: cannot parse {key} as {what}", line_no + 1),
            )
        };
        match key {
            "num_superpixels" => {
                num_superpixels = Some(value.parse().map_err(|_| parse_err("an integer"))?)
            }
            "width" | "height" => {
                let dim: u32 = value.parse().map_err(|_| parse_err("an integer"))?;
                let actual = if key == "width" { width } else { height };
                if dim != actual {
                    return Err(FormatError::malformed(
                        &sidecar,
                        format!("{key} {dim} does not match the image's {actual}"),
                    ));
                }
            }
            "cluster_size" => {
                params.cluster_size = value.parse().map_err(|_| parse_err("an integer"))?
            }
            "compactness" => {
                params.compactness = value.parse().map_err(|_| parse_err("a number"))?
            }
            "max_iterations" => {
                params.max_iterations = value.parse().map_err(|_| parse_err("an integer"))?
            }
            "min_region_fraction" => {
                params.min_region_fraction = value.parse().map_err(|_| parse_err("a number"))?
            }
            other => {
                return Err(FormatError::malformed(
                    &sidecar,
                    format!("line {}: unknown key `{other}`", line_no + 1),
                ))
            }
        }
    }
    let Some(n) = num_superpixels else {
        return Err(FormatError::malformed(&sidecar, "missing num_superpixels"));
    };
    let partition = SuperpixelPartition::new(width, height, assignments, n)
        .map_err(|e| FormatError::invalid(path, e))?;
    Ok((partition, params))
}

pub fn write_tensor(path: &Path, dims: &[u32], values: &[f32]) -> Result<(), FormatError> {
    assert!(
        !dims.is_empty() && dims.len() <= TENSOR_MAX_DIMS,
        "tensor rank out of range"
    );
    let expected: u64 = dims.iter().map(|&d| d as u64).product();
    assert_eq!(expected, values.len() as u64, "dims do not match the buffer");

    let mut bytes = Vec::with_capacity(6 + 4 * dims.len() + 4 * values.len());
    bytes.extend_from_slice(&TENSOR_MAGIC);
    bytes.push(TENSOR_VERSION);
    bytes.push(dims.len() as u8);
    for &d in dims {
        bytes.extend_from_slice(&d.to_le_bytes());
    }
    for &v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| FormatError::io(path, e))
}

pub fn read_tensor(path: &Path) -> Result<(Vec<u32>, Vec<f32>), FormatError> {
    let mut file = fs::File::open(path).map_err(|e| FormatError::io(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)
        .map_err(|e| FormatError::io(path, e))?;

    if bytes.len() < 6 {
        return Err(FormatError::malformed(path, "truncated tensor header"));
    }
    if bytes[0..4] != TENSOR_MAGIC {
        return Err(FormatError::malformed(path, "bad magic, expected \"SPXT\""));
    }
    if bytes[4] != TENSOR_VERSION {
        return Err(FormatError::malformed(
            path,
            format!("unsupported version {}, expected {TENSOR_VERSION}", bytes[4]),
        ));
    }
    let ndim = bytes[5] as usize;
    if ndim == 0 || ndim > TENSOR_MAX_DIMS {
        return Err(FormatError::malformed(
            path,
            format!("dimensionality {ndim} outside 1..={TENSOR_MAX_DIMS}"),
        ));
    }
    let header = 6 + 4 * ndim;
    if bytes.len() < header {
        return Err(FormatError::malformed(path, "truncated dimension list"));
    }
    let mut dims = Vec::with_capacity(ndim);
    for i in 0..ndim {
        let off = 6 + 4 * i;
        dims.push(u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()));
    }
    let count: u64 = dims.iter().map(|&d| d as u64).product();
    if count > TENSOR_MAX_ELEMENTS {
        return Err(FormatError::malformed(
            path,
            format!("{count} elements exceed the reader cap of {TENSOR_MAX_ELEMENTS}"),
        ));
    }
    let expected_len = header as u64 + 4 * count;
    if bytes.len() as u64 != expected_len {
        return Err(FormatError::malformed(
            path,
            format!(
                "payload is {} bytes, dims {dims:?} require {expected_len}",
                bytes.len()
            ),
        ));
    }
    let mut values = Vec::with_capacity(count as usize);
    for chunk in bytes[header..].chunks_exact(4) {
        values.push(f32::from_le_bytes(chunk.try_into().unwrap()));
    }
    Ok((dims, values))
}

fn expect_rank(path: &Path, dims: &[u32], rank: usize, what: &str) -> Result<(), FormatError> {
    if dims.len() != rank {
        return Err(FormatError::malformed(
            path,
            format!("{what} must be {rank}-dimensional, found dims {dims:?}"),
        ));
    }
    Ok(())
}

/// Reads a `[maps, height, width]` tensor as a feature stack; `depth_id`
/// records the stack's position in the caller's depth ordering.
pub fn read_feature_stack(path: &Path, depth_id: u32) -> Result<FeatureMapStack, FormatError> {
    let (dims, values) = read_tensor(path)?;
    expect_rank(path, &dims, 3, "a feature stack")?;
    FeatureMapStack::new(depth_id, dims[0], dims[1], dims[2], values)
        .map_err(|e| FormatError::invalid(path, e))
}

pub fn write_feature_stack(path: &Path, stack: &FeatureMapStack) -> Result<(), FormatError> {
    write_tensor(
        path,
        &[stack.num_maps(), stack.height(), stack.width()],
        stack.values(),
    )
}

/// Reads a `[classes, maps]` tensor as classifier weights.
pub fn read_classifier_weights(path: &Path) -> Result<ClassifierWeights, FormatError> {
    let (dims, values) = read_tensor(path)?;
    expect_rank(path, &dims, 2, "classifier weights")?;
    let classes: u16 = dims[0]
        .try_into()
        .map_err(|_| FormatError::malformed(path, format!("{} classes exceed 255", dims[0])))?;
    ClassifierWeights::new(classes, dims[1], values).map_err(|e| FormatError::invalid(path, e))
}

pub fn write_classifier_weights(
    path: &Path,
    weights: &ClassifierWeights,
) -> Result<(), FormatError> {
    write_tensor(
        path,
        &[weights.num_classes() as u32, weights.num_maps()],
        weights.weights(),
    )
}

/// Reads a `[classes, height, width]` tensor as a probability map.
pub fn read_probability_map(path: &Path) -> Result<ProbabilityMap, FormatError> {
    let (dims, values) = read_tensor(path)?;
    expect_rank(path, &dims, 3, "a probability map")?;
    let classes: u16 = dims[0]
        .try_into()
        .map_err(|_| FormatError::malformed(path, format!("{} classes exceed 255", dims[0])))?;
    ProbabilityMap::new(classes, dims[1], dims[2], values)
        .map_err(|e| FormatError::invalid(path, e))
}

pub fn write_probability_map(path: &Path, probs: &ProbabilityMap) -> Result<(), FormatError> {
    write_tensor(
        path,
        &[probs.num_classes() as u32, probs.height(), probs.width()],
        probs.probs(),
    )
}

pub fn write_score_map(path: &Path, scores: &ScoreMap) -> Result<(), FormatError> {
    write_tensor(
        path,
        &[scores.num_classes() as u32, scores.height(), scores.width()],
        scores.scores(),
    )
}
