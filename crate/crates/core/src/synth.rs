//! Deterministic synthetic fixtures: Voronoi label masks with matching
//! color images, plus label-noise corruption.
//!
//! # Random number generation
//!
//! All randomness is counter-based so any pixel can be generated
//! independently and the output is reproducible across implementations and
//! languages. A draw is addressed by `(seed, stream, counter)` and produced
//! by a 64-bit xorshift-multiply finalizer (the SplitMix64 mixer) over a
//! linear combination of the address, all in wrapping arithmetic:
//!
//! ```text
//! z = seed + stream * 0x9E3779B97F4A7C15 + counter * 0xD1B54A32D192ED03
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! output = z ^ (z >> 31)
//! ```
//!
//! A uniform double in `[0, 1)` keeps the top 53 bits:
//! `(output >> 11) * 2^-53`. The streams used here are [`STREAM_SITES`],
//! [`STREAM_SITE_CLASS`], [`STREAM_SITE_COLOR`], [`STREAM_JITTER`], and
//! [`STREAM_CORRUPT`]; counters within each stream are documented on the
//! functions that draw from them.

use crate::types::{ImageRgb, LabelMask, ValidationError, Validate, IGNORE_LABEL, MAX_CLASSES};
use thiserror::Error;

pub const STREAM_SITES: u64 = 1;
pub const STREAM_SITE_CLASS: u64 = 2;
pub const STREAM_SITE_COLOR: u64 = 3;
pub const STREAM_JITTER: u64 = 4;
pub const STREAM_CORRUPT: u64 = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("num_sites {num_sites} is below num_classes {num_classes}, cannot give every class a cell")]
    TooFewSites { num_sites: u32, num_classes: u16 },
    #[error("invalid fixture parameters: {0}")]
    InvalidParams(#[from] ValidationError),
}

/// Fixture shape: a `width x height` Voronoi partition of `num_sites` cells
/// over `num_classes` classes, rendered with per-cell base colors and
/// per-pixel RGB jitter of amplitude `color_jitter`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub width: u32,
    pub height: u32,
    pub num_classes: u16,
    pub num_sites: u32,
    /// Probability that [`corrupt`] flips a pixel; kept below 0.5 so the
    /// original label stays the per-pixel majority.
    pub noise_rate: f32,
    pub color_jitter: u8,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            width: 128,
            height: 128,
            num_classes: 4,
            num_sites: 12,
            noise_rate: 0.15,
            color_jitter: 6,
            seed: 1,
        }
    }
}

impl Validate for SynthParams {
    fn validate(&self) -> Result<(), ValidationError> {
        if self.width == 0 {
            return Err(ValidationError::ZeroDimension {
                type_name: "SynthParams",
                field: "width",
            });
        }
        if self.height == 0 {
            return Err(ValidationError::ZeroDimension {
                type_name: "SynthParams",
                field: "height",
            });
        }
        if self.num_classes < 2 || self.num_classes > MAX_CLASSES {
            return Err(ValidationError::ParamOutOfRange {
                type_name: "SynthParams",
                field: "num_classes",
                value: self.num_classes as f64,
                constraint: "must lie in 2..=255",
            });
        }
        if self.num_sites == 0 {
            return Err(ValidationError::ZeroDimension {
                type_name: "SynthParams",
                field: "num_sites",
            });
        }
        if !self.noise_rate.is_finite() || self.noise_rate < 0.0 || self.noise_rate >= 0.5 {
            return Err(ValidationError::ParamOutOfRange {
                type_name: "SynthParams",
                field: "noise_rate",
                value: self.noise_rate as f64,
                constraint: "must lie in [0, 0.5)",
            });
        }
        Ok(())
    }
}

/// One draw of the counter-based generator described in the module docs.
pub fn mix(seed: u64, stream: u64, counter: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E3779B97F4A7C15))
        .wrapping_add(counter.wrapping_mul(0xD1B54A32D192ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Uniform double in `[0, 1)` from the top 53 bits of a draw.
pub fn unit_f64(draw: u64) -> f64 {
    (draw >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

struct Site {
    x: f64,
    y: f64,
    class: u8,
    color: [u8; 3],
}

/// Generates a fixture: the ground-truth Voronoi label mask and a matching
/// RGB image.
///
/// Site `i` draws its position from `STREAM_SITES` counters `2i` (x) and
/// `2i + 1` (y), scaled to the image extent. The first `num_classes` sites
/// take classes `0, 1, ...` so every class owns a cell; later sites draw a
/// class from `STREAM_SITE_CLASS` counter `i`. Every pixel's label is the
/// class of its nearest site by squared Euclidean distance on integer pixel
/// coordinates, ties resolving to the lowest site index. The image renders
/// each cell in its site's base color, with each channel of pixel `p`
/// jittered by an integer in `[-color_jitter, color_jitter]` drawn from
/// `STREAM_JITTER` counter `3p + channel`.
pub fn generate(params: &SynthParams) -> Result<(ImageRgb, LabelMask), SynthError> {
    params.validate()?;
    if params.num_sites < params.num_classes as u32 {
        return Err(SynthError::TooFewSites {
            num_sites: params.num_sites,
            num_classes: params.num_classes,
        });
    }
    let sites = place_sites(params);
    let width = params.width as usize;
    let height = params.height as usize;

    let mut labels = vec![0u8; width * height];
    let mut pixels = vec![0u8; width * height * 3];
    for y in 0..height {
        for x in 0..width {
            let pixel = y * width + x;
            let site = &sites[nearest_site(&sites, x as f64, y as f64)];
            labels[pixel] = site.class;
            for channel in 0..3 {
                let amp = params.color_jitter as i64;
                let draw = mix(
                    params.seed,
                    STREAM_JITTER,
                    (pixel as u64) * 3 + channel as u64,
                );
                let offset = (unit_f64(draw) * (2 * amp + 1) as f64) as i64 - amp;
                let value = site.color[channel] as i64 + offset;
                pixels[pixel * 3 + channel] = value.clamp(0, 255) as u8;
            }
        }
    }

    let image = ImageRgb::new(params.width, params.height, pixels)
        .expect("pixel buffer sized from the validated dimensions");
    let mask = LabelMask::new(params.width, params.height, labels, params.num_classes)
        .expect("site classes are below num_classes by construction");
    Ok((image, mask))
}

fn place_sites(params: &SynthParams) -> Vec<Site> {
    let k = params.num_classes as u32;
    let mut sites: Vec<Site> = Vec::with_capacity(params.num_sites as usize);
    for i in 0..params.num_sites {
        let x = unit_f64(mix(params.seed, STREAM_SITES, 2 * i as u64)) * params.width as f64;
        let y = unit_f64(mix(params.seed, STREAM_SITES, 2 * i as u64 + 1)) * params.height as f64;
        let class = if i < k {
            i as u8
        } else {
            let draw = unit_f64(mix(params.seed, STREAM_SITE_CLASS, i as u64));
            ((draw * k as f64) as u32).min(k - 1) as u8
        };
        let color = pick_distinct_color(params.seed, i, &sites);
        sites.push(Site { x, y, class, color });
    }
    sites
}

/// Base color for site `i`: draws from `STREAM_SITE_COLOR` counter
/// `i * 4096 + attempt`, rejecting candidates closer than a Chebyshev
/// distance of 16 to any earlier color (the bar halves every 32 attempts but
/// never drops below 1, so colors stay pairwise distinct).
fn pick_distinct_color(seed: u64, site: u32, earlier: &[Site]) -> [u8; 3] {
    let mut candidate = [0u8; 3];
    for attempt in 0u64..4096 {
        let draw = mix(seed, STREAM_SITE_COLOR, site as u64 * 4096 + attempt);
        candidate = [
            (draw & 0xFF) as u8,
            ((draw >> 8) & 0xFF) as u8,
            ((draw >> 16) & 0xFF) as u8,
        ];
        let bar = (16u32 >> (attempt / 32)).max(1);
        let clear = earlier.iter().all(|s| {
            let d = (0..3)
                .map(|c| (s.color[c] as i32 - candidate[c] as i32).unsigned_abs())
                .max()
                .unwrap();
            d >= bar
        });
        if clear {
            return candidate;
        }
    }
    candidate
}

fn nearest_site(sites: &[Site], x: f64, y: f64) -> usize {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (i, site) in sites.iter().enumerate() {
        let dx = x - site.x;
        let dy = y - site.y;
        let d = dx * dx + dy * dy;
        // Strict comparison keeps the lowest site index on ties.
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Flips each non-ignored pixel, independently with probability
/// `noise_rate`, to a uniformly random *other* class.
///
/// Pixel `p` draws its flip decision from `STREAM_CORRUPT` counter `2p` and,
/// when flipped, its replacement class from counter `2p + 1`: the new label
/// is `(old + 1 + floor(u * (K - 1))) mod K`. Ignored pixels and single-class
/// masks pass through unchanged. The rate is used as given; values at or
/// above 1 flip every pixel.
pub fn corrupt(mask: &LabelMask, noise_rate: f32, seed: u64) -> LabelMask {
    let k = mask.num_classes();
    if k <= 1 {
        return mask.clone();
    }
    let rate = noise_rate as f64;
    let mut labels = Vec::with_capacity(mask.labels().len());
    for (pixel, &label) in mask.labels().iter().enumerate() {
        if label == IGNORE_LABEL {
            labels.push(label);
            continue;
        }
        let flip = unit_f64(mix(seed, STREAM_CORRUPT, 2 * pixel as u64));
        if flip < rate {
            let u = unit_f64(mix(seed, STREAM_CORRUPT, 2 * pixel as u64 + 1));
            let offset = 1 + ((u * (k - 1) as f64) as u16).min(k - 2);
            labels.push(((label as u16 + offset) % k) as u8);
        } else {
            labels.push(label);
        }
    }
    LabelMask::from_parts(mask.width(), mask.height(), labels, k)
}
