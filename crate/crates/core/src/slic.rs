//! SLIC superpixel clustering over joint position/color space.
//!
//! Pixels are clustered by localized k-means in (x, y, L, a, b). The distance
//! between a pixel and a cluster center is
//!
//! ```text
//! D = sqrt((dx / S)^2 + (dy / S)^2 + (dLab / m)^2)
//! ```
//!
//! with `S` the target cluster size, `m` the compactness weight, and `dLab`
//! the Euclidean distance in CIELAB. Each pixel only competes among centers
//! whose 2S x 2S window covers it, which keeps the cost linear in the pixel
//! count. All arithmetic runs in f64 and every reduction has a fixed order,
//! so results are bit-identical across runs and thread counts.

use crate::types::{ImageLab, ImageRgb, SuperpixelPartition, ValidationError, Validate};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SlicError {
    #[error("invalid clustering parameters: {0}")]
    InvalidParams(#[from] ValidationError),
}

/// Clustering knobs. `cluster_size` is the target superpixel edge length
/// in pixels; `compactness` trades spatial against color proximity (larger
/// values give squarer superpixels).
#[derive(Debug, Clone, PartialEq)]
pub struct SlicParams {
    pub cluster_size: u32,
    pub compactness: f32,
    pub max_iterations: u32,
    /// Connected components smaller than `min_region_fraction * cluster_size^2`
    /// pixels are merged into their largest 4-adjacent neighbor.
    pub min_region_fraction: f32,
}

impl Default for SlicParams {
    fn default() -> Self {
        SlicParams {
            cluster_size: 16,
            compactness: 10.0,
            max_iterations: 10,
            min_region_fraction: 0.25,
        }
    }
}

impl Validate for SlicParams {
    fn validate(&self) -> Result<(), ValidationError> {
        if self.cluster_size < 2 {
            return Err(ValidationError::ParamOutOfRange {
                type_name: "SlicParams",
                field: "cluster_size",
                value: self.cluster_size as f64,
                constraint: "must be >= 2",
            });
        }
        if !self.compactness.is_finite() || self.compactness <= 0.0 {
            return Err(ValidationError::ParamOutOfRange {
                type_name: "SlicParams",
                field: "compactness",
                value: self.compactness as f64,
                constraint: "must be finite and > 0",
            });
        }
        if self.max_iterations < 1 {
            return Err(ValidationError::ParamOutOfRange {
                type_name: "SlicParams",
                field: "max_iterations",
                value: self.max_iterations as f64,
                constraint: "must be >= 1",
            });
        }
        if !self.min_region_fraction.is_finite()
            || self.min_region_fraction <= 0.0
            || self.min_region_fraction >= 1.0
        {
            return Err(ValidationError::ParamOutOfRange {
                type_name: "SlicParams",
                field: "min_region_fraction",
                value: self.min_region_fraction as f64,
                constraint: "must lie strictly between 0 and 1",
            });
        }
        Ok(())
    }
}

// sRGB D65 reference white and CIE thresholds, kept as exact rationals.
const WHITE_X: f64 = 0.95047;
const WHITE_Y: f64 = 1.0;
const WHITE_Z: f64 = 1.08883;
const LAB_EPS: f64 = 216.0 / 24389.0;
const LAB_KAPPA: f64 = 24389.0 / 27.0;

fn srgb_decode(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    if t > LAB_EPS {
        t.cbrt()
    } else {
        (LAB_KAPPA * t + 16.0) / 116.0
    }
}

/// sRGB (D65) to CIELAB, computed per pixel in f64.
///
/// L is clamped to [0, 100] and a, b to [-128, 128]; the clamp only removes
/// the sub-ulp overshoot of the matrix arithmetic at the gamut edge.
pub fn rgb_to_lab(image: &ImageRgb) -> ImageLab {
    let mut out = Vec::with_capacity(image.pixels().len());
    for rgb in image.pixels().chunks_exact(3) {
        let r = srgb_decode(rgb[0] as f64 / 255.0);
        let g = srgb_decode(rgb[1] as f64 / 255.0);
        let b = srgb_decode(rgb[2] as f64 / 255.0);

        let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
        let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
        let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;

        let fx = lab_f(x / WHITE_X);
        let fy = lab_f(y / WHITE_Y);
        let fz = lab_f(z / WHITE_Z);

        let l = (116.0 * fy - 16.0).clamp(0.0, 100.0);
        let a = (500.0 * (fx - fy)).clamp(-128.0, 128.0);
        let bb = (200.0 * (fy - fz)).clamp(-128.0, 128.0);
        out.push(l as f32);
        out.push(a as f32);
        out.push(bb as f32);
    }
    ImageLab::new(image.width(), image.height(), out)
        .expect("conversion output is clamped into the Lab bounds")
}

/// Thread count used by [`segment`]: the `SUPIX_THREADS` environment variable
/// when set to a positive integer, otherwise the machine's available
/// parallelism. Results never depend on this value.
pub fn max_threads() -> usize {
    if let Ok(raw) = std::env::var("SUPIX_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            if n >= 1 {
                return n;
            }
        }
    }
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

#[derive(Clone, Copy)]
struct Center {
    x: f64,
    y: f64,
    l: f64,
    a: f64,
    b: f64,
}

/// Clusters `image` into superpixels; output has passed
/// [`enforce_connectivity`]. Parallelism follows [`max_threads`].
pub fn segment(image: &ImageLab, params: &SlicParams) -> Result<SuperpixelPartition, SlicError> {
    segment_with_threads(image, params, max_threads())
}

/// [`segment`] with an explicit worker count. The partition is bit-identical
/// for every `threads >= 1`: pixels are assigned independently and center
/// updates accumulate in raster order.
pub fn segment_with_threads(
    image: &ImageLab,
    params: &SlicParams,
    threads: usize,
) -> Result<SuperpixelPartition, SlicError> {
    params.validate()?;
    let width = image.width() as usize;
    let height = image.height() as usize;
    let s = params.cluster_size as usize;

    let mut centers = init_centers(image, s);
    let mut assignments = vec![0u32; width * height];

    for _ in 0..params.max_iterations {
        assign_pixels(image, &centers, params, threads.max(1), &mut assignments);
        update_centers(image, &assignments, &mut centers);
    }

    Ok(enforce_connectivity_raw(
        &assignments,
        image.width(),
        image.height(),
        params,
    ))
}

/// Grid count along one axis: round(dim / s), at least 1. Images smaller than
/// one cluster fall back to a single center.
fn grid_count(dim: usize, s: usize) -> usize {
    ((2 * dim + s) / (2 * s)).max(1)
}

/// Gradient used for center perturbation: squared Lab difference to the right
/// neighbor plus squared Lab difference to the down neighbor. A missing
/// neighbor (image border) contributes zero.
fn gradient_at(image: &ImageLab, x: usize, y: usize) -> f64 {
    let width = image.width() as usize;
    let height = image.height() as usize;
    let px = image.pixel(y as u32, x as u32);
    let mut g = 0.0f64;
    if x + 1 < width {
        let r = image.pixel(y as u32, (x + 1) as u32);
        for c in 0..3 {
            let d = r[c] as f64 - px[c] as f64;
            g += d * d;
        }
    }
    if y + 1 < height {
        let d0 = image.pixel((y + 1) as u32, x as u32);
        for c in 0..3 {
            let d = d0[c] as f64 - px[c] as f64;
            g += d * d;
        }
    }
    g
}

fn init_centers(image: &ImageLab, s: usize) -> Vec<Center> {
    let width = image.width() as usize;
    let height = image.height() as usize;
    let nx = grid_count(width, s);
    let ny = grid_count(height, s);
    let spacing_x = width as f64 / nx as f64;
    let spacing_y = height as f64 / ny as f64;

    let mut centers = Vec::with_capacity(nx * ny);
    for gy in 0..ny {
        for gx in 0..nx {
            let cx = (gx as f64 + 0.5) * spacing_x - 0.5;
            let cy = (gy as f64 + 0.5) * spacing_y - 0.5;
            let seed_x = (cx.round().max(0.0) as usize).min(width - 1);
            let seed_y = (cy.round().max(0.0) as usize).min(height - 1);

            // Move the seed to the lowest-gradient pixel in its 3x3
            // neighborhood; ties keep the first candidate in raster order.
            let mut best = (seed_x, seed_y);
            let mut best_grad = f64::INFINITY;
            for ny_off in seed_y.saturating_sub(1)..=(seed_y + 1).min(height - 1) {
                for nx_off in seed_x.saturating_sub(1)..=(seed_x + 1).min(width - 1) {
                    let g = gradient_at(image, nx_off, ny_off);
                    if g < best_grad {
                        best_grad = g;
                        best = (nx_off, ny_off);
                    }
                }
            }
            let lab = image.pixel(best.1 as u32, best.0 as u32);
            centers.push(Center {
                x: best.0 as f64,
                y: best.1 as f64,
                l: lab[0] as f64,
                a: lab[1] as f64,
                b: lab[2] as f64,
            });
        }
    }
    centers
}

/// Buckets center indices by cell of size `s` so each pixel only inspects the
/// 3x3 cells around it; that superset covers every center whose 2S x 2S
/// window contains the pixel.
fn bucket_centers(centers: &[Center], s: usize, width: usize, height: usize) -> (Vec<Vec<u32>>, usize, usize) {
    let bw = width.div_ceil(s);
    let bh = height.div_ceil(s);
    let mut buckets = vec![Vec::new(); bw * bh];
    for (id, c) in centers.iter().enumerate() {
        let bx = ((c.x.max(0.0) as usize) / s).min(bw - 1);
        let by = ((c.y.max(0.0) as usize) / s).min(bh - 1);
        buckets[by * bw + bx].push(id as u32);
    }
    (buckets, bw, bh)
}

fn assign_pixels(
    image: &ImageLab,
    centers: &[Center],
    params: &SlicParams,
    threads: usize,
    assignments: &mut [u32],
) {
    let width = image.width() as usize;
    let height = image.height() as usize;
    let s = params.cluster_size as usize;
    let (buckets, bw, bh) = bucket_centers(centers, s, width, height);

    let assign_row = |y: usize, row_out: &mut [u32]| {
        let by = y / s;
        let by_lo = by.saturating_sub(1);
        let by_hi = (by + 1).min(bh - 1);
        for (x, out) in row_out.iter_mut().enumerate() {
            let lab = image.pixel(y as u32, x as u32);
            let bx = x / s;
            let bx_lo = bx.saturating_sub(1);
            let bx_hi = (bx + 1).min(bw - 1);

            let mut best_id = u32::MAX;
            let mut best_d = f64::INFINITY;
            for cell_y in by_lo..=by_hi {
                for cell_x in bx_lo..=bx_hi {
                    for &id in &buckets[cell_y * bw + cell_x] {
                        let c = &centers[id as usize];
                        let dx = x as f64 - c.x;
                        let dy = y as f64 - c.y;
                        // 2S x 2S search window centered on the cluster.
                        if dx.abs() > s as f64 || dy.abs() > s as f64 {
                            continue;
                        }
                        let d = distance_sq(lab, dx, dy, c, params);
                        if d < best_d || (d == best_d && id < best_id) {
                            best_d = d;
                            best_id = id;
                        }
                    }
                }
            }
            if best_id == u32::MAX {
                // No window covers this pixel (centers drifted away);
                // fall back to the globally nearest center.
                for (id, c) in centers.iter().enumerate() {
                    let dx = x as f64 - c.x;
                    let dy = y as f64 - c.y;
                    let d = distance_sq(lab, dx, dy, c, params);
                    if d < best_d {
                        best_d = d;
                        best_id = id as u32;
                    }
                }
            }
            *out = best_id;
        }
    };

    let workers = threads.min(height).max(1);
    if workers == 1 {
        for (y, row) in assignments.chunks_mut(width).enumerate() {
            assign_row(y, row);
        }
        return;
    }
    let rows_per_chunk = height.div_ceil(workers);
    std::thread::scope(|scope| {
        for (chunk_idx, chunk) in assignments.chunks_mut(rows_per_chunk * width).enumerate() {
            let assign_row = &assign_row;
            scope.spawn(move || {
                let row0 = chunk_idx * rows_per_chunk;
                for (off, row) in chunk.chunks_mut(width).enumerate() {
                    assign_row(row0 + off, row);
                }
            });
        }
    });
}

#[inline]
fn distance_sq(lab: [f32; 3], dx: f64, dy: f64, c: &Center, params: &SlicParams) -> f64 {
    let s = params.cluster_size as f64;
    let m = params.compactness as f64;
    let dl = lab[0] as f64 - c.l;
    let da = lab[1] as f64 - c.a;
    let db = lab[2] as f64 - c.b;
    let spatial = (dx / s) * (dx / s) + (dy / s) * (dy / s);
    let color = (dl * dl + da * da + db * db) / (m * m);
    spatial + color
}

/// Moves each center to the mean of its assigned pixels in (x, y, L, a, b).
/// Centers that attracted no pixels stay where they are. Accumulation is a
/// serial raster scan in f64, so the result is independent of thread count.
fn update_centers(image: &ImageLab, assignments: &[u32], centers: &mut [Center]) {
    let width = image.width() as usize;
    let mut sums = vec![[0.0f64; 5]; centers.len()];
    let mut counts = vec![0u64; centers.len()];
    for (idx, &id) in assignments.iter().enumerate() {
        let x = idx % width;
        let y = idx / width;
        let lab = image.pixel(y as u32, x as u32);
        let acc = &mut sums[id as usize];
        acc[0] += x as f64;
        acc[1] += y as f64;
        acc[2] += lab[0] as f64;
        acc[3] += lab[1] as f64;
        acc[4] += lab[2] as f64;
        counts[id as usize] += 1;
    }
    for (id, c) in centers.iter_mut().enumerate() {
        let n = counts[id];
        if n == 0 {
            continue;
        }
        let inv = 1.0 / n as f64;
        c.x = sums[id][0] * inv;
        c.y = sums[id][1] * inv;
        c.l = sums[id][2] * inv;
        c.a = sums[id][3] * inv;
        c.b = sums[id][4] * inv;
    }
}

/// Re-establishes 4-connectivity: every connected component smaller than
/// `min_region_fraction * cluster_size^2` pixels is merged into its largest
/// 4-adjacent neighboring component, and the surviving regions are relabeled
/// densely in raster order of first occurrence.
///
/// Components are scanned in raster order of first occurrence; a component
/// already absorbed into a group is reconsidered through that group, so
/// chains of tiny fragments keep merging until their group clears the
/// threshold or runs out of neighbors. Size ties pick the neighbor group
/// with the lowest component index.
pub fn enforce_connectivity(
    partition: &SuperpixelPartition,
    params: &SlicParams,
) -> SuperpixelPartition {
    enforce_connectivity_raw(
        partition.assignments(),
        partition.width(),
        partition.height(),
        params,
    )
}

fn enforce_connectivity_raw(
    assignments: &[u32],
    width: u32,
    height: u32,
    params: &SlicParams,
) -> SuperpixelPartition {
    let w = width as usize;
    let h = height as usize;
    let n = w * h;
    let threshold =
        params.min_region_fraction as f64 * (params.cluster_size as f64) * (params.cluster_size as f64);

    // Connected-component labeling, components numbered by raster order of
    // their first pixel.
    let mut comp_of = vec![u32::MAX; n];
    let mut comp_sizes: Vec<u64> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n {
        if comp_of[start] != u32::MAX {
            continue;
        }
        let comp = comp_sizes.len() as u32;
        let id = assignments[start];
        let mut size = 0u64;
        comp_of[start] = comp;
        stack.push(start);
        while let Some(px) = stack.pop() {
            size += 1;
            let x = px % w;
            let y = px / w;
            let mut visit = |nb: usize| {
                if comp_of[nb] == u32::MAX && assignments[nb] == id {
                    comp_of[nb] = comp;
                    stack.push(nb);
                }
            };
            if x > 0 {
                visit(px - 1);
            }
            if x + 1 < w {
                visit(px + 1);
            }
            if y > 0 {
                visit(px - w);
            }
            if y + 1 < h {
                visit(px + w);
            }
        }
        comp_sizes.push(size);
    }
    let ncomp = comp_sizes.len();

    // Component adjacency from horizontal and vertical pixel neighbors.
    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); ncomp];
    let note = |a: u32, b: u32, adjacency: &mut Vec<Vec<u32>>| {
        if !adjacency[a as usize].contains(&b) {
            adjacency[a as usize].push(b);
        }
    };
    for y in 0..h {
        for x in 0..w {
            let px = y * w + x;
            if x + 1 < w && comp_of[px] != comp_of[px + 1] {
                note(comp_of[px], comp_of[px + 1], &mut adjacency);
                note(comp_of[px + 1], comp_of[px], &mut adjacency);
            }
            if y + 1 < h && comp_of[px] != comp_of[px + w] {
                note(comp_of[px], comp_of[px + w], &mut adjacency);
                note(comp_of[px + w], comp_of[px], &mut adjacency);
            }
        }
    }

    // Union-find over components; group sizes and adjacency merge with it.
    let mut parent: Vec<u32> = (0..ncomp as u32).collect();
    fn find(parent: &mut [u32], mut c: u32) -> u32 {
        while parent[c as usize] != c {
            parent[c as usize] = parent[parent[c as usize] as usize];
            c = parent[c as usize];
        }
        c
    }
    let mut group_size = comp_sizes.clone();
    let mut group_adj = adjacency;

    for comp in 0..ncomp as u32 {
        let root = find(&mut parent, comp);
        if group_size[root as usize] as f64 >= threshold {
            continue;
        }
        // Largest 4-adjacent neighbor group; ties pick the lowest root index.
        let mut target: Option<u32> = None;
        let neighbors = std::mem::take(&mut group_adj[root as usize]);
        let mut live: Vec<u32> = Vec::with_capacity(neighbors.len());
        for &nb in &neighbors {
            let nb_root = find(&mut parent, nb);
            if nb_root == root || live.contains(&nb_root) {
                continue;
            }
            live.push(nb_root);
            let better = match target {
                None => true,
                Some(t) => {
                    group_size[nb_root as usize] > group_size[t as usize]
                        || (group_size[nb_root as usize] == group_size[t as usize] && nb_root < t)
                }
            };
            if better {
                target = Some(nb_root);
            }
        }
        let Some(target) = target else {
            group_adj[root as usize] = neighbors;
            continue; // the whole image is one component
        };
        parent[root as usize] = target;
        group_size[target as usize] += group_size[root as usize];
        for nb in live {
            if nb != target && !group_adj[target as usize].contains(&nb) {
                group_adj[target as usize].push(nb);
            }
        }
    }

    // Dense relabel in raster order of first occurrence.
    let mut dense_of_root = vec![u32::MAX; ncomp];
    let mut out = vec![0u32; n];
    let mut next = 0u32;
    for px in 0..n {
        let root = find(&mut parent, comp_of[px]);
        if dense_of_root[root as usize] == u32::MAX {
            dense_of_root[root as usize] = next;
            next += 1;
        }
        out[px] = dense_of_root[root as usize];
    }
    SuperpixelPartition::from_parts(width, height, out, next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Validate;

    fn uniform_image(width: u32, height: u32, rgb: [u8; 3]) -> ImageRgb {
        let mut pixels = Vec::with_capacity((width * height * 3) as usize);
        for _ in 0..width * height {
            pixels.extend_from_slice(&rgb);
        }
        ImageRgb::new(width, height, pixels).unwrap()
    }

    /// Left half black, right half white.
    fn split_image(width: u32, height: u32) -> ImageRgb {
        let mut pixels = Vec::new();
        for _ in 0..height {
            for x in 0..width {
                let v = if x < width / 2 { 0 } else { 255 };
                pixels.extend_from_slice(&[v, v, v]);
            }
        }
        ImageRgb::new(width, height, pixels).unwrap()
    }

    #[test]
    fn lab_of_black_is_origin() {
        let lab = rgb_to_lab(&uniform_image(1, 1, [0, 0, 0]));
        let px = lab.pixel(0, 0);
        assert!(px[0].abs() < 1e-4 && px[1].abs() < 1e-4 && px[2].abs() < 1e-4);
    }

    #[test]
    fn lab_of_white_is_l100_neutral() {
        let lab = rgb_to_lab(&uniform_image(1, 1, [255, 255, 255]));
        let px = lab.pixel(0, 0);
        assert!((px[0] - 100.0).abs() < 1e-3);
        assert!(px[1].abs() < 0.01 && px[2].abs() < 0.01);
    }

    #[test]
    fn lab_of_pure_red_matches_reference() {
        // Reference D65 2-degree values for sRGB (255, 0, 0).
        let lab = rgb_to_lab(&uniform_image(1, 1, [255, 0, 0]));
        let px = lab.pixel(0, 0);
        assert!((px[0] - 53.24).abs() < 0.05, "L = {}", px[0]);
        assert!((px[1] - 80.09).abs() < 0.05, "a = {}", px[1]);
        assert!((px[2] - 67.20).abs() < 0.05, "b = {}", px[2]);
    }

    #[test]
    fn uniform_8x8_with_s4_gives_four_quadrants() {
        let image = rgb_to_lab(&uniform_image(8, 8, [128, 128, 128]));
        let params = SlicParams {
            cluster_size: 4,
            ..SlicParams::default()
        };
        let partition = segment_with_threads(&image, &params, 1).unwrap();
        assert_eq!(partition.num_superpixels(), 4);
        for y in 0..8 {
            for x in 0..8 {
                let expected = (y / 4) * 2 + x / 4;
                assert_eq!(partition.assignment(y, x), expected, "pixel ({y}, {x})");
            }
        }
    }

    #[test]
    fn two_color_split_yields_color_pure_superpixels() {
        let image = rgb_to_lab(&split_image(6, 6));
        let params = SlicParams {
            cluster_size: 3,
            compactness: 10.0,
            ..SlicParams::default()
        };
        let partition = segment_with_threads(&image, &params, 1).unwrap();
        assert_eq!(mixed_superpixel_count(&partition, 6), 0);
    }

    /// Superpixels containing pixels from both halves of a 6x6 split image.
    fn mixed_superpixel_count(partition: &SuperpixelPartition, width: u32) -> usize {
        let n = partition.num_superpixels() as usize;
        let mut black = vec![false; n];
        let mut white = vec![false; n];
        for y in 0..partition.height() {
            for x in 0..width {
                let id = partition.assignment(y, x) as usize;
                if x < width / 2 {
                    black[id] = true;
                } else {
                    white[id] = true;
                }
            }
        }
        (0..n).filter(|&i| black[i] && white[i]).count()
    }

    #[test]
    fn mixed_superpixels_do_not_decrease_with_compactness() {
        let image = rgb_to_lab(&split_image(6, 6));
        let mut counts = Vec::new();
        for m in [10.0, 100.0, 1000.0] {
            let params = SlicParams {
                cluster_size: 3,
                compactness: m,
                ..SlicParams::default()
            };
            let partition = segment_with_threads(&image, &params, 1).unwrap();
            counts.push(mixed_superpixel_count(&partition, 6));
        }
        assert_eq!(counts[0], 0);
        assert!(counts[0] <= counts[1] && counts[1] <= counts[2], "{counts:?}");
    }

    #[test]
    fn single_pixel_image_is_one_superpixel() {
        let image = rgb_to_lab(&uniform_image(1, 1, [10, 200, 30]));
        let partition = segment_with_threads(&image, &SlicParams::default(), 1).unwrap();
        assert_eq!(partition.num_superpixels(), 1);
        assert_eq!(partition.assignments(), &[0]);
    }

    #[test]
    fn constant_color_superpixels_stay_local() {
        let image = rgb_to_lab(&uniform_image(64, 48, [90, 60, 120]));
        let params = SlicParams {
            cluster_size: 8,
            ..SlicParams::default()
        };
        let partition = segment_with_threads(&image, &params, 1).unwrap();
        let s = params.cluster_size;
        let n = partition.num_superpixels() as usize;
        let mut min_x = vec![u32::MAX; n];
        let mut max_x = vec![0u32; n];
        let mut min_y = vec![u32::MAX; n];
        let mut max_y = vec![0u32; n];
        for y in 0..partition.height() {
            for x in 0..partition.width() {
                let id = partition.assignment(y, x) as usize;
                min_x[id] = min_x[id].min(x);
                max_x[id] = max_x[id].max(x);
                min_y[id] = min_y[id].min(y);
                max_y[id] = max_y[id].max(y);
            }
        }
        for id in 0..n {
            assert!(max_x[id] - min_x[id] + 1 <= 2 * s, "id {id} too wide");
            assert!(max_y[id] - min_y[id] + 1 <= 2 * s, "id {id} too tall");
        }
    }

    #[test]
    fn enforce_connectivity_merges_alternating_fragments() {
        // 4x1 partition {0, 1, 0, 1}: every fragment is below the threshold
        // 0.6 * 2^2 = 2.4, so the chain collapses into a single region.
        let partition = SuperpixelPartition::new(4, 1, vec![0, 1, 0, 1], 2).unwrap();
        let params = SlicParams {
            cluster_size: 2,
            min_region_fraction: 0.6,
            ..SlicParams::default()
        };
        let merged = enforce_connectivity(&partition, &params);
        merged.validate().unwrap();
        assert_eq!(merged.num_superpixels(), 1);
        assert_eq!(merged.assignments(), &[0, 0, 0, 0]);
    }

    #[test]
    fn enforce_connectivity_absorbs_isolated_pixel() {
        // One stray id-1 pixel inside a sea of id 0 adopts the sea's id.
        let mut assignments = vec![0u32; 64];
        assignments[27] = 1;
        let partition = SuperpixelPartition::new(8, 8, assignments, 2).unwrap();
        let params = SlicParams {
            cluster_size: 4,
            ..SlicParams::default()
        };
        let merged = enforce_connectivity(&partition, &params);
        assert_eq!(merged.num_superpixels(), 1);
        assert!(merged.assignments().iter().all(|&id| id == 0));
    }

    #[test]
    fn enforce_connectivity_keeps_large_regions_intact() {
        // Two 4x4 halves, both above threshold: only a dense relabel happens.
        // ids {1, 0} stacked: relabel should map top half to 0, bottom to 1.
        let mut assignments = Vec::new();
        for y in 0..4 {
            for _x in 0..4 {
                assignments.push(if y < 2 { 1u32 } else { 0 });
            }
        }
        let partition = SuperpixelPartition::new(4, 4, assignments, 2).unwrap();
        let params = SlicParams {
            cluster_size: 2,
            min_region_fraction: 0.5,
            ..SlicParams::default()
        };
        let merged = enforce_connectivity(&partition, &params);
        assert_eq!(merged.num_superpixels(), 2);
        for y in 0..4u32 {
            for x in 0..4u32 {
                assert_eq!(merged.assignment(y, x), if y < 2 { 0 } else { 1 });
            }
        }
    }

    #[test]
    fn segmentation_is_thread_count_invariant() {
        let image = rgb_to_lab(&split_image(32, 24));
        let params = SlicParams {
            cluster_size: 8,
            ..SlicParams::default()
        };
        let serial = segment_with_threads(&image, &params, 1).unwrap();
        let parallel = segment_with_threads(&image, &params, 8).unwrap();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let image = rgb_to_lab(&uniform_image(4, 4, [0, 0, 0]));
        let bad = SlicParams {
            cluster_size: 1,
            ..SlicParams::default()
        };
        assert!(segment(&image, &bad).is_err());
        let bad = SlicParams {
            compactness: 0.0,
            ..SlicParams::default()
        };
        assert!(segment(&image, &bad).is_err());
        let bad = SlicParams {
            min_region_fraction: 1.0,
            ..SlicParams::default()
        };
        assert!(segment(&image, &bad).is_err());
    }
}
