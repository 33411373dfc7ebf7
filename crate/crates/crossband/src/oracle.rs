//! Naive reference implementations.
//!
//! Everything here is written straight from the defining formulas, with no
//! shared code with the optimized implementations it is used to verify. The
//! self-test command and the acceptance suite compare the two paths
//! entry-for-entry.

use crate::corpus::{Band, ImageBuffer, Plane};
use crate::postprocess::clamp_u8;

/// Side of a co-occurrence matrix (one bin per 8-bit level).
const LEVELS: usize = 256;

/// Double-loop spatial co-occurrence: for every pixel (x, y), count the pair
/// `(channel(x, y), channel(x + dx, y + dy))` when the displaced coordinate
/// is inside the grid. Returns a row-major 256x256 count grid.
pub fn naive_spatial_cooccurrence(channel: &Plane<'_>, delta: (i32, i32)) -> Vec<u64> {
    naive_pair_cooccurrence(channel, channel, delta)
}

/// Double-loop cross-band co-occurrence: pairs `(band_a(x, y), band_b(x + dx, y + dy))`.
pub fn naive_cross_band_cooccurrence(
    band_a: &Plane<'_>,
    band_b: &Plane<'_>,
    delta: (i32, i32),
) -> Vec<u64> {
    naive_pair_cooccurrence(band_a, band_b, delta)
}

fn naive_pair_cooccurrence(a: &Plane<'_>, b: &Plane<'_>, (dx, dy): (i32, i32)) -> Vec<u64> {
    let mut counts = vec![0u64; LEVELS * LEVELS];
    for y in 0..a.height() as i32 {
        for x in 0..a.width() as i32 {
            let (tx, ty) = (x + dx, y + dy);
            if tx >= 0 && ty >= 0 && (tx as usize) < b.width() && (ty as usize) < b.height() {
                let i = a.at(x as usize, y as usize) as usize;
                let j = b.at(tx as usize, ty as usize) as usize;
                counts[i * LEVELS + j] += 1;
            }
        }
    }
    counts
}

fn clamp_coord(v: i32, max: usize) -> usize {
    v.clamp(0, max as i32 - 1) as usize
}

/// Sort-based median filter with edge replication.
pub fn reference_median(image: &ImageBuffer, window: usize) -> ImageBuffer {
    let (w, h) = (image.width(), image.height());
    let r = window as i32 / 2;
    let mut planes = Vec::with_capacity(3 * w * h);
    for band in Band::ALL {
        let plane = image.plane(band);
        for y in 0..h as i32 {
            for x in 0..w as i32 {
                let mut vals = Vec::with_capacity(window * window);
                for dy in -r..=r {
                    for dx in -r..=r {
                        vals.push(plane.at(clamp_coord(x + dx, w), clamp_coord(y + dy, h)));
                    }
                }
                vals.sort_unstable();
                planes.push(vals[vals.len() / 2]);
            }
        }
    }
    ImageBuffer::from_planes(w, h, planes).expect("same dimensions as input")
}

/// Two-stage blur-then-sharpen computed directly: 3x3 mean (rounded to 8 bits),
/// then correlation with [[-1,-1,-1],[-1,9,-1],[-1,-1,-1]], both with edge
/// replication.
pub fn reference_blur_sharpen(image: &ImageBuffer) -> ImageBuffer {
    let (w, h) = (image.width(), image.height());
    let mut out = Vec::with_capacity(3 * w * h);
    for band in Band::ALL {
        let plane = image.plane(band);
        // Stage 1: 3x3 mean.
        let mut blurred = vec![0u8; w * h];
        for y in 0..h as i32 {
            for x in 0..w as i32 {
                let mut sum = 0u32;
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        sum += plane.at(clamp_coord(x + dx, w), clamp_coord(y + dy, h)) as u32;
                    }
                }
                blurred[y as usize * w + x as usize] = clamp_u8(sum as f64 / 9.0);
            }
        }
        // Stage 2: sharpening kernel.
        const K: [[f64; 3]; 3] = [[-1.0, -1.0, -1.0], [-1.0, 9.0, -1.0], [-1.0, -1.0, -1.0]];
        for y in 0..h as i32 {
            for x in 0..w as i32 {
                let mut acc = 0.0f64;
                for dy in -1..=1i32 {
                    for dx in -1..=1i32 {
                        let v = blurred
                            [clamp_coord(y + dy, h) * w + clamp_coord(x + dx, w)]
                            as f64;
                        acc += K[(dy + 1) as usize][(dx + 1) as usize] * v;
                    }
                }
                out.push(clamp_u8(acc));
            }
        }
    }
    ImageBuffer::from_planes(w, h, out).expect("same dimensions as input")
}

/// Per-pixel contrast-limited adaptive histogram equalization, recomputing the
/// four neighbouring tile mappings from scratch for every pixel.
///
/// Tile layout, clipping, redistribution, and the equalization mapping follow
/// the same definitions as the production implementation; only the evaluation
/// strategy differs (no precomputed LUTs, no reuse across pixels).
pub fn reference_clahe(
    image: &ImageBuffer,
    clip_limit: f64,
    tile_grid: (usize, usize),
) -> ImageBuffer {
    let (w, h) = (image.width(), image.height());
    let (rows, cols) = tile_grid;
    let row_bounds = partition(h, rows);
    let col_bounds = partition(w, cols);
    let row_centers: Vec<f64> = row_bounds.iter().map(|&(a, b)| (a + b - 1) as f64 / 2.0).collect();
    let col_centers: Vec<f64> = col_bounds.iter().map(|&(a, b)| (a + b - 1) as f64 / 2.0).collect();

    // Equalized value of level `v` under the tile (tr, tc) mapping.
    let tile_map = |plane: &Plane<'_>, tr: usize, tc: usize, v: u8| -> f64 {
        let (y0, y1) = row_bounds[tr];
        let (x0, x1) = col_bounds[tc];
        let mut hist = [0u32; 256];
        for y in y0..y1 {
            for x in x0..x1 {
                hist[plane.at(x, y) as usize] += 1;
            }
        }
        let tile_px = ((y1 - y0) * (x1 - x0)) as f64;
        let threshold = clip_limit * tile_px / 256.0;
        let mut excess = 0.0f64;
        for &c in &hist {
            if c as f64 > threshold {
                excess += c as f64 - threshold;
            }
        }
        let redistribute = excess / 256.0;
        let mut cdf = 0.0f64;
        for (level, &c) in hist.iter().enumerate() {
            cdf += (c as f64).min(threshold) + redistribute;
            if level == v as usize {
                break;
            }
        }
        255.0 * cdf / tile_px
    };

    let mut out = Vec::with_capacity(3 * w * h);
    for band in Band::ALL {
        let plane = image.plane(band);
        for y in 0..h {
            for x in 0..w {
                let v = plane.at(x, y);
                let (r0, r1, fy) = interp_coords(y as f64, &row_centers);
                let (c0, c1, fx) = interp_coords(x as f64, &col_centers);
                let m00 = tile_map(&plane, r0, c0, v);
                let m01 = tile_map(&plane, r0, c1, v);
                let m10 = tile_map(&plane, r1, c0, v);
                let m11 = tile_map(&plane, r1, c1, v);
                let top = (1.0 - fx) * m00 + fx * m01;
                let bot = (1.0 - fx) * m10 + fx * m11;
                out.push(clamp_u8((1.0 - fy) * top + fy * bot));
            }
        }
    }
    ImageBuffer::from_planes(w, h, out).expect("same dimensions as input")
}

/// Split `len` into `parts` contiguous ranges; the first `len % parts` ranges
/// get one extra element.
fn partition(len: usize, parts: usize) -> Vec<(usize, usize)> {
    let base = len / parts;
    let extra = len % parts;
    let mut bounds = Vec::with_capacity(parts);
    let mut start = 0;
    for i in 0..parts {
        let size = base + usize::from(i < extra);
        bounds.push((start, start + size));
        start += size;
    }
    bounds
}

/// Indices of the two bracketing centers and the interpolation fraction.
fn interp_coords(p: f64, centers: &[f64]) -> (usize, usize, f64) {
    if p <= centers[0] {
        return (0, 0, 0.0);
    }
    let last = centers.len() - 1;
    if p >= centers[last] {
        return (last, last, 0.0);
    }
    let mut lo = 0;
    while centers[lo + 1] <= p {
        lo += 1;
    }
    let f = (p - centers[lo]) / (centers[lo + 1] - centers[lo]);
    (lo, lo + 1, f)
}
