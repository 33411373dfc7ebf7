//! Contrast-limited adaptive histogram equalization, applied per band.
//!
//! The image is divided into a grid of tiles. Each tile gets a 256-bin
//! histogram, clipped at `clip_limit * tile_pixels / 256` with the clipped
//! mass redistributed uniformly over all bins, and an equalization mapping
//! `map(v) = 255 * cdf(v) / tile_pixels`. Every pixel is remapped by
//! bilinear interpolation between the mappings of the four nearest tile
//! centers (clamped at the borders), then rounded once.

use crate::corpus::{Band, ImageBuffer};
use crate::error::{Error, Result};

use super::clamp_u8;

/// Contiguous partition of `len` into `parts` ranges; the first `len % parts`
/// ranges get one extra element.
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

/// Clipped-and-redistributed equalization mapping for one tile, unrounded.
fn tile_mapping(hist: &[u32; 256], tile_px: usize, clip_limit: f64) -> [f64; 256] {
    let tile_px = tile_px as f64;
    let threshold = clip_limit * tile_px / 256.0;
    let mut excess = 0.0f64;
    for &c in hist.iter() {
        if c as f64 > threshold {
            excess += c as f64 - threshold;
        }
    }
    let redistribute = excess / 256.0;
    let mut map = [0.0f64; 256];
    let mut cdf = 0.0f64;
    for (level, &c) in hist.iter().enumerate() {
        cdf += (c as f64).min(threshold) + redistribute;
        map[level] = 255.0 * cdf / tile_px;
    }
    map
}

/// Bracketing tile indices and interpolation fraction for a pixel coordinate.
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

/// Contrast-limited adaptive histogram equalization.
pub fn clahe(image: &ImageBuffer, clip_limit: f64, tile_grid: (usize, usize)) -> Result<ImageBuffer> {
    let (rows, cols) = tile_grid;
    let (w, h) = (image.width(), image.height());
    if rows == 0 || cols == 0 {
        return Err(Error::Config("tile grid must be at least 1x1".into()));
    }
    if rows > h || cols > w {
        return Err(Error::Domain(format!(
            "tile grid {rows}x{cols} does not fit a {w}x{h} image"
        )));
    }
    if clip_limit <= 0.0 {
        return Err(Error::Config(format!(
            "clip limit must be > 0, got {clip_limit}"
        )));
    }

    let row_bounds = partition(h, rows);
    let col_bounds = partition(w, cols);
    let row_centers: Vec<f64> = row_bounds
        .iter()
        .map(|&(a, b)| (a + b - 1) as f64 / 2.0)
        .collect();
    let col_centers: Vec<f64> = col_bounds
        .iter()
        .map(|&(a, b)| (a + b - 1) as f64 / 2.0)
        .collect();

    let mut planes = Vec::with_capacity(3 * w * h);
    for band in Band::ALL {
        let plane = image.plane(band);
        // Per-tile mappings for this band.
        let mut maps: Vec<[f64; 256]> = Vec::with_capacity(rows * cols);
        for &(y0, y1) in &row_bounds {
            for &(x0, x1) in &col_bounds {
                let mut hist = [0u32; 256];
                for y in y0..y1 {
                    for &v in &plane.row(y)[x0..x1] {
                        hist[v as usize] += 1;
                    }
                }
                maps.push(tile_mapping(&hist, (y1 - y0) * (x1 - x0), clip_limit));
            }
        }
        for y in 0..h {
            let (r0, r1, fy) = interp_coords(y as f64, &row_centers);
            for x in 0..w {
                let (c0, c1, fx) = interp_coords(x as f64, &col_centers);
                let v = plane.at(x, y) as usize;
                let m00 = maps[r0 * cols + c0][v];
                let m01 = maps[r0 * cols + c1][v];
                let m10 = maps[r1 * cols + c0][v];
                let m11 = maps[r1 * cols + c1][v];
                let top = (1.0 - fx) * m00 + fx * m01;
                let bot = (1.0 - fx) * m10 + fx * m11;
                planes.push(clamp_u8((1.0 - fy) * top + fy * bot));
            }
        }
    }
    Ok(ImageBuffer::from_planes(w, h, planes).expect("same dimensions as input"))
}

#[cfg(test)]
mod tests {
    use super::super::tests::{constant_image, random_image};
    use super::*;
    use crate::oracle;

    #[test]
    fn constant_image_stays_constant() {
        let img = constant_image(32, 32, 0);
        let out = clahe(&img, 1.0, (8, 8)).unwrap();
        let first = out.get(0, 0, Band::R);
        assert!(out.plane_data().iter().all(|&v| v == first));
    }

    #[test]
    fn checkerboard_matches_reference() {
        // 64x64 two-level checkerboard, 8x8 grid.
        let mut data = vec![0u8; 3 * 64 * 64];
        for band in 0..3 {
            for y in 0..64 {
                for x in 0..64 {
                    data[band * 4096 + y * 64 + x] = if (x + y) % 2 == 0 { 64 } else { 192 };
                }
            }
        }
        let img = ImageBuffer::from_planes(64, 64, data).unwrap();
        let out = clahe(&img, 1.0, (8, 8)).unwrap();
        let reference = oracle::reference_clahe(&img, 1.0, (8, 8));
        assert_eq!(out, reference);
    }

    #[test]
    fn random_images_match_reference() {
        for seed in 0..3u64 {
            let img = random_image(40, 24, seed + 7);
            let out = clahe(&img, 1.0, (4, 5)).unwrap();
            let reference = oracle::reference_clahe(&img, 1.0, (4, 5));
            assert_eq!(out, reference, "seed {seed}");
        }
    }

    #[test]
    fn uneven_tiles_match_reference() {
        // 37x23 does not divide evenly into an 8x8 grid.
        let img = random_image(37, 23, 99);
        let out = clahe(&img, 1.0, (8, 8)).unwrap();
        let reference = oracle::reference_clahe(&img, 1.0, (8, 8));
        assert_eq!(out, reference);
    }

    #[test]
    fn oversized_grid_rejected() {
        let img = random_image(4, 4, 0);
        assert!(clahe(&img, 1.0, (8, 8)).is_err());
    }

    #[test]
    fn higher_clip_limit_changes_less() {
        // With a huge clip limit nothing is clipped, giving plain adaptive
        // equalization; with clip 1.0 the histogram is flattened toward
        // identity. Both must stay in range; they should differ on a
        // non-trivial image.
        let img = random_image(32, 32, 5);
        let mild = clahe(&img, 1.0, (4, 4)).unwrap();
        let strong = clahe(&img, 1000.0, (4, 4)).unwrap();
        assert_ne!(mild, strong);
    }
}
