//! Window filters: median, uniform blur, and the blur-then-sharpen combo.
//!
//! All filters preserve dimensions and replicate edge pixels where the window
//! leaves the image.

use crate::corpus::{Band, ImageBuffer, Plane};

use super::clamp_u8;

#[inline]
fn clampi(v: i32, max: usize) -> usize {
    v.clamp(0, max as i32 - 1) as usize
}

/// Median filter with a `window x window` neighbourhood, per band.
///
/// Runs a histogram that slides along each row: entering/leaving columns
/// update 256 bins, and the median is the first level whose cumulative count
/// reaches half the window.
pub fn median_filter(image: &ImageBuffer, window: usize) -> ImageBuffer {
    let (w, h) = (image.width(), image.height());
    let r = window as i32 / 2;
    let rank = (window * window) as u32 / 2 + 1;
    let mut planes = Vec::with_capacity(3 * w * h);
    for band in Band::ALL {
        let plane = image.plane(band);
        for y in 0..h as i32 {
            let mut hist = [0u32; 256];
            // Prime the window for x = 0.
            for dx in -r..=r {
                add_column(&plane, &mut hist, dx, y, r, 1);
            }
            planes.push(histogram_median(&hist, rank));
            for x in 1..w as i32 {
                add_column(&plane, &mut hist, x - 1 - r, y, r, -1);
                add_column(&plane, &mut hist, x + r, y, r, 1);
                planes.push(histogram_median(&hist, rank));
            }
        }
    }
    ImageBuffer::from_planes(w, h, planes).expect("same dimensions as input")
}

#[inline]
fn add_column(plane: &Plane<'_>, hist: &mut [u32; 256], x: i32, y: i32, r: i32, sign: i32) {
    let cx = clampi(x, plane.width());
    for dy in -r..=r {
        let v = plane.at(cx, clampi(y + dy, plane.height())) as usize;
        if sign > 0 {
            hist[v] += 1;
        } else {
            hist[v] -= 1;
        }
    }
}

#[inline]
fn histogram_median(hist: &[u32; 256], rank: u32) -> u8 {
    let mut cum = 0u32;
    for (level, &c) in hist.iter().enumerate() {
        cum += c;
        if cum >= rank {
            return level as u8;
        }
    }
    255
}

/// Uniform `window x window` mean filter, per band.
///
/// The window sum is an exact integer and the divisor is odd-squared, so the
/// quotient is never exactly halfway between two levels; `f64` rounding is
/// therefore unambiguous.
pub fn average_blur(image: &ImageBuffer, window: usize) -> ImageBuffer {
    let (w, h) = (image.width(), image.height());
    let r = window as i32 / 2;
    let n = (window * window) as f64;
    let mut planes = Vec::with_capacity(3 * w * h);
    for band in Band::ALL {
        let plane = image.plane(band);
        for y in 0..h as i32 {
            for x in 0..w as i32 {
                let mut sum = 0u32;
                for dy in -r..=r {
                    let row = plane.row(clampi(y + dy, h));
                    for dx in -r..=r {
                        sum += row[clampi(x + dx, w)] as u32;
                    }
                }
                planes.push(clamp_u8(sum as f64 / n));
            }
        }
    }
    ImageBuffer::from_planes(w, h, planes).expect("same dimensions as input")
}

const SHARPEN_KERNEL: [[f64; 3]; 3] = [[-1.0, -1.0, -1.0], [-1.0, 9.0, -1.0], [-1.0, -1.0, -1.0]];

/// 3x3 uniform blur followed by correlation with
/// `[[-1,-1,-1],[-1,9,-1],[-1,-1,-1]]`.
///
/// Both stages are 8-bit image operations: the blurred intermediate is
/// rounded and clamped before sharpening.
pub fn blur_then_sharpen(image: &ImageBuffer) -> ImageBuffer {
    let blurred = average_blur(image, 3);
    let (w, h) = (blurred.width(), blurred.height());
    let mut planes = Vec::with_capacity(3 * w * h);
    for band in Band::ALL {
        let plane = blurred.plane(band);
        for y in 0..h as i32 {
            for x in 0..w as i32 {
                let mut acc = 0.0f64;
                for dy in -1..=1i32 {
                    let row = plane.row(clampi(y + dy, h));
                    for dx in -1..=1i32 {
                        acc += SHARPEN_KERNEL[(dy + 1) as usize][(dx + 1) as usize]
                            * row[clampi(x + dx, w)] as f64;
                    }
                }
                planes.push(clamp_u8(acc));
            }
        }
    }
    ImageBuffer::from_planes(w, h, planes).expect("same dimensions as input")
}

#[cfg(test)]
mod tests {
    use super::super::tests::{constant_image, random_image};
    use super::*;
    use crate::oracle;

    #[test]
    fn median_constant_fixed_point() {
        let img = constant_image(7, 5, 200);
        assert_eq!(median_filter(&img, 3), img);
        assert_eq!(median_filter(&img, 5), img);
    }

    #[test]
    fn median_matches_sort_reference() {
        for seed in 0..4u64 {
            let img = random_image(19, 13, seed);
            for window in [3, 5] {
                assert_eq!(
                    median_filter(&img, window),
                    oracle::reference_median(&img, window),
                    "window {window} seed {seed}"
                );
            }
        }
    }

    #[test]
    fn median_idempotent_on_constant() {
        let img = constant_image(6, 6, 42);
        let once = median_filter(&img, 3);
        assert_eq!(median_filter(&once, 3), once);
    }

    #[test]
    fn blur_constant_fixed_point() {
        let img = constant_image(8, 8, 77);
        assert_eq!(average_blur(&img, 3), img);
        assert_eq!(average_blur(&img, 5), img);
    }

    #[test]
    fn blur_simple_mean() {
        // 3x3 blur at the center of a small ramp: plain mean of the window.
        let data: Vec<u8> = (0..27).map(|i| (i % 9) * 10).collect();
        let img = ImageBuffer::from_planes(3, 3, data).unwrap();
        let out = average_blur(&img, 3);
        // Center pixel: mean of 0,10,...,80 = 40.
        assert_eq!(out.get(1, 1, Band::R), 40);
    }

    #[test]
    fn blur_sharpen_fixes_constants() {
        // The kernel sums to 1 and blurring is identity on constants.
        for v in [0u8, 1, 127, 254, 255] {
            let img = constant_image(6, 4, v);
            assert_eq!(blur_then_sharpen(&img), img);
        }
    }

    #[test]
    fn blur_sharpen_impulse_matches_reference() {
        // 255 impulse at the center of a 7x7 zero image.
        let mut data = vec![0u8; 3 * 49];
        for band in 0..3 {
            data[band * 49 + 3 * 7 + 3] = 255;
        }
        let img = ImageBuffer::from_planes(7, 7, data).unwrap();
        let out = blur_then_sharpen(&img);
        let expect = oracle::reference_blur_sharpen(&img);
        assert_eq!(out, expect);
        // Hand value: blur turns the impulse into a 3x3 block of round(255/9) = 28;
        // at the center the sharpen kernel sees 9*28 - 8*28 = 28.
        assert_eq!(out.get(3, 3, Band::R), 28);
    }

    #[test]
    fn blur_sharpen_random_matches_reference() {
        for seed in 0..3u64 {
            let img = random_image(12, 9, seed + 50);
            assert_eq!(blur_then_sharpen(&img), oracle::reference_blur_sharpen(&img));
        }
    }

    #[test]
    fn outputs_stay_in_range() {
        // u8 storage guarantees range; this exercises extreme inputs.
        let mut data = vec![0u8; 3 * 64];
        for (i, v) in data.iter_mut().enumerate() {
            *v = if i % 2 == 0 { 0 } else { 255 };
        }
        let img = ImageBuffer::from_planes(8, 8, data).unwrap();
        let _ = blur_then_sharpen(&img);
        let _ = median_filter(&img, 5);
        let _ = average_blur(&img, 5);
    }
}
