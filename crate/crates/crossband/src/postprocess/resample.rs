//! Geometric operators: bicubic rescaling, rotation, center crop.
//!
//! Bicubic interpolation uses the common cubic convolution kernel with
//! a = -0.5. Source coordinates are center-aligned:
//! `src = (dst + 0.5) * in/out - 0.5`. Sample taps outside the image replicate
//! the nearest edge pixel. At integer source coordinates the kernel weights
//! collapse to {0, 1, 0, 0}, so scale 1.0 and rotation 0 are exact identities.

use crate::corpus::{Band, ImageBuffer, Plane};
use crate::error::{Error, Result};

use super::clamp_u8;

/// Cubic convolution kernel, a = -0.5 (Keys).
#[inline]
fn cubic(t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        (1.5 * t - 2.5) * t * t + 1.0
    } else if t < 2.0 {
        ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0
    } else {
        0.0
    }
}

#[inline]
fn clampi(v: i64, max: usize) -> usize {
    v.clamp(0, max as i64 - 1) as usize
}

/// Bicubic sample at fractional coordinates with edge replication.
#[inline]
fn sample_bicubic(plane: &Plane<'_>, fx: f64, fy: f64) -> f64 {
    let x0 = fx.floor();
    let y0 = fy.floor();
    let dx = fx - x0;
    let dy = fy - y0;
    let mut wx = [0.0f64; 4];
    let mut wy = [0.0f64; 4];
    for (m, (wxm, wym)) in wx.iter_mut().zip(wy.iter_mut()).enumerate() {
        let off = m as f64 - 1.0;
        *wxm = cubic(dx - off);
        *wym = cubic(dy - off);
    }
    let mut acc = 0.0;
    for (m, &wym) in wy.iter().enumerate() {
        let sy = clampi(y0 as i64 + m as i64 - 1, plane.height());
        let row = plane.row(sy);
        let mut racc = 0.0;
        for (k, &wxk) in wx.iter().enumerate() {
            let sx = clampi(x0 as i64 + k as i64 - 1, plane.width());
            racc += wxk * row[sx] as f64;
        }
        acc += wym * racc;
    }
    acc
}

/// Rescale both dimensions by `scale` with bicubic interpolation.
/// Output dimensions are `round(scale * dim)`.
pub fn resize_bicubic(image: &ImageBuffer, scale: f64) -> Result<ImageBuffer> {
    if scale <= 0.0 {
        return Err(Error::Config(format!("scale must be > 0, got {scale}")));
    }
    let ow = (scale * image.width() as f64).round() as usize;
    let oh = (scale * image.height() as f64).round() as usize;
    if ow < 2 || oh < 2 {
        return Err(Error::Domain(format!(
            "scale {scale} shrinks {}x{} below 2x2",
            image.width(),
            image.height()
        )));
    }
    // Map through the realized ratio so the output grid spans the input.
    let rx = image.width() as f64 / ow as f64;
    let ry = image.height() as f64 / oh as f64;
    let mut planes = Vec::with_capacity(3 * ow * oh);
    for band in Band::ALL {
        let plane = image.plane(band);
        for y in 0..oh {
            let sy = (y as f64 + 0.5) * ry - 0.5;
            for x in 0..ow {
                let sx = (x as f64 + 0.5) * rx - 0.5;
                planes.push(clamp_u8(sample_bicubic(&plane, sx, sy)));
            }
        }
    }
    ImageBuffer::from_planes(ow, oh, planes)
}

/// Rotate counter-clockwise by `angle` degrees about the image center,
/// keeping the canvas size; pixels that map outside the source are 0.
pub fn rotate_bicubic(image: &ImageBuffer, angle: f64) -> ImageBuffer {
    let (w, h) = (image.width(), image.height());
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let rad = angle.to_radians();
    let (sin, cos) = (rad.sin(), rad.cos());
    let mut planes = Vec::with_capacity(3 * w * h);
    for band in Band::ALL {
        let plane = image.plane(band);
        for y in 0..h {
            let dy = y as f64 - cy;
            for x in 0..w {
                let dx = x as f64 - cx;
                // Inverse mapping: rotate the output coordinate by -angle.
                let sx = cx + cos * dx + sin * dy;
                let sy = cy - sin * dx + cos * dy;
                if sx >= 0.0 && sx <= (w - 1) as f64 && sy >= 0.0 && sy <= (h - 1) as f64 {
                    planes.push(clamp_u8(sample_bicubic(&plane, sx, sy)));
                } else {
                    planes.push(0);
                }
            }
        }
    }
    ImageBuffer::from_planes(w, h, planes).expect("same dimensions as input")
}

/// Extract a centered `crop_size x crop_size` window.
pub fn crop_center(image: &ImageBuffer, crop_size: usize) -> Result<ImageBuffer> {
    let (w, h) = (image.width(), image.height());
    if crop_size > w.min(h) {
        return Err(Error::Domain(format!(
            "crop size {crop_size} exceeds image dimensions {w}x{h}"
        )));
    }
    if crop_size < 2 {
        return Err(Error::Domain(format!(
            "crop size must be at least 2, got {crop_size}"
        )));
    }
    let x0 = (w - crop_size) / 2;
    let y0 = (h - crop_size) / 2;
    let mut planes = Vec::with_capacity(3 * crop_size * crop_size);
    for band in Band::ALL {
        let plane = image.plane(band);
        for y in 0..crop_size {
            planes.extend_from_slice(&plane.row(y0 + y)[x0..x0 + crop_size]);
        }
    }
    ImageBuffer::from_planes(crop_size, crop_size, planes)
}

#[cfg(test)]
mod tests {
    use super::super::tests::{constant_image, random_image};
    use super::*;

    #[test]
    fn cubic_kernel_values() {
        assert_eq!(cubic(0.0), 1.0);
        assert_eq!(cubic(1.0), 0.0);
        assert_eq!(cubic(2.0), 0.0);
        // Partition of unity at any phase.
        for phase in [0.0, 0.25, 0.5, 0.9] {
            let s: f64 = (-1..=2).map(|m| cubic(phase - m as f64)).sum();
            assert!((s - 1.0).abs() < 1e-12, "phase {phase}: {s}");
        }
    }

    #[test]
    fn resize_output_dimensions() {
        let img = random_image(64, 48, 1);
        for (scale, ew, eh) in [
            (0.5, 32usize, 24usize),
            (0.8, 51, 38),
            (0.9, 58, 43),
            (1.1, 70, 53),
            (1.2, 77, 58),
            (1.9, 122, 91),
        ] {
            let out = resize_bicubic(&img, scale).unwrap();
            assert_eq!((out.width(), out.height()), (ew, eh), "scale {scale}");
        }
    }

    #[test]
    fn resize_scale_one_is_identity() {
        let img = random_image(13, 9, 5);
        assert_eq!(resize_bicubic(&img, 1.0).unwrap(), img);
    }

    #[test]
    fn resize_constant_stays_constant() {
        let img = constant_image(16, 16, 99);
        for scale in [0.5, 0.9, 1.3] {
            let out = resize_bicubic(&img, scale).unwrap();
            assert!(out.plane_data().iter().all(|&v| v == 99), "scale {scale}");
        }
    }

    #[test]
    fn resize_below_minimum_rejected() {
        let img = random_image(3, 3, 0);
        assert!(resize_bicubic(&img, 0.4).is_err());
    }

    #[test]
    fn rotate_zero_is_identity() {
        let img = random_image(11, 7, 9);
        assert_eq!(rotate_bicubic(&img, 0.0), img);
    }

    #[test]
    fn rotate_keeps_canvas_and_zeroes_corners() {
        let img = constant_image(32, 32, 200);
        let out = rotate_bicubic(&img, 45.0);
        assert_eq!((out.width(), out.height()), (32, 32));
        // The canvas corners fall outside the rotated source.
        assert_eq!(out.get(0, 0, Band::R), 0);
        assert_eq!(out.get(31, 31, Band::B), 0);
        // The center survives.
        assert_eq!(out.get(16, 16, Band::G), 200);
    }

    #[test]
    fn rotate_360_matches_identity_inside() {
        let img = random_image(16, 16, 3);
        let out = rotate_bicubic(&img, 360.0);
        // Tiny trig residue can push border samples out of frame; the
        // interior must survive exactly or within rounding.
        for y in 2..14 {
            for x in 2..14 {
                for band in Band::ALL {
                    let a = img.get(x, y, band) as i32;
                    let b = out.get(x, y, band) as i32;
                    assert!((a - b).abs() <= 1, "pixel ({x},{y}) {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn crop_centered_window() {
        let img = random_image(10, 8, 4);
        let out = crop_center(&img, 4).unwrap();
        assert_eq!((out.width(), out.height()), (4, 4));
        for band in Band::ALL {
            for y in 0..4 {
                for x in 0..4 {
                    assert_eq!(out.get(x, y, band), img.get(x + 3, y + 2, band));
                }
            }
        }
    }

    #[test]
    fn crop_too_large_rejected() {
        let img = random_image(8, 8, 0);
        assert!(matches!(crop_center(&img, 9), Err(Error::Domain(_))));
    }
}
