//! Image decoding and dataset bookkeeping.
//!
//! Images are held planar (three contiguous R, G, B planes of 8-bit levels),
//! which is the layout every co-occurrence and per-band operator wants.
//! Decoding rejects anything that is not 3-band 8-bit RGB: silently converting
//! grayscale or alpha-bearing inputs would corrupt the cross-band statistics.

mod manifest;

pub use manifest::{build_split, DatasetManifest, Label, ManifestEntry, Split};
pub(crate) use manifest::hex_string;

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat, ImageReader};

use crate::error::{Error, Result};

/// Number of color bands in every image this crate handles.
pub const BANDS: usize = 3;

/// Color band of an RGB image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    R = 0,
    G = 1,
    B = 2,
}

impl Band {
    pub const ALL: [Band; 3] = [Band::R, Band::G, Band::B];
}

/// Decoded 8-bit RGB raster, stored as three planes.
///
/// Invariants: `width >= 2`, `height >= 2`, exactly three bands. The minimum
/// size guarantees at least one valid pixel pair for the default (1,1) offset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    /// Plane-major storage: `[R plane | G plane | B plane]`, each row-major.
    planes: Vec<u8>,
}

/// Borrowed view of one band of an image (or any free-standing level grid).
#[derive(Debug, Clone, Copy)]
pub struct Plane<'a> {
    width: usize,
    height: usize,
    data: &'a [u8],
}

impl<'a> Plane<'a> {
    /// Wrap a row-major level grid.
    pub fn from_slice(width: usize, height: usize, data: &'a [u8]) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Shape(format!(
                "plane data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &'a [u8] {
        self.data
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// One row of levels.
    #[inline]
    pub fn row(&self, y: usize) -> &'a [u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }
}

impl ImageBuffer {
    /// Build from plane-major data (`3 * width * height` bytes).
    pub fn from_planes(width: usize, height: usize, planes: Vec<u8>) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::Domain(format!(
                "image must be at least 2x2, got {width}x{height}"
            )));
        }
        if planes.len() != BANDS * width * height {
            return Err(Error::Shape(format!(
                "plane data length {} does not match 3x{}x{}",
                planes.len(),
                width,
                height
            )));
        }
        Ok(ImageBuffer {
            width,
            height,
            planes,
        })
    }

    /// Build from interleaved RGB data (`width * height * 3` bytes).
    pub fn from_interleaved(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != BANDS * width * height {
            return Err(Error::Shape(format!(
                "interleaved data length {} does not match {}x{}x3",
                rgb.len(),
                width,
                height
            )));
        }
        let n = width * height;
        let mut planes = vec![0u8; BANDS * n];
        for (i, px) in rgb.chunks_exact(BANDS).enumerate() {
            planes[i] = px[0];
            planes[n + i] = px[1];
            planes[2 * n + i] = px[2];
        }
        Self::from_planes(width, height, planes)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Pixels per band.
    pub fn pixels_per_band(&self) -> usize {
        self.width * self.height
    }

    /// Borrow one band as a plane view.
    pub fn plane(&self, band: Band) -> Plane<'_> {
        let n = self.pixels_per_band();
        let off = band as usize * n;
        Plane {
            width: self.width,
            height: self.height,
            data: &self.planes[off..off + n],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, band: Band) -> u8 {
        self.planes[band as usize * self.pixels_per_band() + y * self.width + x]
    }

    /// Interleaved RGB copy (the layout codecs want).
    pub fn to_interleaved(&self) -> Vec<u8> {
        let n = self.pixels_per_band();
        let mut rgb = vec![0u8; BANDS * n];
        for i in 0..n {
            rgb[3 * i] = self.planes[i];
            rgb[3 * i + 1] = self.planes[n + i];
            rgb[3 * i + 2] = self.planes[2 * n + i];
        }
        rgb
    }

    /// Raw plane-major bytes.
    pub fn plane_data(&self) -> &[u8] {
        &self.planes
    }
}

fn reject_non_rgb8(img: DynamicImage, path: &Path) -> Result<ImageBuffer> {
    match img {
        DynamicImage::ImageRgb8(rgb) => {
            let (w, h) = (rgb.width() as usize, rgb.height() as usize);
            ImageBuffer::from_interleaved(w, h, rgb.as_raw())
        }
        other => Err(Error::Format(format!(
            "{}: expected 8-bit RGB, got {:?} (grayscale/alpha inputs are rejected, not converted)",
            path.display(),
            other.color()
        ))),
    }
}

/// Decode a PNG or baseline JPEG file into an [`ImageBuffer`].
pub fn decode_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let reader = ImageReader::open(path).map_err(|source| Error::io(path, source))?;
    let img = reader.decode().map_err(|source| Error::Decode {
        path: path.to_path_buf(),
        source,
    })?;
    reject_non_rgb8(img, path)
}

/// Decode an in-memory PNG or JPEG byte stream.
pub fn decode_image_bytes(bytes: &[u8]) -> Result<ImageBuffer> {
    let img = image::load_from_memory(bytes).map_err(|source| Error::Decode {
        path: "<memory>".into(),
        source,
    })?;
    reject_non_rgb8(img, Path::new("<memory>"))
}

/// Encode as PNG bytes. PNG is lossless, so `decode(encode(img)) == img`.
pub fn encode_png(image: &ImageBuffer) -> Result<Vec<u8>> {
    let rgb = image::RgbImage::from_raw(
        image.width() as u32,
        image.height() as u32,
        image.to_interleaved(),
    )
    .expect("interleaved buffer has the right length");
    let mut out = Cursor::new(Vec::new());
    rgb.write_to(&mut out, ImageFormat::Png)
        .map_err(|source| Error::Decode {
            path: "<png-encode>".into(),
            source,
        })?;
    Ok(out.into_inner())
}

/// Encode as PNG and write to `path`.
pub fn write_png(image: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_png(image)?;
    std::fs::write(path, bytes).map_err(|source| Error::io(path, source))
}

/// Peak signal-to-noise ratio between two same-sized images, in dB.
///
/// Infinite for identical images.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::Domain(format!(
            "psnr requires equal dimensions, got {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let mut sq = 0.0f64;
    for (&pa, &pb) in a.plane_data().iter().zip(b.plane_data()) {
        let d = pa as f64 - pb as f64;
        sq += d * d;
    }
    let mse = sq / a.plane_data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0f64 * 255.0 / mse).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny_rgb(width: usize, height: usize, seed: u64) -> ImageBuffer {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<u8> = (0..3 * width * height).map(|_| rng.random()).collect();
        ImageBuffer::from_planes(width, height, data).unwrap()
    }

    #[test]
    fn interleaved_round_trip() {
        let img = tiny_rgb(5, 4, 1);
        let inter = img.to_interleaved();
        let back = ImageBuffer::from_interleaved(5, 4, &inter).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn png_bit_exact_known_bytes() {
        // 2x2 image with twelve known samples.
        let rgb: [u8; 12] = [1, 2, 3, 250, 251, 252, 7, 8, 9, 100, 110, 120];
        let img = ImageBuffer::from_interleaved(2, 2, &rgb).unwrap();
        let png = encode_png(&img).unwrap();
        let back = decode_image_bytes(&png).unwrap();
        assert_eq!(back.to_interleaved(), rgb);
        assert_eq!(back.width(), 2);
        assert_eq!(back.height(), 2);
    }

    #[test]
    fn png_round_trip_seeded_16x16() {
        let img = tiny_rgb(16, 16, 7);
        let png = encode_png(&img).unwrap();
        let back = decode_image_bytes(&png).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn full_resolution_png_dimensions() {
        // 1024x1024 PNG decodes with exact dimensions.
        let img = tiny_rgb(1024, 1024, 99);
        let png = encode_png(&img).unwrap();
        let back = decode_image_bytes(&png).unwrap();
        assert_eq!((back.width(), back.height()), (1024, 1024));
    }

    #[test]
    fn decode_from_file_and_reports_size() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        let img = tiny_rgb(33, 17, 3);
        write_png(&img, &path).unwrap();
        let back = decode_image(&path).unwrap();
        assert_eq!(back.width(), 33);
        assert_eq!(back.height(), 17);
        assert_eq!(back, img);
    }

    #[test]
    fn grayscale_rejected() {
        let gray = image::GrayImage::from_raw(4, 4, vec![7u8; 16]).unwrap();
        let mut bytes = Cursor::new(Vec::new());
        gray.write_to(&mut bytes, ImageFormat::Png).unwrap();
        let err = decode_image_bytes(&bytes.into_inner()).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "got {err:?}");
    }

    #[test]
    fn alpha_rejected() {
        let rgba = image::RgbaImage::from_raw(4, 4, vec![9u8; 64]).unwrap();
        let mut bytes = Cursor::new(Vec::new());
        rgba.write_to(&mut bytes, ImageFormat::Png).unwrap();
        let err = decode_image_bytes(&bytes.into_inner()).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn missing_file_error_names_path() {
        let err = decode_image("/nonexistent/face.png").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("face.png"), "message should name the path: {msg}");
    }

    #[test]
    fn too_small_rejected() {
        assert!(ImageBuffer::from_planes(1, 4, vec![0; 12]).is_err());
    }

    #[test]
    fn psnr_identity_infinite_and_order() {
        let img = tiny_rgb(8, 8, 11);
        assert!(psnr(&img, &img).unwrap().is_infinite());
        let mut noisy = img.to_interleaved();
        noisy[0] ^= 0x40;
        let noisy = ImageBuffer::from_interleaved(8, 8, &noisy).unwrap();
        assert!(psnr(&img, &noisy).unwrap() > 20.0);
    }

    proptest! {
        #[test]
        fn png_round_trip_random(buffers in (2usize..12, 2usize..12).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<u8>(), 3 * w * h).prop_map(move |data| (w, h, data))
        })) {
            let (w, h, data) = buffers;
            let img = ImageBuffer::from_planes(w, h, data).unwrap();
            let png = encode_png(&img).unwrap();
            let back = decode_image_bytes(&png).unwrap();
            prop_assert_eq!(img, back);
        }
    }
}
