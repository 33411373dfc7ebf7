//! Baseline JPEG compression at a chosen quality factor.
//!
//! Encoding is baseline sequential with 4:2:0 chroma subsampling by default
//! (4:4:4 available); decoding follows baseline JPEG semantics.

use jpeg_encoder::{ColorType, Encoder, SamplingFactor};

use crate::corpus::{decode_image_bytes, ImageBuffer};
use crate::error::{Error, Result};

/// Chroma subsampling mode for encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChromaSampling {
    /// 4:2:0 — chroma at half resolution in both directions.
    #[default]
    Sub420,
    /// 4:4:4 — full-resolution chroma.
    Full444,
}

/// Encode as baseline JPEG at quality factor `qf` in [1, 100].
pub fn encode_jpeg(image: &ImageBuffer, qf: u8, sampling: ChromaSampling) -> Result<Vec<u8>> {
    if !(1..=100).contains(&qf) {
        return Err(Error::Config(format!(
            "JPEG quality factor must be in [1, 100], got {qf}"
        )));
    }
    if image.width() > u16::MAX as usize || image.height() > u16::MAX as usize {
        return Err(Error::Domain(format!(
            "image {}x{} exceeds JPEG dimension limits",
            image.width(),
            image.height()
        )));
    }
    let mut out = Vec::new();
    let mut encoder = Encoder::new(&mut out, qf);
    encoder.set_sampling_factor(match sampling {
        ChromaSampling::Sub420 => SamplingFactor::F_2_2,
        ChromaSampling::Full444 => SamplingFactor::F_1_1,
    });
    encoder
        .encode(
            &image.to_interleaved(),
            image.width() as u16,
            image.height() as u16,
            ColorType::Rgb,
        )
        .map_err(|e| Error::Format(format!("JPEG encoding failed: {e}")))?;
    Ok(out)
}

/// Decode a JPEG byte stream.
pub fn decode_jpeg(bytes: &[u8]) -> Result<ImageBuffer> {
    decode_image_bytes(bytes)
}

/// Encode at `qf` and decode again. Dimensions are preserved.
pub fn jpeg_roundtrip(image: &ImageBuffer, qf: u8, sampling: ChromaSampling) -> Result<ImageBuffer> {
    let bytes = encode_jpeg(image, qf, sampling)?;
    decode_jpeg(&bytes)
}
