//! Content-addressed tensor cache.
//!
//! Keys are SHA-256 over the decoded image planes plus the offset spec,
//! channel count, and normalization tag, so a cache entry can never go stale:
//! any change to the inputs changes the key. Timestamps play no role.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::cooccurrence::{
    build_tensor_for_channels, cache as tensor_file, CooccurrenceTensor, Normalization, OffsetSpec,
};
use crate::corpus::ImageBuffer;
use crate::error::{Error, Result};

/// Disk-backed tensor cache; a `None` directory disables persistence.
#[derive(Debug, Clone, Default)]
pub struct TensorCache {
    dir: Option<PathBuf>,
}

impl TensorCache {
    /// Cache that always recomputes.
    pub fn disabled() -> Self {
        TensorCache { dir: None }
    }

    /// Cache rooted at `dir` (created if missing).
    pub fn at(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(TensorCache { dir: Some(dir) })
    }

    pub fn directory(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Content hash of (image bytes, channels, offsets, normalization).
    pub fn key(
        image: &ImageBuffer,
        channels: usize,
        offsets: OffsetSpec,
        normalization: Normalization,
    ) -> String {
        let mut h = Sha256::new();
        h.update(b"coocc-cache-v1\0");
        h.update((image.width() as u32).to_le_bytes());
        h.update((image.height() as u32).to_le_bytes());
        h.update([channels as u8, match normalization {
            Normalization::Raw => 0u8,
            Normalization::PerSliceSum => 1u8,
        }]);
        for d in [
            offsets.delta.0,
            offsets.delta.1,
            offsets.delta_cross.0,
            offsets.delta_cross.1,
        ] {
            h.update(d.to_le_bytes());
        }
        h.update(image.plane_data());
        crate::corpus::hex_string(&h.finalize())
    }

    /// Fetch the tensor for `image`, computing and storing it on a miss.
    /// A corrupt or unreadable cache entry is recomputed and rewritten.
    pub fn get_or_compute(
        &self,
        image: &ImageBuffer,
        channels: usize,
        offsets: OffsetSpec,
        normalization: Normalization,
    ) -> Result<CooccurrenceTensor> {
        let Some(dir) = &self.dir else {
            return build_tensor_for_channels(image, channels, offsets, normalization);
        };
        let path = dir.join(format!(
            "{}.coocc",
            Self::key(image, channels, offsets, normalization)
        ));
        if path.exists() {
            if let Ok(tensor) = tensor_file::load_tensor(&path) {
                if tensor.channels() == channels && tensor.normalization() == normalization {
                    return Ok(tensor);
                }
            }
        }
        let tensor = build_tensor_for_channels(image, channels, offsets, normalization)?;
        tensor_file::save_tensor(&path, &tensor)?;
        Ok(tensor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};

    fn image(seed: u64) -> ImageBuffer {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<u8> = (0..3 * 10 * 10).map(|_| rng.random()).collect();
        ImageBuffer::from_planes(10, 10, data).unwrap()
    }

    #[test]
    fn key_depends_on_all_inputs() {
        let img = image(1);
        let base = TensorCache::key(&img, 6, OffsetSpec::default(), Normalization::PerSliceSum);
        assert_ne!(
            base,
            TensorCache::key(&img, 3, OffsetSpec::default(), Normalization::PerSliceSum)
        );
        assert_ne!(
            base,
            TensorCache::key(&img, 6, OffsetSpec::default(), Normalization::Raw)
        );
        assert_ne!(
            base,
            TensorCache::key(
                &img,
                6,
                OffsetSpec {
                    delta: (2, 1),
                    delta_cross: (0, 0)
                },
                Normalization::PerSliceSum
            )
        );
        assert_ne!(
            base,
            TensorCache::key(&image(2), 6, OffsetSpec::default(), Normalization::PerSliceSum)
        );
    }

    #[test]
    fn hit_returns_identical_tensor() {
        let dir = tempfile::tempdir().unwrap();
        let cache = TensorCache::at(dir.path()).unwrap();
        let img = image(3);
        let a = cache
            .get_or_compute(&img, 6, OffsetSpec::default(), Normalization::PerSliceSum)
            .unwrap();
        // One file landed in the cache.
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        let b = cache
            .get_or_compute(&img, 6, OffsetSpec::default(), Normalization::PerSliceSum)
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn corrupt_entry_is_recomputed() {
        let dir = tempfile::tempdir().unwrap();
        let cache = TensorCache::at(dir.path()).unwrap();
        let img = image(4);
        let a = cache
            .get_or_compute(&img, 3, OffsetSpec::default(), Normalization::Raw)
            .unwrap();
        let entry = std::fs::read_dir(dir.path())
            .unwrap()
            .next()
            .unwrap()
            .unwrap()
            .path();
        std::fs::write(&entry, b"garbage").unwrap();
        let b = cache
            .get_or_compute(&img, 3, OffsetSpec::default(), Normalization::Raw)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn disabled_cache_computes() {
        let cache = TensorCache::disabled();
        let img = image(5);
        let t = cache
            .get_or_compute(&img, 6, OffsetSpec::default(), Normalization::PerSliceSum)
            .unwrap();
        assert_eq!(t.channels(), 6);
    }
}
