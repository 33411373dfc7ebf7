//! Synthetic two-class corpus for end-to-end sanity runs.
//!
//! Class `real`: smooth images with strongly correlated bands (one shared
//! low-frequency field plus a per-band offset and faint pixel noise).
//! Class `gan`: band-independent uniform noise. Their co-occurrence tensors
//! are far apart — the real class concentrates mass near the diagonal, the
//! noise class spreads it — so a reduced detector must separate them.

use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{write_png, DatasetManifest, ImageBuffer, Label, ManifestEntry, Split};
use crate::error::{Error, Result};
use crate::network::ModelConfig;

/// Corpus sizes (per class) and generation parameters.
#[derive(Debug, Clone)]
pub struct ToyCorpusSpec {
    pub train_per_class: usize,
    pub val_per_class: usize,
    pub test_per_class: usize,
    pub side: usize,
    pub seed: u64,
}

impl Default for ToyCorpusSpec {
    fn default() -> Self {
        // 400 train / 100 val / 100 test in total, 64x64 images.
        ToyCorpusSpec {
            train_per_class: 200,
            val_per_class: 50,
            test_per_class: 50,
            side: 64,
            seed: 7,
        }
    }
}

/// Reduced detector configuration matched to the toy corpus (2 filters per
/// convolution, 8-wide head; the tensor input is always 256x256).
pub fn toy_model_config(in_channels: usize) -> ModelConfig {
    ModelConfig::reduced(in_channels, 256, 2, 8)
}

/// Training settings for the toy runs: the full-scale hyper-parameters
/// (learning rate 0.01, momentum 0.9, batch 40) capped at 20 epochs with
/// early stopping at 95% validation accuracy.
pub fn toy_train_config(seed: u64) -> crate::network::TrainConfig {
    crate::network::TrainConfig {
        learning_rate: 0.01,
        momentum: 0.9,
        batch_size: 40,
        epochs: 20,
        seed,
        early_stop_val_acc: Some(0.95),
    }
}

/// Generate the corpus under `dir` (`real/…png`, `gan/…png`) and write a
/// `toy.manifest` next to the images. Returns the manifest; paths inside it
/// are relative to `dir`.
pub fn generate_toy_corpus(dir: &Path, spec: &ToyCorpusSpec) -> Result<DatasetManifest> {
    if spec.side < 8 {
        return Err(Error::Config(format!(
            "toy images must be at least 8x8, got {}",
            spec.side
        )));
    }
    for sub in ["real", "gan"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let mut entries = Vec::new();
    let splits = [
        (Split::Train, spec.train_per_class),
        (Split::Val, spec.val_per_class),
        (Split::Test, spec.test_per_class),
    ];
    for label in [Label::Real, Label::Gan] {
        let mut serial = 0usize;
        for (split, count) in splits {
            for _ in 0..count {
                let image_seed = spec
                    .seed
                    .wrapping_mul(0x9E3779B97F4A7C15)
                    .wrapping_add(((label as u64) << 32) | serial as u64);
                let img = match label {
                    Label::Real => smooth_correlated_image(spec.side, image_seed),
                    Label::Gan => independent_noise_image(spec.side, image_seed),
                };
                let rel = format!("{}/{serial:05}.png", label.as_str());
                write_png(&img, dir.join(&rel))?;
                entries.push(ManifestEntry {
                    path: rel.into(),
                    label,
                    split,
                });
                serial += 1;
            }
        }
    }
    let total: usize = splits.iter().map(|(_, c)| c).sum();
    let ratios = [
        spec.train_per_class as f64 / total as f64,
        spec.val_per_class as f64 / total as f64,
        spec.test_per_class as f64 / total as f64,
    ];
    let manifest = DatasetManifest {
        seed: spec.seed,
        ratios,
        entries,
    };
    manifest.save(dir.join("toy.manifest"))?;
    Ok(manifest)
}

/// Shared low-frequency field + per-band offsets + faint noise.
fn smooth_correlated_image(side: usize, seed: u64) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    const GRID: usize = 5;
    let coarse: Vec<f64> = (0..GRID * GRID)
        .map(|_| 30.0 + 195.0 * rng.random::<f64>())
        .collect();
    let band_offsets: [f64; 3] = [
        24.0 * rng.random::<f64>() - 12.0,
        24.0 * rng.random::<f64>() - 12.0,
        24.0 * rng.random::<f64>() - 12.0,
    ];
    let mut planes = Vec::with_capacity(3 * side * side);
    for (band, offset) in band_offsets.into_iter().enumerate() {
        for y in 0..side {
            for x in 0..side {
                // Bilinear sample of the coarse grid.
                let gx = x as f64 / (side - 1) as f64 * (GRID - 1) as f64;
                let gy = y as f64 / (side - 1) as f64 * (GRID - 1) as f64;
                let (x0, y0) = (gx.floor() as usize, gy.floor() as usize);
                let (x1, y1) = ((x0 + 1).min(GRID - 1), (y0 + 1).min(GRID - 1));
                let (fx, fy) = (gx - x0 as f64, gy - y0 as f64);
                let top = (1.0 - fx) * coarse[y0 * GRID + x0] + fx * coarse[y0 * GRID + x1];
                let bot = (1.0 - fx) * coarse[y1 * GRID + x0] + fx * coarse[y1 * GRID + x1];
                let base = (1.0 - fy) * top + fy * bot;
                let noise = 2.0
                    * crate::postprocess::coordinate_normal(seed, x as u32, y as u32, band as u8);
                planes.push((base + offset + noise).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    ImageBuffer::from_planes(side, side, planes).expect("valid toy image")
}

/// Uniform independent levels per pixel per band.
fn independent_noise_image(side: usize, seed: u64) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xDEADBEEF);
    let planes: Vec<u8> = (0..3 * side * side).map(|_| rng.random()).collect();
    ImageBuffer::from_planes(side, side, planes).expect("valid toy image")
}
