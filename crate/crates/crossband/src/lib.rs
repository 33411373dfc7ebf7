//! Detection of GAN-generated face images from pixel co-occurrence statistics.
//!
//! The toolkit computes spatial (intra-band) and cross-band co-occurrence
//! matrices from 8-bit RGB images, stacks them into a 256x256x6 tensor (or a
//! 256x256x3 tensor for the intra-band-only baseline), and classifies the
//! tensors with a small convolutional network trained from scratch. Around
//! that sit a dataset/manifest layer, a post-processing operator suite for
//! robustness evaluation, JPEG-aware training, and a reporting pipeline.
//!
//! Module map:
//! - [`corpus`] — image decoding and dataset manifests with deterministic splits
//! - [`cooccurrence`] — co-occurrence matrices, the 6/3-channel tensor, cache files
//! - [`postprocess`] — the robustness operator suite (filters, resampling, CLAHE, JPEG, ...)
//! - [`network`] — the detector CNN: forward, backprop, SGD with momentum, checkpoints
//! - [`pipeline`] — experiment plans, sweeps, JPEG-aware runs, result tables
//! - [`oracle`] — naive reference implementations backing the self-test suite
//! - [`selftest`] — runtime verification suite used by the CLI

pub mod cooccurrence;
pub mod corpus;
pub mod error;
pub mod network;
pub mod oracle;
pub mod pipeline;
pub mod postprocess;
pub mod scalar;
pub mod selftest;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Detector model in training precision.
pub type Model32 = network::Model<f32>;
/// Detector model in the precision used for gradient verification.
pub type Model64 = network::Model<f64>;

/// Crate version string embedded in provenance headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// SHA-256 of `bytes` as lowercase hex (provenance hashing).
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    corpus::hex_string(&Sha256::digest(bytes))
}
