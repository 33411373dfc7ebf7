//! Spatial and cross-band co-occurrence matrices and the stacked input tensor.
//!
//! For a channel `R` and an offset `(dx, dy)`, the spatial matrix counts, for
//! every in-range pixel pair, the level pair `(R(x, y), R(x+dx, y+dy))`. The
//! cross-band matrix does the same with the displaced sample read from a
//! different band. Out-of-range displaced pixels are skipped (no wrap-around,
//! no padding), so an intra-band matrix over an `N x M` channel holds exactly
//! `(N - |dy|) * (M - |dx|)` counts.
//!
//! The detector input stacks six matrices in the fixed order
//! `[R, G, B, RG, RB, GB]`: three spatial slices sharing one offset and three
//! cross-band slices sharing another. The intra-band-only baseline uses just
//! the first three.

pub mod cache;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Band, ImageBuffer, Plane};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Number of intensity levels per band; matrices are `LEVELS x LEVELS`.
pub const LEVELS: usize = 256;

/// Cells in one co-occurrence matrix.
pub const CELLS: usize = LEVELS * LEVELS;

/// Row stripes of at least this many rows are counted in parallel.
const PAR_MIN_ROWS: usize = 512;
const PAR_STRIPE_ROWS: usize = 128;

/// Displacements for the two matrix families: `delta` for intra-band slices,
/// `delta_cross` for cross-band slices. Components are `(dx, dy)` in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffsetSpec {
    pub delta: (i32, i32),
    pub delta_cross: (i32, i32),
}

impl Default for OffsetSpec {
    fn default() -> Self {
        OffsetSpec {
            delta: (1, 1),
            delta_cross: (0, 0),
        }
    }
}

/// Whether tensor slices hold raw counts or are divided by their totals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    Raw,
    PerSliceSum,
}

impl Normalization {
    pub fn as_str(&self) -> &'static str {
        match self {
            Normalization::Raw => "raw",
            Normalization::PerSliceSum => "per-slice-sum",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Normalization::Raw),
            "per-slice-sum" => Ok(Normalization::PerSliceSum),
            other => Err(Error::Parse(format!("unknown normalization {other:?}"))),
        }
    }
}

/// 256x256 grid of pair counts, indexed `(reference level, displaced level)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceMatrix {
    counts: Vec<u64>,
}

impl CooccurrenceMatrix {
    fn zeros() -> Self {
        CooccurrenceMatrix {
            counts: vec![0u64; CELLS],
        }
    }

    #[inline]
    pub fn count(&self, i: u8, j: u8) -> u64 {
        self.counts[i as usize * LEVELS + j as usize]
    }

    /// Row-major counts, `i * 256 + j`.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Sum of all cells.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn merge(mut self, other: CooccurrenceMatrix) -> CooccurrenceMatrix {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self
    }
}

/// Valid coordinate range along one axis: positions `p` with both `p` and
/// `p + d` inside `[0, len)`.
fn valid_range(len: usize, d: i32) -> (usize, usize) {
    let lo = (-d).max(0) as usize;
    let hi_signed = len as i32 - d.max(0);
    (lo, hi_signed.max(0) as usize)
}

fn count_rows(
    a: &Plane<'_>,
    b: &Plane<'_>,
    (dx, dy): (i32, i32),
    y_range: std::ops::Range<usize>,
    (x0, x1): (usize, usize),
) -> CooccurrenceMatrix {
    let mut m = CooccurrenceMatrix::zeros();
    for y in y_range {
        let src = &a.row(y)[x0..x1];
        let ty = (y as i32 + dy) as usize;
        let tx0 = (x0 as i32 + dx) as usize;
        let dst = &b.row(ty)[tx0..tx0 + (x1 - x0)];
        for (&i, &j) in src.iter().zip(dst) {
            m.counts[i as usize * LEVELS + j as usize] += 1;
        }
    }
    m
}

fn pair_cooccurrence(
    a: &Plane<'_>,
    b: &Plane<'_>,
    delta: (i32, i32),
) -> Result<CooccurrenceMatrix> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::Domain(format!(
            "band dimensions differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let (x0, x1) = valid_range(a.width(), delta.0);
    let (y0, y1) = valid_range(a.height(), delta.1);
    if x0 >= x1 || y0 >= y1 {
        return Err(Error::Domain(format!(
            "offset ({}, {}) leaves no valid pixel pairs in a {}x{} channel",
            delta.0,
            delta.1,
            a.width(),
            a.height()
        )));
    }
    let rows = y1 - y0;
    if rows >= PAR_MIN_ROWS {
        // Per-stripe partial histograms; u64 addition makes the merge
        // order-independent.
        let stripes: Vec<(usize, usize)> = (y0..y1)
            .step_by(PAR_STRIPE_ROWS)
            .map(|s| (s, (s + PAR_STRIPE_ROWS).min(y1)))
            .collect();
        Ok(stripes
            .into_par_iter()
            .map(|(s, e)| count_rows(a, b, delta, s..e, (x0, x1)))
            .reduce(CooccurrenceMatrix::zeros, CooccurrenceMatrix::merge))
    } else {
        Ok(count_rows(a, b, delta, y0..y1, (x0, x1)))
    }
}

/// Spatial (intra-band) co-occurrence matrix of one channel.
pub fn spatial_cooccurrence(channel: &Plane<'_>, delta: (i32, i32)) -> Result<CooccurrenceMatrix> {
    pair_cooccurrence(channel, channel, delta)
}

/// Cross-band co-occurrence matrix: reference level from `band_a`, displaced
/// level from `band_b`.
pub fn cross_band_cooccurrence(
    band_a: &Plane<'_>,
    band_b: &Plane<'_>,
    delta_cross: (i32, i32),
) -> Result<CooccurrenceMatrix> {
    pair_cooccurrence(band_a, band_b, delta_cross)
}

/// Stack of co-occurrence matrices in slice-major order, optionally
/// normalized so each slice sums to one.
///
/// Slice order is `[R, G, B, RG, RB, GB]` for six channels and `[R, G, B]`
/// for three. Raw counts are exact in `f64` (they are far below 2^53).
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceTensor {
    channels: usize,
    normalization: Normalization,
    data: Vec<f64>,
}

impl CooccurrenceTensor {
    fn from_matrices(mats: Vec<CooccurrenceMatrix>, normalization: Normalization) -> Result<Self> {
        let channels = mats.len();
        let mut data = Vec::with_capacity(channels * CELLS);
        for m in &mats {
            match normalization {
                Normalization::Raw => data.extend(m.counts().iter().map(|&c| c as f64)),
                Normalization::PerSliceSum => {
                    let total = m.total();
                    if total == 0 {
                        return Err(Error::Domain(
                            "cannot normalize an all-zero co-occurrence slice".into(),
                        ));
                    }
                    let inv = 1.0 / total as f64;
                    data.extend(m.counts().iter().map(|&c| c as f64 * inv));
                }
            }
        }
        Ok(CooccurrenceTensor {
            channels,
            normalization,
            data,
        })
    }

    pub(crate) fn from_raw_parts(
        channels: usize,
        normalization: Normalization,
        data: Vec<f64>,
    ) -> Result<Self> {
        if channels != 3 && channels != 6 {
            return Err(Error::Shape(format!(
                "tensor must have 3 or 6 channels, got {channels}"
            )));
        }
        if data.len() != channels * CELLS {
            return Err(Error::Shape(format!(
                "tensor payload length {} does not match {} slices of {} cells",
                data.len(),
                channels,
                CELLS
            )));
        }
        Ok(CooccurrenceTensor {
            channels,
            normalization,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// One slice, row-major.
    pub fn slice(&self, k: usize) -> &[f64] {
        &self.data[k * CELLS..(k + 1) * CELLS]
    }

    /// All slices, slice-major.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Copy into a scalar buffer of length `channels * CELLS` (network input).
    pub fn write_into<F: Scalar>(&self, out: &mut [F]) {
        assert_eq!(out.len(), self.data.len(), "input buffer length mismatch");
        for (o, &v) in out.iter_mut().zip(&self.data) {
            *o = F::from_f64_lossy(v);
        }
    }
}

/// Build the 6-channel tensor `[R, G, B, RG, RB, GB]`: spatial slices use
/// `offsets.delta`, cross-band slices use `offsets.delta_cross`.
pub fn build_tensor(
    image: &ImageBuffer,
    offsets: OffsetSpec,
    normalization: Normalization,
) -> Result<CooccurrenceTensor> {
    let r = image.plane(Band::R);
    let g = image.plane(Band::G);
    let b = image.plane(Band::B);
    let mats = vec![
        spatial_cooccurrence(&r, offsets.delta)?,
        spatial_cooccurrence(&g, offsets.delta)?,
        spatial_cooccurrence(&b, offsets.delta)?,
        cross_band_cooccurrence(&r, &g, offsets.delta_cross)?,
        cross_band_cooccurrence(&r, &b, offsets.delta_cross)?,
        cross_band_cooccurrence(&g, &b, offsets.delta_cross)?,
    ];
    CooccurrenceTensor::from_matrices(mats, normalization)
}

/// Build the 3-channel intra-band tensor `[R, G, B]` (the baseline detector's
/// input); equal to slices 0..3 of [`build_tensor`] on the same inputs.
pub fn build_conet_tensor(
    image: &ImageBuffer,
    delta: (i32, i32),
    normalization: Normalization,
) -> Result<CooccurrenceTensor> {
    let mats = Band::ALL
        .iter()
        .map(|&band| spatial_cooccurrence(&image.plane(band), delta))
        .collect::<Result<Vec<_>>>()?;
    CooccurrenceTensor::from_matrices(mats, normalization)
}

/// Tensor for a detector by channel count: 6 for the cross-band detector,
/// 3 for the intra-band baseline.
pub fn build_tensor_for_channels(
    image: &ImageBuffer,
    channels: usize,
    offsets: OffsetSpec,
    normalization: Normalization,
) -> Result<CooccurrenceTensor> {
    match channels {
        6 => build_tensor(image, offsets, normalization),
        3 => build_conet_tensor(image, offsets.delta, normalization),
        other => Err(Error::Shape(format!(
            "detectors take 3- or 6-channel tensors, got {other}"
        ))),
    }
}
