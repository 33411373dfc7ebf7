//! Dataset manifests: labeled file lists with deterministic train/val/test splits.
//!
//! The on-disk format is line oriented so manifests diff cleanly: a single
//! header line carrying the split seed and ratios as JSON, then one
//! `path<TAB>label<TAB>split` record per image.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const HEADER_TAG: &str = "#coocc-manifest-v1 ";

/// Class label of an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Real,
    Gan,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Real, Label::Gan];

    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Real => "real",
            Label::Gan => "gan",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(Label::Real),
            "gan" => Ok(Label::Gan),
            other => Err(Error::Parse(format!("unknown label {other:?}"))),
        }
    }
}

/// Which role an image plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Parse(format!("unknown split {other:?}"))),
        }
    }
}

/// One manifest record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: Label,
    pub split: Split,
}

#[derive(Serialize, Deserialize)]
struct Header {
    seed: u64,
    ratios: [f64; 3],
}

/// Labeled dataset with an assigned train/val/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub entries: Vec<ManifestEntry>,
}

/// Assign splits to labeled paths, stratified per class.
///
/// The assignment is a pure function of `(entries, ratios, seed)`: per class,
/// a seeded shuffle orders the entries and largest-remainder apportionment
/// fixes the per-split counts, so each class count is within one item of
/// `ratio * class_size`. Entry order of the result matches the input.
pub fn build_split(
    entries: &[(PathBuf, Label)],
    ratios: [f64; 3],
    seed: u64,
) -> Result<DatasetManifest> {
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios must sum to 1.0, got {sum}"
        )));
    }
    if ratios.iter().any(|&r| r < 0.0) {
        return Err(Error::Config("split ratios must be non-negative".into()));
    }
    let mut seen = HashSet::new();
    for (path, _) in entries {
        if !seen.insert(path.as_path()) {
            return Err(Error::Config(format!(
                "duplicate path in dataset: {}",
                path.display()
            )));
        }
    }

    let mut assigned: Vec<Option<Split>> = vec![None; entries.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for class in Label::ALL {
        let mut idx: Vec<usize> = entries
            .iter()
            .enumerate()
            .filter(|(_, (_, l))| *l == class)
            .map(|(i, _)| i)
            .collect();
        if idx.is_empty() {
            return Err(Error::Config(format!(
                "dataset has no entries for class {:?}",
                class.as_str()
            )));
        }
        idx.shuffle(&mut rng);
        let counts = apportion(idx.len(), ratios);
        let mut cursor = 0usize;
        for (split, count) in Split::ALL.into_iter().zip(counts) {
            for &i in &idx[cursor..cursor + count] {
                assigned[i] = Some(split);
            }
            cursor += count;
        }
    }

    let entries = entries
        .iter()
        .zip(assigned)
        .map(|((path, label), split)| ManifestEntry {
            path: path.clone(),
            label: *label,
            split: split.expect("every entry belongs to a class"),
        })
        .collect();

    Ok(DatasetManifest {
        seed,
        ratios,
        entries,
    })
}

/// Largest-remainder apportionment of `n` items into three parts.
fn apportion(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let targets: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts: [usize; 3] = [0; 3];
    let mut used = 0usize;
    for (i, t) in targets.iter().enumerate() {
        counts[i] = t.floor() as usize;
        used += counts[i];
    }
    let mut rem: Vec<(usize, f64)> = targets
        .iter()
        .enumerate()
        .map(|(i, t)| (i, t - t.floor()))
        .collect();
    // Ties break toward the earlier split so the result is deterministic.
    rem.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for k in 0..(n - used) {
        counts[rem[k % 3].0] += 1;
    }
    counts
}

impl DatasetManifest {
    /// Entries belonging to one split.
    pub fn entries_in(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Count of (label, split) pairs.
    pub fn count(&self, label: Label, split: Split) -> usize {
        self.entries
            .iter()
            .filter(|e| e.label == label && e.split == split)
            .count()
    }

    /// Serialize to the line-oriented manifest text.
    pub fn to_text(&self) -> Result<String> {
        let header = serde_json::to_string(&Header {
            seed: self.seed,
            ratios: self.ratios,
        })
        .expect("header serializes");
        let mut out = format!("{HEADER_TAG}{header}\n");
        for e in &self.entries {
            let path = e.path.to_str().ok_or_else(|| {
                Error::Config(format!("non-UTF-8 path in manifest: {:?}", e.path))
            })?;
            if path.contains('\t') || path.contains('\n') {
                return Err(Error::Config(format!(
                    "path contains tab or newline: {path:?}"
                )));
            }
            out.push_str(path);
            out.push('\t');
            out.push_str(e.label.as_str());
            out.push('\t');
            out.push_str(e.split.as_str());
            out.push('\n');
        }
        Ok(out)
    }

    /// Parse the line-oriented manifest text.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::Parse("empty manifest".into()))?;
        let json = first
            .strip_prefix(HEADER_TAG)
            .ok_or_else(|| Error::Parse(format!("missing manifest header, got {first:?}")))?;
        let header: Header = serde_json::from_str(json)
            .map_err(|e| Error::Parse(format!("bad manifest header: {e}")))?;
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (path, label, split) = match (parts.next(), parts.next(), parts.next()) {
                (Some(p), Some(l), Some(s)) if parts.next().is_none() => (p, l, s),
                _ => {
                    return Err(Error::Parse(format!(
                        "manifest line {} is not `path<TAB>label<TAB>split`: {line:?}",
                        lineno + 2
                    )))
                }
            };
            if !seen.insert(path.to_string()) {
                return Err(Error::Parse(format!("duplicate path in manifest: {path}")));
            }
            entries.push(ManifestEntry {
                path: PathBuf::from(path),
                label: Label::parse(label)?,
                split: Split::parse(split)?,
            });
        }
        Ok(DatasetManifest {
            seed: header.seed,
            ratios: header.ratios,
            entries,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = self.to_text()?;
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut text = String::new();
        std::io::BufReader::new(f)
            .read_to_string(&mut text)
            .map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// SHA-256 of the canonical serialization, as lowercase hex.
    pub fn fingerprint(&self) -> Result<String> {
        let text = self.to_text()?;
        let digest = Sha256::digest(text.as_bytes());
        Ok(hex_string(&digest))
    }
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn paths(label: Label, n: usize) -> Vec<(PathBuf, Label)> {
        (0..n)
            .map(|i| (PathBuf::from(format!("{}/{i:05}.png", label.as_str())), label))
            .collect()
    }

    #[test]
    fn paper_scale_split_counts() {
        let mut entries = paths(Label::Real, 20000);
        entries.extend(paths(Label::Gan, 20000));
        let m = build_split(&entries, [0.6, 0.2, 0.2], 9).unwrap();
        for label in Label::ALL {
            assert_eq!(m.count(label, Split::Train), 12000);
            assert_eq!(m.count(label, Split::Val), 4000);
            assert_eq!(m.count(label, Split::Test), 4000);
        }
    }

    #[test]
    fn all_train_ratio() {
        let mut entries = paths(Label::Real, 5);
        entries.extend(paths(Label::Gan, 3));
        let m = build_split(&entries, [1.0, 0.0, 0.0], 1).unwrap();
        assert!(m.entries.iter().all(|e| e.split == Split::Train));
    }

    #[test]
    fn split_is_deterministic() {
        let mut entries = paths(Label::Real, 31);
        entries.extend(paths(Label::Gan, 17));
        let a = build_split(&entries, [0.6, 0.2, 0.2], 1234).unwrap();
        let b = build_split(&entries, [0.6, 0.2, 0.2], 1234).unwrap();
        assert_eq!(a, b);
        let c = build_split(&entries, [0.6, 0.2, 0.2], 1235).unwrap();
        assert_ne!(a, c, "different seeds should (generally) shuffle differently");
    }

    #[test]
    fn empty_class_rejected() {
        let entries = paths(Label::Real, 4);
        let err = build_split(&entries, [0.6, 0.2, 0.2], 0).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn bad_ratios_rejected() {
        let mut entries = paths(Label::Real, 2);
        entries.extend(paths(Label::Gan, 2));
        assert!(build_split(&entries, [0.5, 0.2, 0.2], 0).is_err());
    }

    #[test]
    fn duplicate_paths_rejected() {
        let mut entries = paths(Label::Real, 2);
        entries.push(entries[0].clone());
        entries.extend(paths(Label::Gan, 2));
        assert!(build_split(&entries, [0.6, 0.2, 0.2], 0).is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut entries = paths(Label::Real, 6);
        entries.extend(paths(Label::Gan, 5));
        let m = build_split(&entries, [0.5, 0.25, 0.25], 77).unwrap();
        let text = m.to_text().unwrap();
        let back = DatasetManifest::from_text(&text).unwrap();
        assert_eq!(m, back);
        assert_eq!(m.fingerprint().unwrap(), back.fingerprint().unwrap());
    }

    proptest! {
        #[test]
        fn splits_partition_and_stratify(
            n_real in 1usize..60,
            n_gan in 1usize..60,
            seed in any::<u64>(),
            which in 0usize..4,
        ) {
            let ratios = [[0.6, 0.2, 0.2], [0.5, 0.25, 0.25], [0.8, 0.1, 0.1], [0.34, 0.33, 0.33]][which];
            let mut entries = paths(Label::Real, n_real);
            entries.extend(paths(Label::Gan, n_gan));
            let m = build_split(&entries, ratios, seed).unwrap();
            // Partition: every entry in exactly one split.
            prop_assert_eq!(m.entries.len(), n_real + n_gan);
            for (label, n) in [(Label::Real, n_real), (Label::Gan, n_gan)] {
                let mut total = 0;
                for (split, ratio) in Split::ALL.into_iter().zip(ratios) {
                    let c = m.count(label, split);
                    total += c;
                    // Stratification: within one item of the target.
                    prop_assert!((c as f64 - ratio * n as f64).abs() <= 1.0 + 1e-12,
                        "class {:?} split {:?}: {} vs target {}", label, split, c, ratio * n as f64);
                }
                prop_assert_eq!(total, n);
            }
        }
    }
}
