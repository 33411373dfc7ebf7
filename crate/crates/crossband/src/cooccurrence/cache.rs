//! Binary container for co-occurrence tensors.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       8     magic "COOCTNSR"
//! 8       1     version (1)
//! 9       2     rows (256)
//! 11      2     cols (256)
//! 13      1     channels (3 or 6)
//! 14      1     normalization (0 = raw, 1 = per-slice-sum)
//! 15      ...   payload: rows*cols*channels f64, slice-major
//! ```
//!
//! The payload is written bit-for-bit, so files are identical across
//! platforms and reruns.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{CooccurrenceTensor, Normalization, CELLS, LEVELS};

pub const MAGIC: &[u8; 8] = b"COOCTNSR";
pub const FORMAT_VERSION: u8 = 1;

fn norm_tag(n: Normalization) -> u8 {
    match n {
        Normalization::Raw => 0,
        Normalization::PerSliceSum => 1,
    }
}

fn norm_from_tag(tag: u8) -> Result<Normalization> {
    match tag {
        0 => Ok(Normalization::Raw),
        1 => Ok(Normalization::PerSliceSum),
        other => Err(Error::Checkpoint(format!(
            "unknown normalization tag {other}"
        ))),
    }
}

/// Serialize a tensor into the container format.
pub fn write_tensor(mut w: impl Write, tensor: &CooccurrenceTensor) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&[FORMAT_VERSION])?;
    w.write_all(&(LEVELS as u16).to_le_bytes())?;
    w.write_all(&(LEVELS as u16).to_le_bytes())?;
    w.write_all(&[tensor.channels() as u8, norm_tag(tensor.normalization())])?;
    let mut payload = Vec::with_capacity(tensor.data().len() * 8);
    for v in tensor.data() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&payload)
}

/// Deserialize a tensor from the container format.
pub fn read_tensor(mut r: impl Read) -> Result<CooccurrenceTensor> {
    let io_err = |e: std::io::Error| Error::Checkpoint(format!("tensor container: {e}"));
    let mut head = [0u8; 15];
    r.read_exact(&mut head).map_err(io_err)?;
    if &head[0..8] != MAGIC {
        return Err(Error::Checkpoint("bad tensor container magic".into()));
    }
    if head[8] != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported tensor container version {}",
            head[8]
        )));
    }
    let rows = u16::from_le_bytes([head[9], head[10]]) as usize;
    let cols = u16::from_le_bytes([head[11], head[12]]) as usize;
    if rows != LEVELS || cols != LEVELS {
        return Err(Error::Checkpoint(format!(
            "unsupported tensor dimensions {rows}x{cols}"
        )));
    }
    let channels = head[13] as usize;
    if channels != 3 && channels != 6 {
        return Err(Error::Checkpoint(format!(
            "tensor container must hold 3 or 6 slices, got {channels}"
        )));
    }
    let normalization = norm_from_tag(head[14])?;
    let mut payload = vec![0u8; channels * CELLS * 8];
    r.read_exact(&mut payload).map_err(io_err)?;
    let mut tail = [0u8; 1];
    if r.read(&mut tail).map_err(io_err)? != 0 {
        return Err(Error::Checkpoint("trailing bytes in tensor container".into()));
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    CooccurrenceTensor::from_raw_parts(channels, normalization, data)
}

/// Write a tensor file atomically (temp file + rename).
pub fn save_tensor(path: impl AsRef<Path>, tensor: &CooccurrenceTensor) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    write_tensor(&mut f, tensor).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Read a tensor file.
pub fn load_tensor(path: impl AsRef<Path>) -> Result<CooccurrenceTensor> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_tensor(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cooccurrence::{build_tensor, OffsetSpec};
    use crate::corpus::ImageBuffer;
    use rand::{RngExt, SeedableRng};

    fn sample_tensor(norm: Normalization) -> CooccurrenceTensor {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let data: Vec<u8> = (0..3 * 12 * 12).map(|_| rng.random()).collect();
        let img = ImageBuffer::from_planes(12, 12, data).unwrap();
        build_tensor(&img, OffsetSpec::default(), norm).unwrap()
    }

    #[test]
    fn round_trip_bit_exact() {
        for norm in [Normalization::Raw, Normalization::PerSliceSum] {
            let t = sample_tensor(norm);
            let mut buf = Vec::new();
            write_tensor(&mut buf, &t).unwrap();
            let back = read_tensor(buf.as_slice()).unwrap();
            assert_eq!(t, back);

            // Byte-level determinism: writing twice yields identical bytes.
            let mut buf2 = Vec::new();
            write_tensor(&mut buf2, &t).unwrap();
            assert_eq!(buf, buf2);
        }
    }

    #[test]
    fn corrupted_magic_rejected() {
        let t = sample_tensor(Normalization::Raw);
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        buf[0] ^= 0xFF;
        assert!(matches!(
            read_tensor(buf.as_slice()),
            Err(Error::Checkpoint(_))
        ));
    }

    #[test]
    fn truncated_payload_rejected() {
        let t = sample_tensor(Normalization::Raw);
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        buf.truncate(buf.len() - 9);
        assert!(read_tensor(buf.as_slice()).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.coocc");
        let t = sample_tensor(Normalization::PerSliceSum);
        save_tensor(&path, &t).unwrap();
        let back = load_tensor(&path).unwrap();
        assert_eq!(t, back);
    }
}
